#pragma once

// Entanglement-based key distribution (BBM92): random Z/X measurements on shared pairs,
// sifting, QBER estimation on a sacrificed subset, and privacy amplification.

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>
#include <oneq/qcore/basis.hpp>
#include <oneq/qcore/werner.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oneq::apps {

using Bits = std::vector<std::uint8_t>;

struct QkdConfig {
    int n_pairs = 1000;
    int k_target = 1;
    double sacrifice_fraction = 0.1;  // zero disables QBER estimation
    double qber_abort = 0.11;

    void validate() const {
        if (n_pairs < 1) throw ConfigError("qkd: n_pairs must be at least 1");
        if (k_target < 0 || k_target > n_pairs) throw ConfigError("qkd: k_target must lie in [0, n_pairs]");
        if (!(sacrifice_fraction >= 0.0 && sacrifice_fraction < 1.0)) {
            throw ConfigError("qkd: sacrifice_fraction must lie in [0, 1)");
        }
        if (sacrifice_fraction > 0.0 && sacrifice_fraction * k_target < 1.0) {
            throw ConfigError("qkd: sacrifice_fraction * k_target must be at least 1 when estimating QBER");
        }
        if (!(qber_abort >= 0.0 && qber_abort <= 0.5)) throw ConfigError("qkd: qber_abort must lie in [0, 0.5]");
    }
};

enum class QkdAbort { None, InsufficientKey, QberAboveThreshold, NoClassicalCoverage };

inline const char* to_string(QkdAbort a) {
    switch (a) {
        case QkdAbort::None: return "None";
        case QkdAbort::InsufficientKey: return "InsufficientKey";
        case QkdAbort::QberAboveThreshold: return "QberAboveThreshold";
        case QkdAbort::NoClassicalCoverage: return "NoClassicalCoverage";
    }
    return "?";
}

inline double binary_entropy(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw DomainError("binary_entropy: p outside [0, 1]");
    if (p == 0.0 || p == 1.0) return 0.0;
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

/// Asymptotic one-way key length after error correction and privacy amplification.
inline std::size_t final_key_length(std::size_t n_remaining, double qber) {
    const double rate = std::max(0.0, 1.0 - 2.0 * binary_entropy(std::clamp(qber, 0.0, 1.0)));
    return static_cast<std::size_t>(std::floor(static_cast<double>(n_remaining) * rate + 1e-9));
}

struct SiftResult {
    Bits a;
    Bits b;
    std::size_t matched = 0;
};

/// Keeps the positions where both parties used the same basis (0 = Z, 1 = X).
inline SiftResult qkd_sift(std::span<const std::uint8_t> bases_a, std::span<const std::uint8_t> bases_b,
                           std::span<const std::uint8_t> bits_a, std::span<const std::uint8_t> bits_b) {
    const auto n = bases_a.size();
    if (bases_b.size() != n || bits_a.size() != n || bits_b.size() != n) {
        throw DomainError("qkd_sift: inputs differ in length");
    }
    SiftResult out;
    for (std::size_t i = 0; i < n; ++i) {
        if (bases_a[i] != bases_b[i]) continue;
        out.a.push_back(bits_a[i]);
        out.b.push_back(bits_b[i]);
    }
    out.matched = out.a.size();
    return out;
}

/// Toeplitz hashing over GF(2): out[i] = XOR_j T(i - j) key[j] with T drawn from `seed_rng`.
/// Both parties run it with the same public seed.
inline Bits toeplitz_hash(std::span<const std::uint8_t> key, std::size_t out_len, Rng seed_rng) {
    const std::size_t n = key.size();
    Bits out(out_len, 0);
    if (n == 0 || out_len == 0) return out;
    // diagonal d = i - j + (n - 1) in [0, n + out_len - 2]
    const std::size_t diag = n + out_len - 1;
    std::vector<std::uint64_t> t((diag + 63) / 64 + 1, 0);
    for (auto& word : t) word = seed_rng();

    // reversed key packed into words so each output bit is a popcount of an AND
    const std::size_t kw = (n + 63) / 64;
    std::vector<std::uint64_t> rev(kw, 0);
    for (std::size_t j = 0; j < n; ++j) {
        if (key[n - 1 - j]) rev[j / 64] |= std::uint64_t{1} << (j % 64);
    }
    auto t_bits_at = [&](std::size_t start, std::size_t w) {
        // 64 bits of t beginning at bit position start + 64 w
        const std::size_t pos = start + 64 * w;
        const std::size_t idx = pos / 64, off = pos % 64;
        std::uint64_t v = t[idx] >> off;
        if (off && idx + 1 < t.size()) v |= t[idx + 1] << (64 - off);
        return v;
    };
    for (std::size_t i = 0; i < out_len; ++i) {
        // row i uses T(i - j) for j = 0..n-1, i.e. t at i + (n-1) - j = i + m with m = n-1-j
        std::uint64_t acc = 0;
        for (std::size_t w = 0; w < kw; ++w) acc ^= t_bits_at(i, w) & rev[w];
        out[i] = static_cast<std::uint8_t>(__builtin_popcountll(acc) & 1);
    }
    return out;
}

struct QkdRaw {
    Bits bases_a, bases_b, bits_a, bits_b;
    std::vector<double> w_used;  // Werner parameter of each measured pair
    std::size_t requested = 0;

    std::size_t delivered() const { return bits_a.size(); }
};

/// Measures one pair of parameter w in uniformly chosen bases and appends the outcome.
inline void qkd_measure(QkdRaw& raw, double w, Rng& rng_a, Rng& rng_b, Rng& rng_pair) {
    const int ba = rng_a.bit();
    const int bb = rng_b.bit();
    qcore::WernerPair pair(ResourceId{0}, "a", "b", w, 0.0);
    const auto basis = [](int b) { return b ? qcore::MeasurementBasis::x() : qcore::MeasurementBasis::z(); };
    const auto [xa, xb] = qcore::measure_pair(pair, basis(ba), basis(bb), rng_pair);
    raw.bases_a.push_back(static_cast<std::uint8_t>(ba));
    raw.bases_b.push_back(static_cast<std::uint8_t>(bb));
    raw.bits_a.push_back(static_cast<std::uint8_t>(xa));
    raw.bits_b.push_back(static_cast<std::uint8_t>(xb));
    raw.w_used.push_back(w);
}

struct QkdResult {
    QkdAbort abort = QkdAbort::None;
    std::size_t requested = 0;
    std::size_t delivered = 0;
    std::size_t sifted = 0;
    double sift_fraction = 0.0;      // sifted / delivered
    double sift_discard_rate = 0.0;  // 1 - sift_fraction: basis-mismatch discards
    std::size_t sifted_disagreements = 0;
    std::size_t sacrificed = 0;
    double qber = 0.0;      // estimate from the sacrificed subset
    double qber_true = 0.0; // disagreement rate over all sifted bits
    std::size_t key_length = 0;
    Bits key_a;
    Bits key_b;

    bool ok() const { return abort == QkdAbort::None; }
    bool keys_match() const { return key_a == key_b; }
};

/// Classical post-processing messages, each true if delivered.
using ClassicalChannel = std::function<bool(double bits)>;

/// Sifting, estimation and amplification over measured data. `channel` carries every
/// public message (basis announcements, sacrificed bits, reconciliation syndrome).
///
/// Error correction is idealised: Bob's key is corrected to Alice's and the leaked
/// information is the h2(e) term of the key-length formula.
inline QkdResult qkd_postprocess(const QkdRaw& raw, const QkdConfig& cfg, const ClassicalChannel& channel,
                                 Rng& rng) {
    QkdResult res;
    res.requested = raw.requested;
    res.delivered = raw.delivered();
    const double n_deliv = static_cast<double>(res.delivered);

    if (!channel(std::max(1.0, n_deliv)) || !channel(std::max(1.0, n_deliv))) {
        res.abort = QkdAbort::NoClassicalCoverage;
        return res;
    }
    auto sift = qkd_sift(raw.bases_a, raw.bases_b, raw.bits_a, raw.bits_b);
    res.sifted = sift.matched;
    res.sift_fraction = res.delivered ? static_cast<double>(res.sifted) / n_deliv : 0.0;
    res.sift_discard_rate = res.delivered ? 1.0 - res.sift_fraction : 0.0;
    for (std::size_t i = 0; i < sift.matched; ++i) res.sifted_disagreements += sift.a[i] != sift.b[i];
    res.qber_true = sift.matched ? static_cast<double>(res.sifted_disagreements) / static_cast<double>(sift.matched) : 0.0;

    if (res.sifted < static_cast<std::size_t>(cfg.k_target) || res.sifted == 0) {
        res.abort = QkdAbort::InsufficientKey;
        return res;
    }

    // sacrifice a simple random subset (partial Fisher-Yates over positions)
    std::vector<std::size_t> order(sift.matched);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::size_t m = 0;
    if (cfg.sacrifice_fraction > 0.0) {
        m = static_cast<std::size_t>(std::ceil(cfg.sacrifice_fraction * static_cast<double>(sift.matched)));
        m = std::clamp<std::size_t>(m, 1, sift.matched);
    }
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
        std::swap(order[i], order[j]);
    }
    std::size_t errors = 0;
    for (std::size_t i = 0; i < m; ++i) errors += sift.a[order[i]] != sift.b[order[i]];
    res.sacrificed = m;
    res.qber = m ? static_cast<double>(errors) / static_cast<double>(m) : 0.0;
    if (m && !channel(2.0 * static_cast<double>(m))) {
        res.abort = QkdAbort::NoClassicalCoverage;
        return res;
    }
    if (res.qber > cfg.qber_abort) {
        res.abort = QkdAbort::QberAboveThreshold;
        return res;
    }

    std::vector<bool> revealed(sift.matched, false);
    for (std::size_t i = 0; i < m; ++i) revealed[order[i]] = true;
    Bits rem_a, rem_b;
    for (std::size_t i = 0; i < sift.matched; ++i) {
        if (revealed[i]) continue;
        rem_a.push_back(sift.a[i]);
        rem_b.push_back(sift.b[i]);
    }
    const std::size_t len = final_key_length(rem_a.size(), res.qber);
    if (len > 0 && !channel(std::max(1.0, static_cast<double>(rem_a.size() - len)))) {
        res.abort = QkdAbort::NoClassicalCoverage;
        return res;
    }
    rem_b = rem_a;  // idealised error correction
    const Rng seed_rng{rng()};
    res.key_a = toeplitz_hash(rem_a, len, seed_rng);
    res.key_b = toeplitz_hash(rem_b, len, seed_rng);
    res.key_length = len;
    return res;
}

/// Yields the Werner parameter of the next delivered pair, or nothing if it was lost.
using PairSource = std::function<std::optional<double>()>;

/// Self-contained BBM92 run: draws n_pairs from `source`, then post-processes.
inline QkdResult qkd_run(const QkdConfig& cfg, const PairSource& source, const ClassicalChannel& channel,
                         Rng& rng) {
    cfg.validate();
    QkdRaw raw;
    raw.requested = static_cast<std::size_t>(cfg.n_pairs);
    Rng rng_a{rng()}, rng_b{rng()}, rng_pair{rng()};
    for (int i = 0; i < cfg.n_pairs; ++i) {
        if (auto w = source()) qkd_measure(raw, *w, rng_a, rng_b, rng_pair);
    }
    return qkd_postprocess(raw, cfg, channel, rng);
}

}  // namespace oneq::apps
