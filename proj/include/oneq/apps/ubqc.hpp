#pragma once

// Blind delegated computation on a one-dimensional measurement chain. The client hides
// each logical angle phi behind a secret rotation theta and a padding bit r; the server
// only ever sees delta = phi' - theta + r*pi on the 8-point angle grid.

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>
#include <oneq/protocol/operations.hpp>
#include <oneq/qcore/basis.hpp>
#include <oneq/qcore/statevector.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace oneq::apps {

/// Angles are integers k on the grid k * pi/4, k in 0..7.
inline constexpr int kAngleGrid = 8;

inline int grid_mod(int k) { return ((k % kAngleGrid) + kAngleGrid) % kAngleGrid; }
inline double grid_angle(int k) { return grid_mod(k) * std::numbers::pi / 4.0; }

/// delta = phi - theta + pi r (mod 2 pi), all on the grid.
inline int ubqc_delta(int phi, int theta, int r) { return grid_mod(phi - theta + 4 * r); }

struct UbqcConfig {
    int k_pairs = 1;
    std::vector<int> pattern;  // logical angle of each chain qubit, grid units
    bool exact_mode = true;

    void validate() const {
        if (pattern.empty()) throw ConfigError("ubqc: pattern is empty");
        if (static_cast<int>(pattern.size()) > k_pairs) throw ConfigError("ubqc: pattern longer than k_pairs");
        for (int a : pattern) {
            if (a < 0 || a >= kAngleGrid) throw ConfigError("ubqc: pattern angles must be grid indices 0..7");
        }
    }
};

struct UbqcRound {
    int theta = 0;  // client secret
    int m = 0;      // client's remote-preparation outcome
    int r = 0;      // padding bit
    int phi = 0;    // adapted logical angle
    int delta = 0;  // sent to the server
    int s = 0;      // server outcome
    int b = 0;      // decoded bit s ^ r
};

/// Client side: secret choices, adaptive angles and decoding.
class UbqcClient {
public:
    UbqcClient(UbqcConfig cfg, Rng& rng) : cfg_(std::move(cfg)), rng_(rng) {
        cfg_.validate();
        rounds_.resize(cfg_.pattern.size());
        for (auto& rd : rounds_) {
            rd.theta = static_cast<int>(rng_.below(kAngleGrid));
            rd.r = rng_.bit();
        }
    }

    std::size_t size() const { return rounds_.size(); }
    int theta(std::size_t j) const { return rounds_.at(j).theta; }

    /// Records the outcome of measuring the client half of pair j in Equatorial(theta_j).
    void prepared(std::size_t j, int m) { rounds_.at(j).m = m; }

    /// Angle for round j; requires the decoded bits of rounds j-1 and j-2.
    int next_delta(std::size_t j) {
        if (j != next_) throw SimulationError("ubqc: rounds must run in order");
        auto& rd = rounds_[j];
        const int x = j >= 1 ? rounds_[j - 1].b : 0;
        const int z = j >= 2 ? rounds_[j - 2].b : 0;
        rd.phi = grid_mod((x ? -cfg_.pattern[j] : cfg_.pattern[j]) + 4 * z);
        // the server qubit was left in |+_{-theta + m pi}>, so the effective secret is theta + m pi
        rd.delta = ubqc_delta(rd.phi, rd.theta + 4 * rd.m, rd.r);
        return rd.delta;
    }

    void receive(std::size_t j, int s) {
        if (j != next_) throw SimulationError("ubqc: outcome for an unexpected round");
        rounds_[j].s = s;
        rounds_[j].b = s ^ rounds_[j].r;
        ++next_;
    }

    bool done() const { return next_ == rounds_.size(); }
    const std::vector<UbqcRound>& rounds() const { return rounds_; }
    int output() const { return rounds_.back().b; }

private:
    UbqcConfig cfg_;
    Rng& rng_;
    std::vector<UbqcRound> rounds_;
    std::size_t next_ = 0;
};

/// Remote preparation: the client measures its half of a Bell pair sampled from the Werner
/// mixture in Equatorial(theta); the server's half is returned with the outcome.
struct RemotePrep {
    int m;
    qcore::PureState server_qubit;
};

inline RemotePrep remote_prepare(double w, int theta, Rng& rng) {
    auto pair = qcore::bell_state(protocol::sample_bell_index(w, rng));  // qubit 0 client, 1 server
    auto res = qcore::oracle_measure(pair, 0, qcore::MeasurementBasis::equatorial(grid_angle(theta)), rng);
    return {res.bit, std::move(res.post)};
}

/// Server side in exact mode: keeps at most two chain qubits in the statevector; each
/// qubit is entangled with its successor just before it is measured, then removed.
class UbqcServer {
public:
    void receive_qubit(qcore::PureState q) {
        if (q.n_qubits() != 1) throw DomainError("ubqc server: expects single qubits");
        pending_.push_back(std::move(q));
    }

    int measure_next(int delta, Rng& rng) {
        if (next_ >= pending_.size()) throw ResourceError("ubqc server: no qubit left to measure");
        if (!active_) active_ = pending_[next_];
        if (next_ + 1 < pending_.size()) {
            active_ = active_->tensor(pending_[next_ + 1]);  // successor becomes qubit 1
            qcore::apply_cz(*active_, 0, 1);
        }
        auto res = qcore::oracle_measure(*active_, 0, qcore::MeasurementBasis::equatorial(grid_angle(delta)), rng);
        ++next_;
        if (next_ < pending_.size()) {
            active_ = std::move(res.post);
        } else {
            active_.reset();
        }
        return res.bit;
    }

private:
    std::vector<qcore::PureState> pending_;
    std::optional<qcore::PureState> active_;
    std::size_t next_ = 0;
};

enum class UbqcFailure { None, ClassicalRound, DecoheredResource, InsufficientPairs };

inline const char* to_string(UbqcFailure f) {
    switch (f) {
        case UbqcFailure::None: return "None";
        case UbqcFailure::ClassicalRound: return "ClassicalRound";
        case UbqcFailure::DecoheredResource: return "DecoheredResource";
        case UbqcFailure::InsufficientPairs: return "InsufficientPairs";
    }
    return "?";
}

struct UbqcResult {
    UbqcFailure failure = UbqcFailure::None;
    std::vector<UbqcRound> rounds;
    std::vector<int> bits;  // decoded b_n

    bool ok() const { return failure == UbqcFailure::None; }
    int output() const { return bits.empty() ? 0 : bits.back(); }
};

/// Per-pair source: Werner parameter at remote-preparation time, or nothing if the pair
/// could not be obtained or had decohered.
using UbqcPairSource = std::function<std::optional<double>(std::size_t)>;
using UbqcChannel = std::function<bool(double bits)>;

/// Runs the whole protocol synchronously. In exact mode the server measures real qubits;
/// otherwise its outcomes are fair coins and only the transcript is meaningful.
inline UbqcResult ubqc_run(const UbqcConfig& cfg, const UbqcPairSource& pairs, const UbqcChannel& channel,
                           Rng& client_rng, Rng& server_rng) {
    UbqcClient client(cfg, client_rng);
    UbqcServer server;
    UbqcResult res;
    for (std::size_t j = 0; j < client.size(); ++j) {
        auto w = pairs(j);
        if (!w) {
            res.failure = UbqcFailure::DecoheredResource;
            res.rounds = client.rounds();
            return res;
        }
        if (cfg.exact_mode) {
            auto prep = remote_prepare(*w, client.theta(j), client_rng);
            client.prepared(j, prep.m);
            server.receive_qubit(std::move(prep.server_qubit));
        } else {
            client.prepared(j, client_rng.bit());
        }
    }
    for (std::size_t j = 0; j < client.size(); ++j) {
        const int delta = client.next_delta(j);
        if (channel && !channel(3.0)) {
            res.failure = UbqcFailure::ClassicalRound;
            break;
        }
        const int s = cfg.exact_mode ? server.measure_next(delta, server_rng) : server_rng.bit();
        if (channel && !channel(1.0)) {
            res.failure = UbqcFailure::ClassicalRound;
            break;
        }
        client.receive(j, s);
    }
    res.rounds = client.rounds();
    if (res.ok()) {
        for (const auto& rd : res.rounds) res.bits.push_back(rd.b);
    }
    return res;
}

/// Logical reference: chi_1 = |+>, chi_{j+1} = H P(-phi_j) chi_j; the output is the
/// outcome of measuring chi_n in Equatorial(phi_n). Returns P(output = 0).
inline double ubqc_direct_p0(std::span<const int> pattern) {
    if (pattern.empty()) throw DomainError("ubqc_direct_p0: empty pattern");
    const double r = std::numbers::sqrt2 / 2.0;
    auto chi = qcore::PureState::qubit(r, r);
    for (std::size_t j = 0; j + 1 < pattern.size(); ++j) {
        qcore::apply(chi, qcore::Gate::rz(-grid_angle(pattern[j])), {0});  // P(-phi) up to phase
        qcore::apply(chi, qcore::Gate::h(), {0});
    }
    return qcore::probability_of(chi, 0, qcore::MeasurementBasis::equatorial(grid_angle(pattern.back())), 0);
}

struct ChiSquare {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    bool reliable = true;
};

inline constexpr std::size_t kBlindnessMinRounds = 10000;

inline std::array<std::uint64_t, kAngleGrid> delta_histogram(std::span<const int> deltas) {
    std::array<std::uint64_t, kAngleGrid> h{};
    for (int d : deltas) ++h.at(static_cast<std::size_t>(grid_mod(d)));
    return h;
}

/// Chi-square test of the transmitted angles against the uniform distribution on 8 bins.
inline ChiSquare ubqc_blindness_check(std::span<const int> deltas) {
    ChiSquare out;
    out.dof = kAngleGrid - 1;
    out.reliable = deltas.size() >= kBlindnessMinRounds;
    if (deltas.empty()) {
        out.reliable = false;
        return out;
    }
    const auto h = delta_histogram(deltas);
    const double expected = static_cast<double>(deltas.size()) / kAngleGrid;
    for (auto c : h) out.statistic += (static_cast<double>(c) - expected) * (static_cast<double>(c) - expected) / expected;
    boost::math::chi_squared dist(out.dof);
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
    return out;
}

/// Two-sample chi-square (2 x 8 contingency table) between two delta transcripts.
inline ChiSquare ubqc_two_sample_check(std::span<const int> first, std::span<const int> second) {
    ChiSquare out;
    out.reliable = first.size() >= kBlindnessMinRounds && second.size() >= kBlindnessMinRounds;
    const auto h1 = delta_histogram(first);
    const auto h2 = delta_histogram(second);
    const double n1 = static_cast<double>(first.size());
    const double n2 = static_cast<double>(second.size());
    int used = 0;
    for (int k = 0; k < kAngleGrid; ++k) {
        const double col = static_cast<double>(h1[k] + h2[k]);
        if (col == 0.0) continue;
        ++used;
        const double e1 = col * n1 / (n1 + n2);
        const double e2 = col * n2 / (n1 + n2);
        out.statistic += (h1[k] - e1) * (h1[k] - e1) / e1 + (h2[k] - e2) * (h2[k] - e2) / e2;
    }
    out.dof = std::max(1, used - 1);
    boost::math::chi_squared dist(out.dof);
    out.p_value = boost::math::cdf(boost::math::complement(dist, out.statistic));
    return out;
}

}  // namespace oneq::apps
