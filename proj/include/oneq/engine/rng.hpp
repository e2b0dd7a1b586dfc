#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string_view>

namespace oneq {

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) noexcept {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Key for the stream owned by (seed, node, purpose). Pure function of its inputs.
constexpr std::uint64_t derive_key(std::uint64_t seed, std::string_view node,
                                   std::string_view purpose) noexcept {
    std::uint64_t k = detail::mix64(seed + detail::kGolden);
    k = detail::mix64(k ^ detail::fnv1a(node));
    k = detail::mix64(k ^ (detail::fnv1a(purpose) * 3 + 1));
    return k;
}

/// Seed of replication `index` of a sweep rooted at `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return detail::mix64(detail::mix64(seed ^ 0x5EEDULL) + index * detail::kGolden);
}

/// Counter-based SplitMix64 stream.
///
/// The n-th output is mix64(key + n * golden), so a stream is fully determined by its key
/// and position. All sampling helpers are implemented here rather than through <random>
/// distributions so traces stay identical across standard library implementations.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit constexpr Rng(std::uint64_t key = 0) noexcept : state_(key) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() noexcept {
        state_ += detail::kGolden;
        return detail::mix64(state_);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    int bit() noexcept { return static_cast<int>((*this)() >> 63); }

    /// Uniform integer in [0, n). Lemire's nearly-divisionless rejection.
    std::uint64_t below(std::uint64_t n) noexcept {
        if (n == 0) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>((*this)()) * n;
        auto low = static_cast<std::uint64_t>(m);
        if (low < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (low < threshold) {
                m = static_cast<unsigned __int128>((*this)()) * n;
                low = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    double exponential(double mean) noexcept { return -mean * std::log1p(-uniform()); }

    /// Number of trials up to and including the first success (support 1, 2, ...).
    std::uint64_t geometric(double p) noexcept {
        if (p >= 1.0) return 1;
        if (p <= 0.0) return std::numeric_limits<std::uint64_t>::max();
        const double u = 1.0 - uniform();
        return 1 + static_cast<std::uint64_t>(std::floor(std::log(u) / std::log1p(-p)));
    }

    constexpr std::uint64_t position_key() const noexcept { return state_; }

private:
    std::uint64_t state_;
};

}  // namespace oneq
