#include <oneq/apps/qkd.hpp>
#include <oneq/apps/sensing.hpp>
#include <oneq/apps/ubqc.hpp>
#include <oneq/engine/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

using namespace oneq;
using namespace oneq::apps;

namespace {

// Bit-by-bit Toeplitz product with the diagonal stream read straight from the seed.
Bits naive_toeplitz(const Bits& key, std::size_t out_len, Rng seed) {
    const std::size_t n = key.size();
    std::vector<int> diag;
    while (diag.size() < n + out_len) {
        const auto word = seed();
        for (int b = 0; b < 64; ++b) diag.push_back(static_cast<int>((word >> b) & 1u));
    }
    Bits out(out_len, 0);
    for (std::size_t i = 0; i < out_len; ++i) {
        int acc = 0;
        for (std::size_t j = 0; j < n; ++j) acc ^= diag[i + n - 1 - j] & key[j];
        out[i] = static_cast<std::uint8_t>(acc);
    }
    return out;
}

Bits random_bits(std::size_t n, Rng& rng) {
    Bits b(n);
    for (auto& x : b) x = static_cast<std::uint8_t>(rng.bit());
    return b;
}

bool rng_flip() {
    static Rng r{77};
    return r.bit() == 1;
}

const ClassicalChannel always = [](double) { return true; };

}  // namespace

TEST(Qkd, EntropyAndKeyLength) {
    EXPECT_DOUBLE_EQ(binary_entropy(0.5), 1.0);
    EXPECT_DOUBLE_EQ(binary_entropy(0.0), 0.0);
    EXPECT_NEAR(binary_entropy(0.11), 0.4999, 1e-4);
    EXPECT_EQ(final_key_length(1000, 0.0), 1000u);
    EXPECT_EQ(final_key_length(1000, 0.05), static_cast<std::size_t>(std::floor(1000 * (1 - 2 * binary_entropy(0.05)))));
    EXPECT_EQ(final_key_length(1000, 0.2), 0u);
    EXPECT_THROW(binary_entropy(1.5), DomainError);
}

TEST(Qkd, SiftKeepsMatchingBases) {
    const Bits ba{0, 1, 1, 0}, bb{0, 0, 1, 1}, xa{1, 0, 1, 0}, xb{1, 1, 0, 0};
    const auto s = qkd_sift(ba, bb, xa, xb);
    EXPECT_EQ(s.matched, 2u);
    EXPECT_EQ(s.a, (Bits{1, 1}));
    EXPECT_EQ(s.b, (Bits{1, 0}));
    EXPECT_THROW(qkd_sift(ba, Bits{0}, xa, xb), DomainError);
}

TEST(Qkd, ToeplitzMatchesNaiveProductAndIsLinear) {
    Rng rng{17};
    for (std::size_t n : {1u, 7u, 64u, 65u, 200u}) {
        for (std::size_t m : {1u, 13u, 64u, 100u}) {
            const Rng seed{rng()};
            const auto k1 = random_bits(n, rng);
            const auto k2 = random_bits(n, rng);
            Bits k12(n);
            for (std::size_t i = 0; i < n; ++i) k12[i] = k1[i] ^ k2[i];
            const auto h1 = toeplitz_hash(k1, m, seed);
            EXPECT_EQ(h1, naive_toeplitz(k1, m, seed)) << n << "x" << m;
            const auto h2 = toeplitz_hash(k2, m, seed);
            const auto h12 = toeplitz_hash(k12, m, seed);
            for (std::size_t i = 0; i < m; ++i) EXPECT_EQ(h12[i], h1[i] ^ h2[i]);
        }
    }
}

TEST(Qkd, PerfectPairsGiveMatchingKey) {
    Rng rng{1};
    const QkdConfig cfg{400, 100, 0.1, 0.11};
    const auto r = qkd_run(cfg, [] { return std::optional<double>(1.0); }, always, rng);
    ASSERT_TRUE(r.ok()) << to_string(r.abort);
    EXPECT_EQ(r.qber, 0.0);
    EXPECT_EQ(r.qber_true, 0.0);
    EXPECT_TRUE(r.keys_match());
    EXPECT_EQ(r.key_length, r.sifted - r.sacrificed);
    EXPECT_NEAR(r.sift_fraction, 0.5, 0.1);
}

TEST(Qkd, AbortReasons) {
    Rng rng{2};
    const QkdConfig cfg{200, 50, 0.2, 0.11};
    const auto noisy = qkd_run(cfg, [] { return std::optional<double>(0.5); }, always, rng);
    EXPECT_EQ(noisy.abort, QkdAbort::QberAboveThreshold);
    EXPECT_TRUE(noisy.key_a.empty());

    int n = 0;
    const auto sparse = qkd_run(cfg, [&n]() -> std::optional<double> { return ++n % 4 ? std::nullopt : std::optional(1.0); },
                                always, rng);
    EXPECT_EQ(sparse.abort, QkdAbort::InsufficientKey);
    EXPECT_EQ(sparse.delivered, 50u);

    const auto dark = qkd_run(cfg, [] { return std::optional<double>(1.0); }, [](double) { return false; }, rng);
    EXPECT_EQ(dark.abort, QkdAbort::NoClassicalCoverage);
}

TEST(Qkd, ConfigValidation) {
    EXPECT_THROW((QkdConfig{10, 11, 0.1, 0.1}.validate()), ConfigError);
    EXPECT_THROW((QkdConfig{10, 5, 0.1, 0.1}.validate()), ConfigError);  // sacrifices under one bit
    EXPECT_NO_THROW((QkdConfig{10, 5, 0.0, 0.1}.validate()));
    EXPECT_THROW((QkdConfig{10, 5, 0.0, 0.6}.validate()), ConfigError);
}

TEST(Sensing, InvertFringeRoundTrip) {
    for (double phi : {0.2, 1.0, 1.5, 3.0}) {
        const double p0 = 0.5 * (1 + 0.8 * std::cos(phi));
        EXPECT_NEAR(invert_fringe(p0, 0.8, 1), phi, 1e-12);
    }
    EXPECT_NEAR(invert_fringe(0.5 * (1 + std::cos(3 * 0.4)), 1.0, 3), 0.4, 1e-12);
    EXPECT_THROW(invert_fringe(0.5, 0.0, 1), DomainError);
}

TEST(Sensing, SeparableEstimateIsUnbiasedWithinItsError) {
    Rng rng{3};
    SensingConfig cfg;
    cfg.n_sensors = 4;
    cfg.true_phase = 1.2;
    cfg.shots = 20'000;
    cfg.t2 = 1.0;
    cfg.interrogation_time = 0.1;
    const auto r = sensing_run(cfg, rng);
    EXPECT_NEAR(r.contrast, std::exp(-0.1), 1e-12);
    EXPECT_GT(r.std_error, 0.0);
    EXPECT_NEAR(r.estimate, 1.2, 5 * r.std_error);
    EXPECT_EQ(r.shots_used, 20'000);
    EXPECT_DOUBLE_EQ(r.elapsed, 20'000 * 0.1);
}

TEST(Sensing, LostReportsAreDiscarded) {
    Rng rng{4};
    SensingConfig cfg;
    cfg.n_sensors = 3;
    cfg.shots = 100;
    const auto r = sensing_run(cfg, rng, [](int sensor) { return sensor != 2; });
    EXPECT_EQ(r.shots_discarded, 100);
    EXPECT_EQ(r.shots_used, 100);
    cfg.probe = Probe::Ghz;
    // a GHZ shot needs every report, so losing one sensor leaves nothing to estimate from
    EXPECT_THROW(sensing_run(cfg, rng, [](int sensor) { return sensor != 2; }), DomainError);
    const auto g = sensing_run(cfg, rng, [](int sensor) { return sensor != 2 || rng_flip(); });
    EXPECT_GT(g.shots_discarded, 0);
    EXPECT_EQ(g.shots_used + g.shots_discarded, 100);
}

TEST(Sensing, GhzErrorShrinksFasterThanSeparable) {
    constexpr int reps = 60;
    auto spread = [](Probe probe, int n) {
        Rng rng{static_cast<std::uint64_t>(n) * 31 + (probe == Probe::Ghz)};
        SensingConfig cfg;
        cfg.n_sensors = n;
        cfg.probe = probe;
        cfg.shots = 2000;
        cfg.true_phase = cfg.operating_point();
        double ss = 0.0;
        for (int i = 0; i < reps; ++i) {
            const double e = sensing_run(cfg, rng).estimate - cfg.true_phase;
            ss += e * e;
        }
        return std::sqrt(ss / reps);
    };
    // ideal scaling: separable 1/sqrt(N), GHZ 1/N; at N = 8 the gap is about sqrt(8)
    const double ratio = spread(Probe::Separable, 8) / spread(Probe::Ghz, 8);
    EXPECT_GT(ratio, 2.0);
    EXPECT_LT(ratio, 4.0);
}

TEST(Ubqc, DeltaIsGridArithmetic) {
    EXPECT_EQ(ubqc_delta(0, 0, 0), 0);
    EXPECT_EQ(ubqc_delta(1, 3, 0), 6);
    EXPECT_EQ(ubqc_delta(1, 3, 1), 2);
    EXPECT_EQ(grid_mod(-9), 7);
    EXPECT_DOUBLE_EQ(grid_angle(2), std::numbers::pi / 2);
}

TEST(Ubqc, ConfigValidation) {
    EXPECT_THROW((UbqcConfig{1, {}, true}.validate()), ConfigError);
    EXPECT_THROW((UbqcConfig{1, {1, 2}, true}.validate()), ConfigError);
    EXPECT_THROW((UbqcConfig{2, {1, 8}, true}.validate()), ConfigError);
}

TEST(Ubqc, SingleQubitPatternMatchesDirectComputation) {
    // one qubit measured at phi: P(0) = (1 + cos phi) / 2
    for (int phi = 0; phi < kAngleGrid; ++phi) {
        const int pat[] = {phi};
        EXPECT_NEAR(ubqc_direct_p0(pat), 0.5 * (1 + std::cos(grid_angle(phi))), 1e-12);
    }
}

TEST(Ubqc, ExactRunDecodesDirectDistribution) {
    const std::vector<int> pattern{1, 2, 3, 0};
    const double p0 = ubqc_direct_p0(pattern);
    Rng client{5}, server{6};
    constexpr int runs = 4000;
    int zeros = 0;
    for (int i = 0; i < runs; ++i) {
        const auto r = ubqc_run({4, pattern, true}, [](std::size_t) { return std::optional<double>(1.0); }, {},
                                client, server);
        ASSERT_TRUE(r.ok());
        zeros += r.output() == 0;
    }
    EXPECT_NEAR(zeros / static_cast<double>(runs), p0, 5 * std::sqrt(p0 * (1 - p0) / runs));
}

TEST(Ubqc, FailuresAreReported) {
    Rng client{7}, server{8};
    const UbqcConfig cfg{3, {1, 1, 1}, true};
    const auto dec = ubqc_run(cfg, [](std::size_t j) { return j == 1 ? std::nullopt : std::optional<double>(1.0); },
                              {}, client, server);
    EXPECT_EQ(dec.failure, UbqcFailure::DecoheredResource);
    EXPECT_TRUE(dec.bits.empty());
    const auto lost = ubqc_run(cfg, [](std::size_t) { return std::optional<double>(1.0); },
                               [](double) { return false; }, client, server);
    EXPECT_EQ(lost.failure, UbqcFailure::ClassicalRound);
}

TEST(Ubqc, BlindnessCheckFlagsSkewedTranscripts) {
    Rng rng{9};
    std::vector<int> uniform, skewed;
    for (int i = 0; i < 20'000; ++i) {
        uniform.push_back(static_cast<int>(rng.below(8)));
        skewed.push_back(rng.bernoulli(0.1) ? 0 : static_cast<int>(rng.below(8)));
    }
    const auto u = ubqc_blindness_check(uniform);
    EXPECT_TRUE(u.reliable);
    EXPECT_GT(u.p_value, 1e-3);
    EXPECT_LT(ubqc_blindness_check(skewed).p_value, 1e-6);
    EXPECT_FALSE(ubqc_blindness_check(std::vector<int>(100, 0)).reliable);
    EXPECT_LT(ubqc_two_sample_check(uniform, skewed).p_value, 1e-6);
}
