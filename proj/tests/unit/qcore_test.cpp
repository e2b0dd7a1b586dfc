#include <oneq/engine/rng.hpp>
#include <oneq/ids.hpp>
#include <oneq/protocol/operations.hpp>
#include <oneq/qcore/ghz.hpp>
#include <oneq/qcore/statevector.hpp>
#include <oneq/qcore/werner.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>

using namespace oneq;
using namespace oneq::qcore;

TEST(Werner, FidelityRoundTrip) {
    for (double w : {0.0, 0.3, 0.72, 1.0}) EXPECT_NEAR(werner_from_fidelity(fidelity_of(w)), w, 1e-15);
    EXPECT_DOUBLE_EQ(fidelity_of(1.0), 1.0);
    EXPECT_DOUBLE_EQ(fidelity_of(0.0), 0.25);
    EXPECT_THROW(fidelity_of(1.5), DomainError);
    EXPECT_THROW(werner_from_fidelity(0.1), DomainError);
}

TEST(Werner, DecayAndSurvivalBudget) {
    EXPECT_NEAR(decay(0.9, 2.0, 4.0), 0.9 * std::exp(-0.5), 1e-15);
    const double t = survival_time(0.97, 2.0, 0.8);
    EXPECT_NEAR(t, 2.0 * std::log(0.97 / werner_from_fidelity(0.8)), 1e-12);
    EXPECT_NEAR(fidelity_of(decay(0.97, t, 2.0)), 0.8, 1e-12);
    EXPECT_EQ(survival_time(0.5, 2.0, 0.8), 0.0);
    EXPECT_TRUE(std::isinf(survival_time(0.5, 2.0, 0.25)));
    EXPECT_THROW(decay(0.9, -1.0, 1.0), DomainError);
    EXPECT_THROW(decay(0.9, 1.0, 0.0), ConfigError);
}

TEST(Werner, PairDecaysLazilyAndIsSingleUse) {
    WernerPair p(ResourceId{1}, "A", "B", 0.9, 1.0);
    EXPECT_NEAR(p.w_at(3.0, 2.0), 0.9 * std::exp(-1.0), 1e-15);
    EXPECT_DOUBLE_EQ(p.w(), 0.9);
    p.touch(3.0, 2.0);
    EXPECT_NEAR(p.w(), 0.9 * std::exp(-1.0), 1e-15);
    EXPECT_THROW(p.touch(2.0, 2.0), DomainError);
    EXPECT_EQ(p.partner_of("A"), "B");
    EXPECT_THROW(p.partner_of("C"), ResourceError);
    p.consume();
    EXPECT_THROW(p.consume(), ResourceError);
}

TEST(Werner, MovedFromPairReadsConsumed) {
    WernerPair p(ResourceId{1}, "A", "B", 1.0, 0.0);
    WernerPair q(std::move(p));
    EXPECT_TRUE(p.consumed());
    EXPECT_FALSE(q.consumed());
}

TEST(Werner, MeasurementRefusesPendingCorrectionAndNonPauliBases) {
    Rng rng{1};
    WernerPair p(ResourceId{1}, "A", "B", 1.0, 0.0);
    p.mark_correction_pending();
    EXPECT_THROW(measure_pair(p, MeasurementBasis::z(), MeasurementBasis::z(), rng), ResourceError);
    p.apply_correction();
    EXPECT_THROW(measure_pair(p, MeasurementBasis::equatorial(0.3), MeasurementBasis::z(), rng), DomainError);
}

TEST(Werner, MixedBasesAreUncorrelated) {
    Rng rng{5};
    int agree = 0;
    constexpr int n = 50'000;
    for (int i = 0; i < n; ++i) {
        WernerPair p(ResourceId{1}, "A", "B", 1.0, 0.0);
        const auto [a, b] = measure_pair(p, MeasurementBasis::z(), MeasurementBasis::x(), rng);
        agree += a == b;
    }
    EXPECT_NEAR(agree / static_cast<double>(n), 0.5, 5 * std::sqrt(0.25 / n));
}

TEST(Statevector, HadamardAndCnotBuildPhiPlus) {
    PureState s(2);
    apply(s, Gate::h(), {0});
    apply(s, Gate::cnot(), {0, 1});
    EXPECT_NEAR(overlap_fidelity(s, phi_plus()), 1.0, 1e-12);
    apply(s, Gate::cnot(), {0, 1});
    apply(s, Gate::h(), {0});
    EXPECT_NEAR(std::norm(s[0]), 1.0, 1e-12);
}

TEST(Statevector, BornProbabilitiesInEquatorialBasis) {
    const double r = std::numbers::sqrt2 / 2.0;
    const auto plus_i = PureState::qubit(r, std::complex<double>(0.0, r));
    EXPECT_NEAR(probability_of(plus_i, 0, MeasurementBasis::equatorial(std::numbers::pi / 2), 0), 1.0, 1e-12);
    EXPECT_NEAR(probability_of(plus_i, 0, MeasurementBasis::x(), 0), 0.5, 1e-12);
    EXPECT_NEAR(probability_of(plus_i, 0, MeasurementBasis::z(), 1), 0.5, 1e-12);
}

TEST(Statevector, MeasuringBellHalfCollapsesPartner) {
    Rng rng{9};
    for (int i = 0; i < 20; ++i) {
        auto res = oracle_measure(phi_plus(), 0, MeasurementBasis::z(), rng);
        ASSERT_EQ(res.post.n_qubits(), 1u);
        EXPECT_NEAR(std::norm(res.post[static_cast<std::size_t>(res.bit)]), 1.0, 1e-12);
    }
}

TEST(Statevector, RejectsBadInput) {
    EXPECT_THROW(PureState::from_amplitudes({1.0, 1.0}), DomainError);
    PureState s(1);
    EXPECT_THROW(apply(s, Gate::cnot(), {0, 1}), DomainError);
    EXPECT_THROW(bell_state(4), DomainError);
}

TEST(Teleport, BasisStatesArriveIntact) {
    Rng rng{11};
    const net::ClassicalLinkSpec link{1e6, 0.0, 0.0};
    const double r = std::numbers::sqrt2 / 2.0;
    const PureState inputs[] = {PureState::qubit(1.0, 0.0), PureState::qubit(0.0, 1.0), PureState::qubit(r, r),
                                PureState::qubit(r, std::complex<double>(0.0, -r))};
    for (const auto& in : inputs) {
        for (int rep = 0; rep < 8; ++rep) {
            PureState payload = in;
            WernerPair pair(ResourceId{1}, "A", "B", 1.0, 0.0);
            const auto rec = protocol::teleport(payload, pair, "A", link, 0, rng, 0.0, 1.0);
            ASSERT_TRUE(rec.output.has_value());
            EXPECT_NEAR(overlap_fidelity(in, *rec.output), 1.0, 1e-12);
            EXPECT_TRUE(payload.destroyed());
        }
    }
}

TEST(Teleport, LostCorrectionLosesThePayload) {
    Rng rng{12};
    const net::ClassicalLinkSpec lossy{1e6, 0.0, 0.999};
    protocol::QubitPayload payload{"q"};
    WernerPair pair(ResourceId{1}, "A", "B", 1.0, 0.0);
    const auto rec = protocol::teleport(payload, pair, "A", lossy, 0, rng, 0.0, 1.0);
    EXPECT_FALSE(rec.delivered);
    EXPECT_EQ(payload.state, protocol::PayloadState::Lost);
    EXPECT_TRUE(pair.consumed());
}

TEST(Swap, StatevectorSwapOfPhiPlusPairsYieldsPhiPlus) {
    // |Phi+>_{01} |Phi+>_{23}; Bell measurement on (1, 2) with Pauli corrections on 3
    Rng rng{21};
    for (int rep = 0; rep < 16; ++rep) {
        PureState s = phi_plus().tensor(phi_plus());
        apply(s, Gate::cnot(), {1, 2});
        apply(s, Gate::h(), {1});
        auto m1 = oracle_measure(s, 1, MeasurementBasis::z(), rng);       // qubits now 0, 2, 3
        auto m2 = oracle_measure(m1.post, 1, MeasurementBasis::z(), rng);  // qubits now 0, 3
        PureState out = m2.post;
        if (m2.bit) apply(out, Gate::x(), {1});
        if (m1.bit) apply(out, Gate::z(), {1});
        EXPECT_NEAR(overlap_fidelity(out, phi_plus()), 1.0, 1e-12);
    }
}

TEST(Swap, LibrarySwapMultipliesDecayedParameters) {
    IdAllocator ids;
    Rng rng{3};
    WernerPair ab(ids.next(), "A", "B", 0.9, 0.0);
    WernerPair bc(ids.next(), "B", "C", 0.8, 0.5);
    auto out = protocol::entanglement_swap(ab, bc, "B", ids, rng, 1.0, 10.0, 5.0);
    EXPECT_NEAR(out.pair.w(), 0.9 * std::exp(-0.1) * 0.8 * std::exp(-0.1), 1e-12);
    EXPECT_TRUE(out.pair.correction_pending());
    EXPECT_TRUE(out.pair.held_by("A") && out.pair.held_by("C"));
    EXPECT_TRUE(ab.consumed() && bc.consumed());
    WernerPair x(ids.next(), "A", "B", 0.9, 0.0), y(ids.next(), "C", "D", 0.9, 0.0);
    EXPECT_THROW(protocol::entanglement_swap(x, y, "B", ids, rng, 1.0, 1.0, 1.0), ResourceError);
}

TEST(Ghz, ReductionKeepsParameterAndNeedsCorrection) {
    IdAllocator ids;
    Rng rng{4};
    GhzResource g(ids.next(), {"A", "B", "C", "D"}, 0.8, 0.0);
    auto r1 = ghz_x_reduce(g, "D", ids, rng, 0.1);
    EXPECT_TRUE(g.consumed());
    auto& g3 = std::get<GhzResource>(r1.remaining);
    EXPECT_EQ(g3.holders().size(), 3u);
    EXPECT_TRUE(g3.correction_pending());
    auto r2 = ghz_x_reduce(g3, "A", ids, rng, 0.2);
    auto& pair = std::get<WernerPair>(r2.remaining);
    EXPECT_DOUBLE_EQ(pair.w(), 0.8);
    EXPECT_TRUE(pair.held_by("B") && pair.held_by("C"));
    EXPECT_THROW(GhzResource(ids.next(), {"A", "B"}, 1.0, 0.0), DomainError);
    EXPECT_THROW(GhzResource(ids.next(), {"A", "B", "A"}, 1.0, 0.0), DomainError);
}
