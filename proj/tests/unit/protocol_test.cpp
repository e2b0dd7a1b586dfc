#include <oneq/engine/simulator.hpp>
#include <oneq/netmodel/topology.hpp>
#include <oneq/protocol/network.hpp>

#include <gtest/gtest.h>

#include <optional>
#include <string>
#include <vector>

using namespace oneq;
using namespace oneq::net;
using namespace oneq::protocol;

namespace {

NodeSpec qbs(const NodeId& id, Vec3 pos) {
    NodeSpec n;
    n.id = id;
    n.kind = NodeKind::QBS;
    n.position = pos;
    n.t_coh = 100.0;
    n.memory_slots = 16;
    return n;
}

NodeSpec que(const NodeId& id, Vec3 pos, const NodeId& bs, double t_coh = 10.0) {
    NodeSpec n;
    n.id = id;
    n.kind = NodeKind::QUE;
    n.position = pos;
    n.serving_bs = bs;
    n.quantum_bs = bs;
    n.t_coh = t_coh;
    n.memory_slots = 2;
    return n;
}

// QBS1 -- QBS2 repeater pair; QUE1 and QUE2 in QBS1's cell, QUE3 in QBS2's cell.
Topology two_cells(double q = 1.0) {
    Topology t;
    t.add_node(qbs("QBS1", {0, 0, 0}));
    t.add_node(qbs("QBS2", {2000, 0, 0}));
    t.add_node(que("QUE1", {100, 0, 0}, "QBS1"));
    t.add_node(que("QUE2", {-100, 0, 0}, "QBS1"));
    t.add_node(que("QUE3", {2100, 0, 0}, "QBS2"));
    t.add_cell({"QBS1", 1000.0, 500.0});
    t.add_cell({"QBS2", 1000.0, 500.0});
    t.add_repeater_edge("QBS1", "QBS2");
    t.set_default_access_link({1e6, 1e-4, 0.0});
    t.set_default_backhaul_link({1e9, 1e-3, 0.0});
    t.set_default_quantum_link({q, 1e-3, 0.98, false});
    t.set_default_bs_quantum_link({q, 1e-3, 0.98, false});
    return t;
}

struct Fixture {
    Topology topo;
    Simulator sim;
    Network net;

    explicit Fixture(Topology t, std::uint64_t seed = 1, ProtocolConfig cfg = {})
        : topo(std::move(t)), sim(seed), net(sim, topo, cfg) {}

    void connect(const std::vector<NodeId>& ues) {
        for (const auto& u : ues) net.register_ue(u);
        sim.run_until(sim.now() + 0.1);
        for (const auto& u : ues) ASSERT_EQ(net.state(u), QueState::Connected) << u;
    }

    std::optional<SessionResult> session(EntanglementRequest req, Network::PairSink sink = {}) {
        std::optional<SessionResult> out;
        net.start_session(std::move(req), std::move(sink), [&out](const SessionResult& r) { out = r; });
        sim.run_until(sim.now() + 2.0);
        return out;
    }

    std::size_t count_kind(const std::string& kind) const {
        std::size_t n = 0;
        for (const auto& r : sim.trace().records()) n += r.kind == kind;
        return n;
    }
};

}  // namespace

TEST(StateMachine, AllowedTransitions) {
    using S = QueState;
    EXPECT_TRUE(transition_allowed(S::Idle, S::Connected));
    EXPECT_FALSE(transition_allowed(S::Idle, S::Entangled));
    EXPECT_FALSE(transition_allowed(S::Idle, S::Inactive));
    EXPECT_TRUE(transition_allowed(S::Connected, S::Entangled));
    EXPECT_TRUE(transition_allowed(S::Connected, S::Inactive));
    EXPECT_TRUE(transition_allowed(S::Connected, S::Idle));
    EXPECT_TRUE(transition_allowed(S::Entangled, S::Connected));
    EXPECT_FALSE(transition_allowed(S::Entangled, S::Idle));
    EXPECT_FALSE(transition_allowed(S::Inactive, S::Entangled));
    EXPECT_TRUE(transition_allowed(S::Inactive, S::Connected));
}

TEST(Registration, ConnectsThenTimesOutToInactive) {
    Fixture f(two_cells());
    std::optional<RegistrationOutcome> got;
    f.net.register_ue("QUE1", [&](RegistrationOutcome o) { got = o; });
    f.sim.run_until(0.1);
    ASSERT_EQ(got, RegistrationOutcome::Connected);
    EXPECT_EQ(f.net.state("QUE1"), QueState::Connected);
    EXPECT_THROW(f.net.register_ue("QUE1"), PreconditionError);
    f.sim.run_until(10.0);
    EXPECT_EQ(f.net.state("QUE1"), QueState::Inactive);
    bool resumed = false;
    f.net.ensure_connected("QUE1", [&](bool ok) { resumed = ok; });
    f.sim.run_until(10.1);
    EXPECT_TRUE(resumed);
    EXPECT_EQ(f.net.state("QUE1"), QueState::Connected);
    f.net.release("QUE1");
    EXPECT_EQ(f.net.state("QUE1"), QueState::Idle);
}

TEST(Registration, OutOfCoverageIsRejected) {
    auto t = two_cells();
    t.add_node(que("QUE9", {5000, 0, 0}, "QBS1"));
    Fixture f(std::move(t));
    std::optional<RegistrationOutcome> got;
    f.net.register_ue("QUE9", [&](RegistrationOutcome o) { got = o; });
    f.sim.run_until(0.1);
    EXPECT_EQ(got, RegistrationOutcome::Rejected);
    EXPECT_EQ(f.net.state("QUE9"), QueState::Idle);
}

TEST(Registration, InactivityTimerToleratesRoundingOfActivityTime) {
    // (a + 5) - a rounds to 4.999999999999999 for this a; the timer must still expire
    Fixture f(two_cells());
    f.connect({"QUE1"});
    const double a = 4.079178;
    f.sim.schedule(a, EventKind::AppStep, "QUE1", [&] { f.net.send("QUE1", "QUE1", 8, "ping", [](bool) {}); });
    const auto stats = f.sim.run_until(20.0);
    EXPECT_EQ(f.net.state("QUE1"), QueState::Inactive);
    EXPECT_LT(stats.executed, 100u);
}

TEST(Session, StoredPairMakesHoldersEntangledUntilConsumed) {
    Fixture f(two_cells());
    f.connect({"QUE1", "QUE2"});
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndStore, 1, 0.5, 0.9});
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->outcome, SessionOutcome::Fulfilled);
    ASSERT_EQ(r->delivered.size(), 1u);
    const ResourceId id = r->delivered.front();
    EXPECT_EQ(f.net.state("QUE1"), QueState::Entangled);
    EXPECT_EQ(f.net.state("QUE2"), QueState::Entangled);
    // same-cell pair: both photons come from one source, so w0 multiplies
    const auto& e = f.net.ledger().at(id);
    EXPECT_NEAR(e.pair.w(), 0.98 * 0.98, 1e-12);
    EXPECT_DOUBLE_EQ(e.t_coh, 10.0);
    // consumed two seconds after delivery, so the pair has decayed with the QUE memory
    const double expect = f.net.fidelity_now(id);
    EXPECT_NEAR(expect, qcore::fidelity_of(e.pair.w_at(f.sim.now(), 10.0)), 1e-12);
    EXPECT_LT(expect, 0.9);
    EXPECT_DOUBLE_EQ(f.net.consume(id, "test"), expect);
    EXPECT_EQ(f.net.ledger().at(id).fate, Fate::Consumed);
    EXPECT_THROW(f.net.consume(id, "again"), ResourceError);
    EXPECT_EQ(f.net.state("QUE1"), QueState::Connected);
}

TEST(Session, RejectsRequestFromUnconnectedUser) {
    Fixture f(two_cells());
    f.connect({"QUE2"});
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndStore, 1, 0.5, 0.9});
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->outcome, SessionOutcome::Rejected);
    EXPECT_EQ(r->reason, "not-connected:QUE1");
}

TEST(Session, MemoryCapacityIsEnforced) {
    Fixture f(two_cells());
    f.connect({"QUE1", "QUE2"});
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndStore, 3, 0.5, 0.9});
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->outcome, SessionOutcome::Rejected);
    EXPECT_EQ(r->reason, "memory-full:QUE1");
}

TEST(Session, ConsumingRequiresEntangledOwners) {
    Fixture f(two_cells());
    f.connect({"QUE1", "QUE2"});
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndStore, 1, 0.5, 0.9});
    ASSERT_TRUE(r && !r->delivered.empty());
    const ResourceId id = r->delivered.front();
    // forge a pair the network never handed out: its owners are not Entangled on its behalf
    f.net.consume(id, "use");
    ASSERT_EQ(f.net.state("QUE1"), QueState::Connected);
    auto& ledger = f.net.ledger();
    qcore::WernerPair stray(f.net.ids().next(), "QUE1", "QUE2", 1.0, f.sim.now());
    const ResourceId sid = stray.id();
    ledger.add(std::move(stray), 10.0, {});
    EXPECT_THROW(f.net.consume(sid, "use"), PreconditionError);
}

TEST(Session, CrossCellPairIsSwappedAtBothStations) {
    Fixture f(two_cells());
    f.connect({"QUE1", "QUE3"});
    const auto r = f.session({"QUE1", "QUE3", SliceType::GenerateAndStore, 1, 1.0, 0.8});
    ASSERT_TRUE(r.has_value());
    ASSERT_EQ(r->outcome, SessionOutcome::Fulfilled);
    EXPECT_EQ(f.count_kind("swap"), 2u);
    const auto& e = f.net.ledger().at(r->delivered.front());
    EXPECT_TRUE(e.pair.held_by("QUE1") && e.pair.held_by("QUE3"));
    EXPECT_FALSE(e.pair.correction_pending());
    EXPECT_DOUBLE_EQ(e.t_coh, 10.0);
    EXPECT_EQ(e.qubits.size(), 2u);
    EXPECT_EQ(f.net.ledger().count(Fate::Consumed), 4u);  // three segments, one intermediate
}

TEST(Session, MeasureSliceHandsPairsToSink) {
    Fixture f(two_cells());
    f.connect({"QUE1", "QUE2"});
    int seen = 0;
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndMeasure, 4, 1.0, 0.8},
                             [&](ResourceId id) {
                                 const auto bits = f.net.measure(id, "QUE1", qcore::MeasurementBasis::z(),
                                                                 qcore::MeasurementBasis::z(), "test");
                                 (void)bits;
                                 ++seen;
                             });
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->outcome, SessionOutcome::Fulfilled);
    EXPECT_EQ(seen, 4);
    EXPECT_EQ(f.sim.metrics().value_or("qubits_used.QUE1", 0.0), 4.0);
    EXPECT_EQ(f.sim.metrics().value_or("decoherence_failures.QUE1", -1.0), 0.0);
    EXPECT_EQ(f.sim.metrics().series("pair_delivery_latency").size(), 4u);
}

TEST(Session, ImpossibleLinkExpiresAtDeadline) {
    Fixture f(two_cells(0.0));
    f.connect({"QUE1", "QUE2"});
    const double t0 = f.sim.now();
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndStore, 1, 0.3, 0.8});
    ASSERT_TRUE(r.has_value());
    EXPECT_EQ(r->outcome, SessionOutcome::Expired);
    EXPECT_TRUE(r->delivered.empty());
    EXPECT_NEAR(r->elapsed, 0.3, 1e-9);
    (void)t0;
}

TEST(Resources, DecoherenceBudgetFollowsEachQubit) {
    Fixture f(two_cells());
    f.connect({"QUE1", "QUE2"});
    const auto r = f.session({"QUE1", "QUE2", SliceType::GenerateAndStore, 1, 0.5, 0.5});
    ASSERT_TRUE(r && !r->delivered.empty());
    const ResourceId id = r->delivered.front();
    const auto& clock = f.net.ledger().at(id).qubits.at("QUE1");
    EXPECT_NEAR(clock.budget, qcore::survival_time(0.98 * 0.98, 10.0, 0.8), 1e-12);
    EXPECT_FALSE(f.net.qubit_decohered(id, "QUE1", clock.arrival + clock.budget));
    EXPECT_TRUE(f.net.qubit_decohered(id, "QUE1", clock.arrival + clock.budget + 1e-6));
    EXPECT_EQ(f.sim.metrics().value_or("qubits_used.QUE1", 0.0), 2.0);
    EXPECT_EQ(f.sim.metrics().value_or("decoherence_failures.QUE1", 0.0), 1.0);
    EXPECT_THROW(f.net.qubit_decohered(id, "QUE3", 0.0), ResourceError);
}

TEST(Resources, LedgerSettlesOnce) {
    ResourceLedger ledger;
    IdAllocator ids;
    qcore::WernerPair p(ids.next(), "A", "B", 1.0, 0.0);
    const ResourceId id = p.id();
    ledger.add(std::move(p), 1.0, {});
    EXPECT_EQ(ledger.live_held_by("A").size(), 1u);
    ledger.settle(id, Fate::Discarded, 1.0, "x");
    EXPECT_THROW(ledger.settle(id, Fate::Consumed, 2.0, "y"), ResourceError);
    EXPECT_THROW(ledger.at(ResourceId{999}), LookupError);
    EXPECT_TRUE(ledger.live_held_by("A").empty());
    EXPECT_EQ(ledger.count(Fate::Discarded), 1u);
}

TEST(Handover, SoftHandoverSwapsThePairOntoTheNewStation) {
    Fixture f(two_cells());
    f.connect({"QUE1"});
    const auto r = f.session({"QUE1", "QBS1", SliceType::GenerateAndStore, 1, 0.5, 0.8});
    ASSERT_TRUE(r && r->outcome == SessionOutcome::Fulfilled);
    std::optional<HandoverRecord> rec;
    f.net.handover("QUE1", "QBS2", HandoverMode::Soft, [&](const HandoverRecord& h) { rec = h; });
    f.sim.run_until(f.sim.now() + 1.0);
    ASSERT_TRUE(rec.has_value());
    EXPECT_TRUE(rec->ok);
    EXPECT_EQ(rec->performed, HandoverMode::Soft);
    EXPECT_DOUBLE_EQ(rec->downtime, 0.0);
    ASSERT_TRUE(rec->pair.has_value());
    const auto& e = f.net.ledger().at(*rec->pair);
    EXPECT_TRUE(e.pair.held_by("QUE1") && e.pair.held_by("QBS2"));
    EXPECT_EQ(f.net.quantum_serving("QUE1"), "QBS2");
}

TEST(Handover, SoftFallsBackToHardWithoutRepeaterEdge) {
    auto t = two_cells();
    t.add_node(qbs("QBS3", {0, 100, 0}));
    t.add_cell({"QBS3", 1000.0, 500.0});
    Fixture f(std::move(t));
    f.connect({"QUE1"});
    const auto r = f.session({"QUE1", "QBS1", SliceType::GenerateAndStore, 1, 0.5, 0.8});
    ASSERT_TRUE(r && r->outcome == SessionOutcome::Fulfilled);
    std::optional<HandoverRecord> rec;
    f.net.handover("QUE1", "QBS3", HandoverMode::Soft, [&](const HandoverRecord& h) { rec = h; });
    f.sim.run_until(f.sim.now() + 2.0);
    ASSERT_TRUE(rec.has_value());
    EXPECT_EQ(rec->performed, HandoverMode::Hard);
    EXPECT_TRUE(rec->ok);
    EXPECT_GT(rec->downtime, 0.0);
    EXPECT_EQ(f.net.ledger().at(r->delivered.front()).fate, Fate::Discarded);
    EXPECT_EQ(f.count_kind("warning"), 1u);
}

TEST(Proactive, BufferServesAcquireWithoutWaiting) {
    Fixture f(two_cells());
    f.net.enable_proactive({"QUE1", "QBS1", 2, 0.85, 0.5, 1.0});
    f.sim.run_until(3.0);
    EXPECT_EQ(f.net.usable_pairs("QUE1", "QBS1", 0.85).size(), 2u);
    std::optional<AcquireResult> got;
    f.sim.schedule(3.5, EventKind::AppStep, "QUE1", [&] {
        f.net.acquire("QUE1", "QBS1", 1, 1.0, 0.85, [&](const AcquireResult& a) { got = a; });
    });
    f.sim.run_until(3.6);
    ASSERT_TRUE(got.has_value());
    EXPECT_TRUE(got->ok);
    EXPECT_EQ(got->from_buffer, 1);
    EXPECT_DOUBLE_EQ(got->latency, 0.0);
}
