#include <oneq/engine/rng.hpp>
#include <oneq/netmodel/links.hpp>
#include <oneq/netmodel/mobility.hpp>
#include <oneq/netmodel/topology.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace oneq;
using namespace oneq::net;

namespace {

NodeSpec station(const NodeId& id, NodeKind kind, Vec3 pos) {
    NodeSpec n;
    n.id = id;
    n.kind = kind;
    n.position = pos;
    n.t_coh = kind == NodeKind::CBS ? 0.0 : 100.0;
    n.memory_slots = kind == NodeKind::CBS ? 0 : 8;
    return n;
}

NodeSpec user(const NodeId& id, NodeKind kind, Vec3 pos, const NodeId& bs, double t_coh = 1.0) {
    NodeSpec n;
    n.id = id;
    n.kind = kind;
    n.position = pos;
    n.serving_bs = bs;
    if (kind == NodeKind::QUE) {
        n.quantum_bs = bs;
        n.t_coh = t_coh;
        n.memory_slots = 2;
    }
    return n;
}

Topology line_of_stations() {
    Topology t;
    t.add_node(station("A", NodeKind::QBS, {0, 0, 0}));
    t.add_node(station("B", NodeKind::QBS, {1000, 0, 0}));
    t.add_node(station("C", NodeKind::QBS, {2000, 0, 0}));
    t.add_node(station("D", NodeKind::QBS, {3000, 0, 0}));
    t.add_repeater_edge("A", "B");
    t.add_repeater_edge("B", "C");
    t.add_repeater_edge("C", "D");
    t.add_repeater_edge("A", "C");
    return t;
}

}  // namespace

TEST(Mobility, WaypointsInterpolateAndHoldEnds) {
    const auto m = MobilityModel::waypoints({{0.0, {0, 0, 0}}, {10.0, {100, 0, 0}}, {20.0, {100, 50, 0}}});
    EXPECT_EQ(m.position(-1.0, {}), (Vec3{0, 0, 0}));
    EXPECT_EQ(m.position(5.0, {}), (Vec3{50, 0, 0}));
    EXPECT_EQ(m.position(15.0, {}), (Vec3{100, 25, 0}));
    EXPECT_EQ(m.position(99.0, {}), (Vec3{100, 50, 0}));
    EXPECT_TRUE(m.active(1e9));
    EXPECT_THROW(MobilityModel::waypoints({{1.0, {}}, {1.0, {}}}), ConfigError);
    EXPECT_THROW(MobilityModel::waypoints({}), ConfigError);
}

TEST(Mobility, OrbitWindowsRepeat) {
    const OrbitPass o{10.0, 5.0, 100.0};
    EXPECT_FALSE(orbit_in_pass(o, 9.9));
    EXPECT_TRUE(orbit_in_pass(o, 10.0));
    EXPECT_TRUE(orbit_in_pass(o, 14.9));
    EXPECT_FALSE(orbit_in_pass(o, 15.0));
    EXPECT_TRUE(orbit_in_pass(o, 112.0));
    const auto w = orbit_next_window(o, 15.0);
    EXPECT_DOUBLE_EQ(w.start, 110.0);
    EXPECT_DOUBLE_EQ(w.end, 115.0);
    const auto cur = orbit_next_window(o, 12.0);
    EXPECT_DOUBLE_EQ(cur.start, 10.0);
    EXPECT_THROW(MobilityModel::orbit({0.0, 100.0, 100.0}), ConfigError);
    EXPECT_FALSE(MobilityModel::orbit(o).active(50.0));
}

TEST(Topology, CoverageFollowsRadiiAndDeviceKind) {
    Topology t;
    t.add_node(station("QBS1", NodeKind::QBS, {0, 0, 0}));
    t.add_node(user("QUE1", NodeKind::QUE, {150, 0, 0}, "QBS1"));
    t.add_node(user("CUE1", NodeKind::CUE, {50, 0, 0}, "QBS1"));
    auto walker = user("QUE2", NodeKind::QUE, {}, "QBS1");
    walker.mobility = MobilityModel::waypoints({{0.0, {50, 0, 0}}, {10.0, {450, 0, 0}}});
    t.add_node(walker);
    t.add_cell({"QBS1", 400.0, 200.0});
    EXPECT_TRUE(t.in_quantum_coverage("QUE1", "QBS1", 0.0));
    EXPECT_TRUE(t.in_classical_coverage("CUE1", "QBS1", 0.0));
    EXPECT_FALSE(t.in_quantum_coverage("CUE1", "QBS1", 0.0));
    EXPECT_TRUE(t.in_quantum_coverage("QUE2", "QBS1", 3.0));   // 170 m
    EXPECT_FALSE(t.in_quantum_coverage("QUE2", "QBS1", 5.0));  // 250 m
    EXPECT_TRUE(t.in_classical_coverage("QUE2", "QBS1", 5.0));
    EXPECT_FALSE(t.in_classical_coverage("QUE2", "QBS1", 9.0));
    EXPECT_TRUE(t.segment_available("QUE1", "QUE2", "QBS1", 0.0, true));
    EXPECT_FALSE(t.segment_available("QUE1", "QUE2", "QBS1", 6.0, true));
}

TEST(Topology, RejectsInconsistentDevices) {
    Topology t;
    auto cue = user("CUE1", NodeKind::CUE, {}, "X");
    cue.memory_slots = 1;
    EXPECT_THROW(t.add_node(cue), ConfigError);
    t.add_node(station("CBS1", NodeKind::CBS, {}));
    EXPECT_THROW(t.add_node(station("CBS1", NodeKind::CBS, {})), ConfigError);
    EXPECT_THROW(t.add_cell({"CBS1", 100.0, 50.0}), ConfigError);
    EXPECT_THROW(t.add_repeater_edge("CBS1", "CBS1"), ConfigError);
    EXPECT_THROW(t.node("nope"), LookupError);
}

TEST(Topology, LineOfSightBlockage) {
    Topology t;
    t.add_node(station("QBS1", NodeKind::QBS, {}));
    auto q = user("QUE1", NodeKind::QUE, {10, 0, 0}, "QBS1");
    q.los_blocked = {{2.0, 3.0}};
    t.add_node(q);
    t.add_node(user("QUE2", NodeKind::QUE, {20, 0, 0}, "QBS1"));
    t.add_cell({"QBS1", 100.0, 100.0});
    EXPECT_FALSE(t.has_los("QUE1", 2.5));
    EXPECT_TRUE(t.has_los("QUE1", 3.0));
    EXPECT_FALSE(t.segment_available("QUE1", "QUE2", "QBS1", 2.5, true));
    EXPECT_TRUE(t.segment_available("QUE1", "QUE2", "QBS1", 2.5, false));
}

TEST(Topology, RepeaterPathIsShortest) {
    const auto t = line_of_stations();
    EXPECT_EQ(t.repeater_path("A", "D"), (std::vector<NodeId>{"A", "C", "D"}));
    EXPECT_EQ(t.repeater_path("B", "D"), (std::vector<NodeId>{"B", "C", "D"}));
    EXPECT_EQ(t.repeater_path("A", "A"), (std::vector<NodeId>{"A"}));
    EXPECT_TRUE(t.repeater_adjacent("C", "A"));
    EXPECT_FALSE(t.repeater_adjacent("A", "D"));
}

TEST(Topology, DefaultLinksAndPairCoherence) {
    Topology t;
    t.add_node(station("QBS1", NodeKind::QBS, {}));
    t.add_node(station("QBS2", NodeKind::QBS, {}));
    t.add_node(user("QUE1", NodeKind::QUE, {}, "QBS1", 0.5));
    EXPECT_THROW(t.classical_link("QUE1", "QBS1"), LookupError);
    EXPECT_FALSE(t.has_quantum_link("QUE1", "QBS1"));
    t.set_default_access_link({2e6, 0.001, 0.0});
    t.set_default_backhaul_link({1e9, 0.002, 0.0});
    t.set_default_quantum_link({0.5, 1e-3, 0.95, true});
    t.set_default_bs_quantum_link({0.1, 1e-3, 0.9, false});
    EXPECT_DOUBLE_EQ(t.classical_link("QUE1", "QBS1").rate, 2e6);
    EXPECT_DOUBLE_EQ(t.classical_link("QBS2", "QBS1").prop_delay, 0.002);
    EXPECT_DOUBLE_EQ(t.quantum_link("QBS1", "QUE1").w0, 0.95);
    EXPECT_DOUBLE_EQ(t.quantum_link("QBS1", "QBS2").q_attempt, 0.1);
    t.set_quantum_link("QUE1", "QBS1", {1.0, 1e-3, 0.99, false});
    EXPECT_DOUBLE_EQ(t.quantum_link("QBS1", "QUE1").w0, 0.99);
    EXPECT_DOUBLE_EQ(t.pair_t_coh("QUE1", "QBS1"), 0.5);
}

TEST(Links, CombinedLinkMultipliesProbabilitiesAndParameters) {
    const auto c = combine_links({0.5, 1e-3, 0.9, false}, {0.4, 2e-3, 0.8, true});
    EXPECT_DOUBLE_EQ(c.q_attempt, 0.2);
    EXPECT_DOUBLE_EQ(c.attempt_period, 2e-3);
    EXPECT_DOUBLE_EQ(c.w0, 0.9 * 0.8);
    EXPECT_TRUE(c.requires_los);
}

TEST(Links, ClassicalLatencyIsSizeOverRatePlusPropagation) {
    Rng rng{1};
    const ClassicalLinkSpec link{1e6, 0.004, 0.0};
    const auto r = classical_send(link, 2000.0, rng);
    EXPECT_TRUE(r.delivered);
    EXPECT_DOUBLE_EQ(r.latency, 0.006);
    EXPECT_THROW(classical_send(link, 0.0, rng), DomainError);
    const auto retried = send_with_retries({1e6, 0.0, 0.5}, 1000.0, 50, rng);
    EXPECT_TRUE(retried.delivered);
    EXPECT_NEAR(retried.latency, retried.attempts * 1e-3, 1e-12);
}

TEST(Links, AttemptPairRespectsCoverage) {
    Topology t;
    t.add_node(station("QBS1", NodeKind::QBS, {}));
    t.add_node(user("QUE1", NodeKind::QUE, {10, 0, 0}, "QBS1"));
    t.add_node(user("QUE2", NodeKind::QUE, {500, 0, 0}, "QBS1"));
    t.add_cell({"QBS1", 1000.0, 100.0});
    IdAllocator ids;
    Rng rng{2};
    const QuantumLinkSpec sure{1.0, 1e-3, 0.93, false};
    auto p = attempt_pair(t, sure, "QUE1", "QBS1", "QBS1", ids, rng, 1.0);
    ASSERT_TRUE(p.has_value());
    EXPECT_DOUBLE_EQ(p->w(), 0.93);
    EXPECT_THROW(attempt_pair(t, sure, "QUE1", "QUE2", "QBS1", ids, rng, 1.0), PreconditionError);
    EXPECT_FALSE(attempt_pair(t, {0.0, 1e-3, 1.0, false}, "QUE1", "QBS1", "QBS1", ids, rng, 1.0).has_value());
}
