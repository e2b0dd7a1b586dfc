#include <oneq/engine/rng.hpp>
#include <oneq/engine/simulator.hpp>
#include <oneq/engine/timing.hpp>
#include <oneq/engine/trace.hpp>

#include <gtest/gtest.h>
#include <json.hpp>

#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace oneq;

TEST(Rng, SameKeySameSequence) {
    Rng a{derive_key(7, "QBS1", "qlink")}, b{derive_key(7, "QBS1", "qlink")};
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, KeysSeparateNodePurposeAndSeed) {
    std::set<std::uint64_t> keys{derive_key(7, "QBS1", "qlink"), derive_key(7, "QBS2", "qlink"),
                                 derive_key(7, "QBS1", "measure"), derive_key(8, "QBS1", "qlink")};
    EXPECT_EQ(keys.size(), 4u);
    std::set<std::uint64_t> seeds;
    for (std::uint64_t r = 0; r < 1000; ++r) seeds.insert(derive_seed(42, r));
    EXPECT_EQ(seeds.size(), 1000u);
    EXPECT_EQ(derive_seed(42, 3), derive_seed(42, 3));
}

TEST(Rng, UniformMomentsAndRange) {
    Rng rng{1};
    constexpr int n = 200'000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
        sq += u * u;
    }
    EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12.0 / n));
    EXPECT_NEAR(sq / n - (sum / n) * (sum / n), 1.0 / 12.0, 2e-3);
}

TEST(Rng, BelowIsUniformOverSmallRange) {
    Rng rng{2};
    std::vector<int> counts(7, 0);
    constexpr int n = 70'000;
    for (int i = 0; i < n; ++i) {
        const auto k = rng.below(7);
        ASSERT_LT(k, 7u);
        ++counts[k];
    }
    for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
    EXPECT_EQ(rng.below(0), 0u);
}

TEST(Rng, GeometricMeanIsInverseProbability) {
    Rng rng{3};
    double sum = 0.0;
    constexpr int n = 100'000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(rng.geometric(0.25));
    EXPECT_NEAR(sum / n, 4.0, 0.05);
    EXPECT_EQ(rng.geometric(1.0), 1u);
}

TEST(Simulator, RunsEventsInTimeThenInsertionOrder) {
    Simulator sim(1);
    std::vector<std::string> order;
    sim.schedule(2.0, EventKind::Timer, "n", [&] { order.push_back("late"); });
    sim.schedule(1.0, EventKind::Timer, "n", [&] { order.push_back("first"); });
    sim.schedule(1.0, EventKind::Timer, "n", [&] { order.push_back("second"); });
    sim.schedule(1.0, EventKind::Timer, "n", [&] {
        order.push_back("third");
        sim.after(0.0, EventKind::Timer, "n", [&] { order.push_back("chained"); });
    });
    const auto stats = sim.run_until(5.0);
    EXPECT_EQ(order, (std::vector<std::string>{"first", "second", "third", "chained", "late"}));
    EXPECT_EQ(stats.executed, 5u);
    EXPECT_DOUBLE_EQ(sim.now(), 5.0);
}

TEST(Simulator, StopsAtHorizonAndKeepsLaterEvents) {
    Simulator sim(1);
    int ran = 0;
    sim.schedule(1.0, EventKind::Timer, "n", [&] { ++ran; });
    sim.schedule(3.0, EventKind::Timer, "n", [&] { ++ran; });
    sim.run_until(2.0);
    EXPECT_EQ(ran, 1);
    EXPECT_EQ(sim.pending(), 1u);
    EXPECT_THROW(sim.schedule(1.5, EventKind::Timer, "n", [] {}), SimulationError);
    EXPECT_THROW(sim.run_until(1.0), SimulationError);
    EXPECT_THROW(sim.after(-1.0, EventKind::Timer, "n", [] {}), SimulationError);
}

TEST(Simulator, StreamsPersistAndFreshCopiesRestart) {
    Simulator sim(99);
    auto& s = sim.stream("QUE1", "basis");
    const auto first = s();
    EXPECT_NE(sim.stream("QUE1", "basis")(), first);  // same stream, advanced
    auto fresh = sim.rng_stream("QUE1", "basis");
    EXPECT_EQ(fresh(), first);
}

TEST(Trace, JsonlRecordsHaveFixedFieldOrder) {
    Simulator sim(1);
    sim.schedule(0.25, EventKind::Timer, "QUE1", [&] { sim.record("QUE1", "state", {{"from", "Idle"}, {"to", "Connected"}}); });
    sim.run_until(1.0);
    const std::string line = sim.trace().to_jsonl();
    EXPECT_EQ(line, "{\"t\":0.25,\"node\":\"QUE1\",\"kind\":\"state\",\"details\":{\"from\":\"Idle\",\"to\":\"Connected\"}}\n");
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j.at("details").at("to"), "Connected");
}

TEST(Metrics, CsvHasFixedColumnsAndSeriesSummaries) {
    Metrics m;
    m.add("pairs", 2);
    m.add("pairs", 3);
    m.set("rate", 0.5, "1/s");
    for (double v : {1.0, 2.0, 3.0, 4.0}) m.observe("latency", v, "s");
    std::ostringstream os;
    m.write_csv(os, "run", 5);
    const std::string csv = os.str();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "run_id,seed,metric,value,unit");
    EXPECT_NE(csv.find("run,5,pairs,5,count\n"), std::string::npos);
    EXPECT_NE(csv.find("run,5,rate,0.5,1/s\n"), std::string::npos);
    EXPECT_NE(csv.find("run,5,latency.mean,2.5,s\n"), std::string::npos);
    EXPECT_NE(csv.find("run,5,latency.count,4,count\n"), std::string::npos);
    EXPECT_NE(csv.find("run,5,latency.max,4,s\n"), std::string::npos);
}

TEST(Timing, JointProbabilityByHand) {
    const std::vector<double> lat{0.1, 0.2, 0.3, 0.4};
    const SurvivalFn surv = [](double t) { return 1.0 - t; };
    const auto ev = eval_timing(lat, surv, TimingBudget{0.25});
    EXPECT_NEAR(ev.p_latency, 0.5, 1e-12);
    EXPECT_NEAR(ev.p_coherent, 0.75, 1e-12);
    EXPECT_NEAR(ev.joint, (0.9 + 0.8) / 4.0, 1e-12);
    EXPECT_FALSE(ev.meets_target);
    EXPECT_EQ(ev.curve.size(), 64u);
    EXPECT_DOUBLE_EQ(ev.curve.front().p_latency_within, 0.0);
    EXPECT_DOUBLE_EQ(ev.curve.back().p_latency_within, 1.0);
}

TEST(Timing, EmpiricalSurvivalIsRightContinuous) {
    const auto s = empirical_survival({1.0, 2.0, 3.0});
    EXPECT_DOUBLE_EQ(s(0.0), 1.0);
    EXPECT_DOUBLE_EQ(s(2.0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(s(2.5), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(s(4.0), 0.0);
    EXPECT_THROW(eval_timing({}, s, TimingBudget{1.0}), DomainError);
}
