#include <oneq/scenario/audit.hpp>
#include <oneq/scenario/config.hpp>
#include <oneq/scenario/runner.hpp>
#include <oneq/scenario/sweep.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace oneq;
using namespace oneq::scenario;

namespace fs = std::filesystem;

namespace {

json load_doc(const std::string& dir, const std::string& stem) {
    const std::string path = dir + "/" + stem + ".json";
    return parse_scenario_text(read_file(path), path);
}

json shipped(const std::string& stem) { return load_doc(ONEQ_SCENARIO_DIR, stem); }

std::set<std::string> pointers(const std::vector<Violation>& v) {
    std::set<std::string> out;
    for (const auto& x : v) out.insert(x.path);
    return out;
}

}  // namespace

TEST(ScenarioLoad, ShippedScenariosAreClean) {
    for (const auto& entry : fs::directory_iterator(ONEQ_SCENARIO_DIR)) {
        if (entry.path().extension() != ".json") continue;
        const auto res = load_scenario_file(entry.path().string());
        EXPECT_TRUE(res.ok()) << entry.path() << ": "
                              << (res.violations.empty() ? "" : to_string(res.violations.front()));
    }
}

struct InvalidCase {
    const char* stem;
    std::set<std::string> expected;
};

class InvalidScenario : public ::testing::TestWithParam<InvalidCase> {};

TEST_P(InvalidScenario, ReportsEveryOffendingPointer) {
    const auto& c = GetParam();
    const auto res = load_scenario(load_doc(ONEQ_INVALID_DIR, c.stem));
    EXPECT_FALSE(res.ok());
    EXPECT_EQ(pointers(res.violations), c.expected);
    EXPECT_THROW(build_scenario(load_doc(ONEQ_INVALID_DIR, c.stem)), ScenarioError);
}

INSTANTIATE_TEST_SUITE_P(
    Fixtures, InvalidScenario,
    ::testing::Values(InvalidCase{"cue_with_quantum_memory", {"/nodes/2/device_class"}},
                      InvalidCase{"duplicate_node_id", {"/nodes/2/id"}},
                      InvalidCase{"ghz_probe_in_scenario", {"/apps/0/probe"}},
                      InvalidCase{"missing_version_negative_duration", {"/schema_version", "/duration_s"}},
                      InvalidCase{"quantum_radius_exceeds_classical", {"/cells/0/quantum_radius_m"}},
                      InvalidCase{"satellite_without_orbit", {"/nodes/2/mobility"}},
                      InvalidCase{"unknown_app_node", {"/apps/0/sender"}},
                      InvalidCase{"unknown_node_kind", {"/nodes/2/kind"}},
                      InvalidCase{"unknown_top_level_field", {"/colour"}},
                      InvalidCase{"wrong_schema_version", {"/schema_version"}}),
    [](const auto& info) { return std::string(info.param.stem); });

TEST(ScenarioLoad, SyntaxErrorCarriesLineAndColumn) {
    try {
        load_doc(ONEQ_INVALID_DIR, "garbled_syntax");
        FAIL() << "expected a parse error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 5u);
        EXPECT_EQ(e.column(), 34u);
    }
}

TEST(ScenarioLoad, NormalizedDocumentRoundTrips) {
    const auto sc = build_scenario(shipped("mixed_deployment"));
    const json again = json::parse(sc.normalized.dump());
    const auto sc2 = build_scenario(again);
    EXPECT_EQ(sc2.normalized, sc.normalized);
    EXPECT_EQ(sc2.topology.node_ids(), sc.topology.node_ids());
    EXPECT_EQ(sc2.apps.size(), sc.apps.size());
}

TEST(ScenarioRun, ZeroHorizonRunsNothing) {
    const auto sc = build_scenario(shipped("qkd_basic"));
    const auto out = run_scenario(sc, {std::nullopt, 0.0});
    EXPECT_TRUE(out.trace.empty());
    EXPECT_EQ(out.events, 0u);
    EXPECT_EQ(out.metrics_csv(), "run_id,seed,metric,value,unit\n");
    EXPECT_TRUE(out.audit.clean());
}

TEST(ScenarioRun, SameSeedSameOutputs) {
    const auto sc = build_scenario(shipped("mixed_deployment"));
    const auto a = run_scenario(sc, {123, std::nullopt});
    const auto b = run_scenario(sc, {123, std::nullopt});
    const auto c = run_scenario(sc, {124, std::nullopt});
    EXPECT_EQ(a.trace.to_jsonl(), b.trace.to_jsonl());
    EXPECT_EQ(a.metrics_csv(), b.metrics_csv());
    EXPECT_NE(a.trace.to_jsonl(), c.trace.to_jsonl());
    EXPECT_TRUE(a.audit.clean());
}

TEST(ScenarioRun, QkdScenarioDeliversMatchingKeys) {
    const auto sc = build_scenario(shipped("qkd_basic"));
    const auto out = run_scenario(sc);
    ASSERT_EQ(out.apps.size(), 1u);
    EXPECT_EQ(out.apps[0].successes, out.apps[0].planned);
    EXPECT_FALSE(out.hard_failure());
    EXPECT_GT(out.metrics.value_or("secret_key_rate", 0.0), 0.0);
    EXPECT_TRUE(out.audit.clean());
    EXPECT_GT(out.audit.consumptions, 0u);
}

TEST(ScenarioRun, WriteOutputsProducesFiles) {
    const auto sc = build_scenario(shipped("qkd_basic"));
    const auto out = run_scenario(sc);
    const fs::path dir = fs::temp_directory_path() / "oneq_unit_outputs";
    fs::remove_all(dir);
    write_outputs(out, dir);
    for (const char* f : {"metrics.csv", "trace.jsonl", "summary.json"}) EXPECT_TRUE(fs::exists(dir / f)) << f;
    std::ifstream in(dir / "summary.json");
    const auto summary = json::parse(in);
    EXPECT_EQ(summary.at("seed").get<std::uint64_t>(), sc.seed);
    EXPECT_TRUE(summary.at("audit").at("clean").get<bool>());
    std::ifstream csv(dir / "metrics.csv");
    std::string header;
    std::getline(csv, header);
    EXPECT_EQ(header, "run_id,seed,metric,value,unit");
    fs::remove_all(dir);
}

TEST(Sweep, SingleReplicationAggregateEqualsRow) {
    SweepOptions opt;
    opt.param = "/apps/0/n_pairs";
    opt.values = parse_value_list("48, 64");
    opt.replications = 1;
    opt.until = 5.0;
    const auto res = run_sweep(shipped("qkd_retry"), opt);
    ASSERT_EQ(res.rows.size(), 2u);
    for (const auto& row : res.rows) {
        const auto& agg = res.aggregate_for(row.value);
        for (const auto& [name, v] : row.metrics) {
            EXPECT_DOUBLE_EQ(agg.mean.at(name), v) << name;
            EXPECT_DOUBLE_EQ(agg.stddev.at(name), 0.0) << name;
        }
    }
    EXPECT_EQ(res.rows[0].seed, res.rows[1].seed);  // common random numbers across values
    std::ostringstream os;
    res.write_csv(os);
    EXPECT_EQ(os.str().rfind("param,value,replication,seed", 0), 0u);
}

TEST(Sweep, UnknownPathIsRejected) {
    SweepOptions opt;
    opt.param = "/apps/0/no_such_field";
    opt.values = parse_value_list("1,2");
    EXPECT_THROW(run_sweep(shipped("qkd_retry"), opt), ScenarioError);
    opt.param = "/apps/0/n_pairs";
    opt.values = {json(-5)};
    EXPECT_THROW(run_sweep(shipped("qkd_retry"), opt), ScenarioError);
}

TEST(Sweep, ValueListParsing) {
    const auto v = parse_value_list("1, 2.5,true,abc");
    ASSERT_EQ(v.size(), 4u);
    EXPECT_TRUE(v[0].is_number_integer());
    EXPECT_DOUBLE_EQ(v[1].get<double>(), 2.5);
    EXPECT_TRUE(v[2].is_boolean());
    EXPECT_EQ(v[3], "abc");
    EXPECT_THROW(parse_value_list("1,,2"), ConfigError);
}

TEST(Audit, FlagsInjectedViolations) {
    const auto sc = build_scenario(shipped("qkd_basic"));
    const auto clean = run_scenario(sc);
    ASSERT_TRUE(clean.audit.clean());

    Trace bad = clean.trace;
    bad.append({1.0, "QUE1", "consume", {{"resource", "r999"}, {"holders", "QUE1,QUE2"}, {"states", "Idle,Entangled"}}});
    bad.append({1.0, "QUE1", "discard", {{"resource", "r999"}}});
    bad.append({1.0, "QUE1", "service-complete", {{"app", "x"}, {"users", "GHOST"}}});
    const auto rep = audit_trace(bad, sc.topology);
    EXPECT_FALSE(rep.clean());
    EXPECT_EQ(rep.bad_owner_state.size(), 1u);
    EXPECT_EQ(rep.double_use, (std::vector<std::string>{"r999"}));
    EXPECT_EQ(rep.uncovered_service.size(), 1u);
}
