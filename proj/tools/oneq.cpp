// oneq: validate, run and sweep scenarios, and print analytic planning tables.

#include <oneq/analytic/blocks.hpp>
#include <oneq/scenario/config.hpp>
#include <oneq/scenario/runner.hpp>
#include <oneq/scenario/sweep.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

enum class Level { Error = 0, Info = 1, Debug = 2 };

Level log_level() {
    const char* env = std::getenv("ONEQ_LOG");
    if (!env) return Level::Info;
    const std::string v = env;
    if (v == "error") return Level::Error;
    if (v == "debug") return Level::Debug;
    if (v != "info") std::cerr << "oneq: unknown ONEQ_LOG value '" << v << "', using info\n";
    return Level::Info;
}

void log(Level lvl, const std::string& msg) {
    static const Level current = log_level();
    if (lvl > current) return;
    static const char* names[] = {"error", "info", "debug"};
    std::cerr << "[" << names[static_cast<int>(lvl)] << "] " << msg << '\n';
}

using namespace oneq;
using namespace oneq::scenario;

struct Common {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::optional<double> until;
    std::string out;
    bool strict = false;
    int replications = 1;
};

int cmd_validate(const Common& c) {
    json doc;
    try {
        doc = parse_scenario_text(read_file(c.scenario), c.scenario);
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    }
    const auto res = load_scenario(doc);
    if (res.ok()) {
        std::cout << c.scenario << ": ok (" << res.scenario->topology.node_ids().size() << " nodes, "
                  << res.scenario->apps.size() << " apps)\n";
        return 0;
    }
    std::cout << c.scenario << ": " << res.violations.size() << " violation(s)\n";
    for (const auto& v : res.violations) std::cout << "  " << to_string(v) << '\n';
    return 1;
}

int cmd_run(const Common& c) {
    const Scenario sc = build_scenario(parse_scenario_text(read_file(c.scenario), c.scenario));
    log(Level::Info, "running " + sc.name);
    const auto out = run_scenario(sc, {c.seed, c.until});
    const std::filesystem::path dir = c.out.empty() ? std::filesystem::path("out") / sc.name : std::filesystem::path(c.out);
    write_outputs(out, dir);
    log(Level::Debug, std::to_string(out.events) + " events, " + std::to_string(out.trace.size()) + " trace records");
    std::cout << "run " << out.run_id << " seed=" << out.seed << " until=" << format_number(out.until)
              << " -> " << dir.string() << '\n';
    for (const auto& a : out.apps) {
        std::cout << "  " << a.type << " " << a.id << ": " << a.successes << "/" << a.planned << " ok";
        if (a.failures) std::cout << ", " << a.failures << " failed";
        if (a.incomplete()) std::cout << ", " << a.incomplete() << " incomplete";
        std::cout << ", " << a.value_name << "=" << format_number(a.value) << '\n';
    }
    if (!out.audit.clean()) {
        log(Level::Error, "audit found violations; see summary.json");
        if (c.strict) return 3;
    }
    if (c.strict && out.hard_failure()) {
        log(Level::Error, "an application failed (--strict)");
        return 1;
    }
    return 0;
}

int cmd_sweep(const Common& c, const std::string& param, const std::string& values) {
    const json doc = parse_scenario_text(read_file(c.scenario), c.scenario);
    SweepOptions opt;
    opt.param = param;
    opt.values = parse_value_list(values);
    opt.replications = c.replications;
    opt.until = c.until;
    opt.seed = c.seed;
    log(Level::Info, "sweeping " + param + " over " + std::to_string(opt.values.size()) + " values x " +
                         std::to_string(opt.replications) + " replications");
    const auto res = run_sweep(doc, opt);
    if (c.out.empty()) {
        res.write_csv(std::cout);
    } else {
        std::filesystem::create_directories(c.out);
        std::ofstream f(std::filesystem::path(c.out) / "sweep.csv", std::ios::binary);
        res.write_csv(f);
        std::cout << "wrote " << (std::filesystem::path(c.out) / "sweep.csv").string() << '\n';
    }
    return 0;
}

struct Table {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void print(std::ostream& os) const {
        os << name << '\n';
        for (const auto& h : header) os << std::setw(14) << h;
        os << '\n';
        for (const auto& r : rows) {
            for (double v : r) os << std::setw(14) << format_number(v);
            os << '\n';
        }
        os << '\n';
    }

    void write_csv(const std::filesystem::path& p) const {
        std::ofstream f(p, std::ios::binary);
        for (std::size_t i = 0; i < header.size(); ++i) f << (i ? "," : "") << header[i];
        f << '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) f << (i ? "," : "") << format_number(r[i]);
            f << '\n';
        }
    }
};

int cmd_plan(const Common& c) {
    std::vector<Table> tables;

    Table blocks{"block success (retry reading vs all-blocks reading)",
                 {"p_err_q", "p_err_c", "K", "p_block", "p_succ_iid", "p_all_blocks"}, {}};
    for (double q : {0.0, 0.1, 0.2, 0.3}) {
        for (double cl : {0.0, 0.1}) {
            for (int k = 1; k <= 5; ++k) {
                const double p = analytic::p_block(q, cl);
                std::vector<double> ps(static_cast<std::size_t>(k), p);
                blocks.rows.push_back({q, cl, static_cast<double>(k), p, analytic::p_succ_iid(q, cl, k),
                                       analytic::p_all_blocks(ps)});
            }
        }
    }
    tables.push_back(blocks);

    // K-of-N table: from the scenario's QKD apps if one is given, otherwise a generic grid
    std::vector<std::pair<int, int>> nk;
    double p_err_c = 0.01;
    int retry_cap = 10;
    if (!c.scenario.empty()) {
        const Scenario sc = build_scenario(parse_scenario_text(read_file(c.scenario), c.scenario));
        for (const auto& a : sc.apps) {
            if (const auto* q = std::get_if<QkdApp>(&a)) nk.emplace_back(q->qkd.n_pairs, q->qkd.k_target);
        }
        const auto ids = sc.topology.node_ids();
        for (const auto& id : ids) {
            const auto& n = sc.topology.node(id);
            if (net::is_user(n.kind)) {
                p_err_c = sc.topology.classical_link(id, n.serving_bs).p_err_c;
                break;
            }
        }
        retry_cap = sc.protocol.retry_cap;
    }
    if (nk.empty()) {
        for (int n : {24, 32, 40, 48, 64, 96, 128}) nk.emplace_back(n, 20);
    }
    Table kofn{"K-of-N matched pairs", {"N", "K", "p_deliver", "p_success"}, {}};
    for (auto [n, k] : nk) {
        for (double pd : {1.0, 0.9, 0.75, 0.5}) {
            kofn.rows.push_back({static_cast<double>(n), static_cast<double>(k), pd,
                                 analytic::qkd_match_success(n, k, pd)});
        }
    }
    tables.push_back(kofn);

    Table retry{"classical exchange success with retransmission", {"p_err_c", "retry_cap", "messages", "p_success"}, {}};
    for (double pe : {p_err_c, 0.05, 0.1, 0.2}) {
        for (int cap : {0, 1, 3, retry_cap}) {
            for (int m : {2, 4}) retry.rows.push_back({pe, static_cast<double>(cap), static_cast<double>(m),
                                                       analytic::retry_exchange_success(pe, cap, m)});
        }
    }
    tables.push_back(retry);

    for (const auto& t : tables) t.print(std::cout);
    if (!c.out.empty()) {
        std::filesystem::create_directories(c.out);
        const char* files[] = {"plan_blocks.csv", "plan_k_of_n.csv", "plan_retry.csv"};
        for (std::size_t i = 0; i < tables.size(); ++i) tables[i].write_csv(std::filesystem::path(c.out) / files[i]);
        std::cout << "wrote plan tables to " << c.out << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"oneq: integrated classical-quantum cellular network simulator"};
    app.require_subcommand(1);

    Common c;
    std::uint64_t seed = 0;
    double until = 0.0;
    std::string param, values;

    auto add_scenario = [&](CLI::App* sub, bool required) {
        auto* o = sub->add_option("--scenario", c.scenario, "Scenario file (JSON)");
        if (required) o->required()->check(CLI::ExistingFile);
    };
    auto add_seed_until = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Override the scenario seed");
        sub->add_option("--until", until, "Stop the simulation at this time (seconds)")->check(CLI::NonNegativeNumber);
    };

    auto* validate = app.add_subcommand("validate", "Check a scenario file and list violations");
    add_scenario(validate, true);

    auto* run = app.add_subcommand("run", "Run one replication and write metrics, trace and summary");
    add_scenario(run, true);
    add_seed_until(run);
    run->add_option("--out", c.out, "Output directory (default out/<scenario name>)");
    run->add_flag("--strict", c.strict, "Exit nonzero if any application fails");

    auto* sweep = app.add_subcommand("sweep", "Run a scenario over a grid of values for one field");
    add_scenario(sweep, true);
    add_seed_until(sweep);
    sweep->add_option("--param", param, "JSON pointer of the swept field, e.g. /apps/0/n_pairs")->required();
    sweep->add_option("--values", values, "Comma-separated values")->required();
    sweep->add_option("--replications", c.replications, "Replications per value")->check(CLI::PositiveNumber);
    sweep->add_option("--out", c.out, "Output directory for sweep.csv (default: stdout)");

    auto* plan = app.add_subcommand("plan", "Print analytic planning tables");
    add_scenario(plan, false);
    plan->add_option("--out", c.out, "Directory for CSV copies of the tables");

    CLI11_PARSE(app, argc, argv);

    for (auto* sub : {run, sweep}) {
        if (sub->parsed()) {
            if (sub->count("--seed")) c.seed = seed;
            if (sub->count("--until")) c.until = until;
        }
    }

    try {
        if (validate->parsed()) return cmd_validate(c);
        if (run->parsed()) return cmd_run(c);
        if (sweep->parsed()) return cmd_sweep(c, param, values);
        if (plan->parsed()) return cmd_plan(c);
    } catch (const ScenarioError& e) {
        std::cerr << "scenario error: " << e.what() << '\n';
        for (const auto& v : e.violations()) std::cerr << "  " << to_string(v) << '\n';
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
