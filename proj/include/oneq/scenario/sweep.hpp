#pragma once

// Parameter sweeps: one run per (value, replication) of a scenario with one field
// replaced, plus mean and standard deviation rows per value.

#include <oneq/engine/rng.hpp>
#include <oneq/scenario/config.hpp>
#include <oneq/scenario/runner.hpp>

#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace oneq::scenario {

struct SweepOptions {
    std::string param;  // JSON pointer into the scenario document, e.g. /apps/0/n_pairs
    std::vector<json> values;
    int replications = 1;
    std::optional<double> until;
    std::optional<std::uint64_t> seed;  // base seed; defaults to the scenario's
};

struct SweepRow {
    json value;
    int replication = 0;
    std::uint64_t seed = 0;
    std::map<std::string, double> metrics;
};

struct SweepAggregate {
    json value;
    std::map<std::string, double> mean;
    std::map<std::string, double> stddev;  // sample standard deviation; 0 for one replication
};

struct SweepResult {
    std::string param;
    std::vector<std::string> metric_names;  // union over all rows, sorted
    std::vector<SweepRow> rows;
    std::vector<SweepAggregate> aggregates;

    void write_csv(std::ostream& os) const {
        os << "param,value,replication,seed";
        for (const auto& m : metric_names) os << ',' << m;
        os << '\n';
        auto cell = [](const json& v) {
            if (v.is_number()) return format_number(v.get<double>());
            if (v.is_string()) return v.get<std::string>();
            return v.dump();
        };
        auto emit = [&](const std::map<std::string, double>& vals) {
            for (const auto& m : metric_names) {
                os << ',';
                if (auto it = vals.find(m); it != vals.end()) os << format_number(it->second);
            }
            os << '\n';
        };
        for (const auto& r : rows) {
            os << param << ',' << cell(r.value) << ',' << r.replication << ',' << r.seed;
            emit(r.metrics);
        }
        for (const auto& a : aggregates) {
            os << param << ',' << cell(a.value) << ",mean,";
            emit(a.mean);
            os << param << ',' << cell(a.value) << ",std,";
            emit(a.stddev);
        }
    }

    const SweepAggregate& aggregate_for(const json& v) const {
        for (const auto& a : aggregates) {
            if (a.value == v) return a;
        }
        throw LookupError("sweep: no aggregate for value " + v.dump());
    }
};

/// Replication r of every value uses the seed derive_seed(base, r), so values are compared
/// on common random numbers while replications stay independent.
inline SweepResult run_sweep(const json& doc, const SweepOptions& opt) {
    if (opt.replications < 1) throw ConfigError("sweep: replications must be at least 1");
    if (opt.values.empty()) throw ConfigError("sweep: no values given");
    const Scenario base = build_scenario(doc);
    json::json_pointer ptr;
    try {
        ptr = json::json_pointer(opt.param);
    } catch (const json::exception& e) {
        throw ScenarioError({{opt.param, "malformed parameter path"}});
    }
    if (opt.param.empty() || !base.normalized.contains(ordered_json::json_pointer(opt.param))) {
        throw ScenarioError({{opt.param, "unknown parameter path"}});
    }
    const std::uint64_t base_seed = opt.seed.value_or(base.seed);

    SweepResult res;
    res.param = opt.param;
    std::set<std::string> names;
    for (const auto& v : opt.values) {
        json d = doc;
        d[ptr] = v;
        const Scenario sc = build_scenario(d);
        SweepAggregate agg;
        agg.value = v;
        std::map<std::string, std::vector<double>> samples;
        for (int r = 0; r < opt.replications; ++r) {
            SweepRow row;
            row.value = v;
            row.replication = r;
            row.seed = derive_seed(base_seed, static_cast<std::uint64_t>(r));
            const auto out = run_scenario(sc, {row.seed, opt.until});
            for (const auto& m : out.metrics.rows()) {
                row.metrics[m.metric] = m.value;
                samples[m.metric].push_back(m.value);
                names.insert(m.metric);
            }
            res.rows.push_back(std::move(row));
        }
        for (const auto& [name, xs] : samples) {
            double mean = 0.0;
            for (double x : xs) mean += x;
            mean /= static_cast<double>(xs.size());
            double ss = 0.0;
            for (double x : xs) ss += (x - mean) * (x - mean);
            agg.mean[name] = mean;
            agg.stddev[name] = xs.size() > 1 ? std::sqrt(ss / static_cast<double>(xs.size() - 1)) : 0.0;
        }
        res.aggregates.push_back(std::move(agg));
    }
    res.metric_names.assign(names.begin(), names.end());
    return res;
}

/// Parses a comma-separated value list; numbers stay numbers, true/false become booleans.
inline std::vector<json> parse_value_list(const std::string& text) {
    std::vector<json> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("sweep: empty entry in value list");
        item = item.substr(b, e - b + 1);
        json v = json::parse(item, nullptr, false);
        out.push_back(v.is_discarded() ? json(item) : v);
    }
    return out;
}

}  // namespace oneq::scenario
