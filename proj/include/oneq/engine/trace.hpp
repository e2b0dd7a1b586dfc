#pragma once

#include <oneq/ids.hpp>

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace oneq {

/// Stable text form used in every output file.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

using Details = std::vector<std::pair<std::string, std::string>>;

struct TraceRecord {
    double t;
    NodeId node;
    std::string kind;
    Details details;

    std::optional<std::string> detail(std::string_view key) const {
        for (const auto& [k, v] : details) {
            if (k == key) return v;
        }
        return std::nullopt;
    }
};

class Trace {
public:
    void append(TraceRecord r) { records_.push_back(std::move(r)); }
    const std::vector<TraceRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    /// One JSON object per line with fields in the order t, node, kind, details.
    void write_jsonl(std::ostream& out) const {
        for (const auto& r : records_) {
            nlohmann::ordered_json d = nlohmann::ordered_json::object();
            for (const auto& [k, v] : r.details) d[k] = v;
            out << "{\"t\":" << format_number(r.t) << ",\"node\":" << nlohmann::json(r.node).dump()
                << ",\"kind\":" << nlohmann::json(r.kind).dump() << ",\"details\":" << d.dump() << "}\n";
        }
    }

    std::string to_jsonl() const {
        std::ostringstream os;
        write_jsonl(os);
        return os.str();
    }

private:
    std::vector<TraceRecord> records_;
};

/// Named scalars and sample series. Iteration order is lexicographic by name.
class Metrics {
public:
    void set(const std::string& name, double value, const std::string& unit) {
        scalars_[name] = {value, unit};
    }

    void add(const std::string& name, double delta, const std::string& unit = "count") {
        auto [it, inserted] = scalars_.try_emplace(name, Scalar{0.0, unit});
        it->second.value += delta;
    }

    void observe(const std::string& name, double value, const std::string& unit) {
        auto [it, inserted] = series_.try_emplace(name, Series{{}, unit});
        it->second.samples.push_back(value);
    }

    std::optional<double> get(const std::string& name) const {
        auto it = scalars_.find(name);
        if (it == scalars_.end()) return std::nullopt;
        return it->second.value;
    }

    double value_or(const std::string& name, double fallback) const { return get(name).value_or(fallback); }

    const std::vector<double>& series(const std::string& name) const {
        static const std::vector<double> none;
        auto it = series_.find(name);
        return it == series_.end() ? none : it->second.samples;
    }

    bool empty() const { return scalars_.empty() && series_.empty(); }

    struct Row {
        std::string metric;
        double value;
        std::string unit;
    };

    /// Scalars followed by histogram summaries (count, mean, p50, p95, max) of each series.
    std::vector<Row> rows() const {
        std::vector<Row> out;
        for (const auto& [name, s] : scalars_) out.push_back({name, s.value, s.unit});
        for (const auto& [name, s] : series_) {
            if (s.samples.empty()) continue;
            auto sorted = s.samples;
            std::sort(sorted.begin(), sorted.end());
            double sum = 0.0;
            for (double v : sorted) sum += v;
            auto quantile = [&](double q) {
                const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(sorted.size()))) ;
                return sorted[std::min(sorted.size() - 1, idx == 0 ? 0 : idx - 1)];
            };
            out.push_back({name + ".count", static_cast<double>(sorted.size()), "count"});
            out.push_back({name + ".mean", sum / static_cast<double>(sorted.size()), s.unit});
            out.push_back({name + ".p50", quantile(0.5), s.unit});
            out.push_back({name + ".p95", quantile(0.95), s.unit});
            out.push_back({name + ".max", sorted.back(), s.unit});
        }
        return out;
    }

    static constexpr std::string_view kCsvHeader = "run_id,seed,metric,value,unit";

    void write_csv(std::ostream& out, std::string_view run_id, std::uint64_t seed,
                   bool header = true) const {
        if (header) out << kCsvHeader << '\n';
        for (const auto& r : rows()) {
            out << run_id << ',' << seed << ',' << r.metric << ',' << format_number(r.value) << ','
                << r.unit << '\n';
        }
    }

private:
    struct Scalar {
        double value;
        std::string unit;
    };
    struct Series {
        std::vector<double> samples;
        std::string unit;
    };
    std::map<std::string, Scalar> scalars_;
    std::map<std::string, Series> series_;
};

}  // namespace oneq
