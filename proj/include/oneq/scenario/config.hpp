#pragma once

// Scenario files: JSON documents describing the deployment, links, protocol settings and
// the applications to run. Loading checks every field and reports violations by JSON
// pointer; nothing is built unless the whole document is clean.

#include <oneq/apps/qkd.hpp>
#include <oneq/apps/sensing.hpp>
#include <oneq/apps/ubqc.hpp>
#include <oneq/errors.hpp>
#include <oneq/netmodel/topology.hpp>
#include <oneq/protocol/network.hpp>

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace oneq::scenario {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct Violation {
    std::string path;  // JSON pointer to the offending field
    std::string message;
};

inline std::string to_string(const Violation& v) { return (v.path.empty() ? "/" : v.path) + ": " + v.message; }

/// Syntax error in a scenario file.
class ParseError : public ConfigError {
public:
    ParseError(const std::string& origin, std::size_t line, std::size_t column, const std::string& what)
        : ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + what),
          line_(line), column_(column) {}
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Raised when a document with violations is used to build a scenario.
class ScenarioError : public ConfigError {
public:
    explicit ScenarioError(std::vector<Violation> v)
        : ConfigError(summary(v)), violations_(std::move(v)) {}
    const std::vector<Violation>& violations() const { return violations_; }

private:
    static std::string summary(const std::vector<Violation>& v) {
        std::string s = std::to_string(v.size()) + " scenario violation(s)";
        if (!v.empty()) s += "; first: " + to_string(v.front());
        return s;
    }
    std::vector<Violation> violations_;
};

// ---- application instances -------------------------------------------------------------

struct AppCommon {
    std::string id;
    double start = 0.0;
};

struct QkdApp {
    AppCommon common;
    NodeId a;
    NodeId b;
    apps::QkdConfig qkd;
    double max_latency = 1.0;
    double min_fidelity = 0.5;
    bool retry_on_abort = false;
    int max_rounds = 1;  // attempts per key when retrying on abort
    int keys = 1;        // keys established back to back
};

struct UbqcApp {
    AppCommon common;
    NodeId client;
    NodeId server;
    apps::UbqcConfig ubqc;
    double max_latency = 1.0;
    double min_fidelity = 0.5;
    int runs = 1;
};

struct SensingApp {
    AppCommon common;
    std::vector<NodeId> sensors;
    NodeId aggregator;
    apps::SensingConfig sensing;
};

struct TeleportApp {
    AppCommon common;
    NodeId sender;
    NodeId receiver;
    int count = 1;
    double hold = 0.0;  // storage time between delivery of the pair and teleportation
    double max_latency = 1.0;
    double min_fidelity = 0.5;
};

struct HandoverApp {
    AppCommon common;  // start: when the QUE connects and stores its pair
    NodeId que;
    NodeId to;
    protocol::HandoverMode mode = protocol::HandoverMode::Soft;
    double at = 0.0;
    double max_latency = 1.0;
};

struct AcquireApp {
    AppCommon common;  // start: when the pairs are needed
    NodeId que;
    NodeId peer;
    int count = 1;
    double max_latency = 1.0;
    double min_fidelity = 0.5;
};

using AppSpec = std::variant<QkdApp, UbqcApp, SensingApp, TeleportApp, HandoverApp, AcquireApp>;

inline const AppCommon& common(const AppSpec& app) {
    return std::visit([](const auto& a) -> const AppCommon& { return a.common; }, app);
}

inline const char* app_type(const AppSpec& app) {
    static constexpr const char* names[] = {"qkd", "ubqc", "sensing", "teleport", "handover", "acquire"};
    return names[app.index()];
}

struct PolicySpec {
    bool proactive = false;
    std::vector<protocol::BufferSpec> buffers;
};

struct TimingSpec {
    double t_d = 1.0;
    double reliability_target = 0.99;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    double duration = 0.0;
    net::Topology topology;
    protocol::ProtocolConfig protocol;
    PolicySpec policy;
    TimingSpec timing;
    std::vector<AppSpec> apps;
    ordered_json normalized;  // the document with every default written out
};

struct LoadResult {
    std::optional<Scenario> scenario;
    std::vector<Violation> violations;

    bool ok() const { return violations.empty() && scenario.has_value(); }
};

namespace detail {

inline std::string type_name(const json& v) { return v.type_name(); }

class Reader {
public:
    std::vector<Violation> violations;
    ordered_json normalized = ordered_json::object();

    void fail(const std::string& path, std::string message) { violations.push_back({path, std::move(message)}); }

    bool is_object(const json& v, const std::string& path) {
        if (v.is_object()) return true;
        fail(path, "expected an object, found " + type_name(v));
        return false;
    }

    bool is_array(const json& v, const std::string& path) {
        if (v.is_array()) return true;
        fail(path, "expected an array, found " + type_name(v));
        return false;
    }

    /// Flags every key of obj outside `allowed`.
    void only(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!obj.is_object()) return;
        for (const auto& [key, value] : obj.items()) {
            bool known = false;
            for (const char* a : allowed) known = known || key == a;
            if (!known) fail(path + "/" + key, "unknown field");
        }
    }

    template <class T>
    std::optional<T> get(const json& obj, const std::string& base, const char* key,
                         std::optional<T> fallback = std::nullopt) {
        const std::string path = base + "/" + key;
        if (!obj.is_object() || !obj.contains(key)) {
            if (!fallback) {
                fail(path, "required field missing");
                return std::nullopt;
            }
            put(path, *fallback);
            return fallback;
        }
        auto v = convert<T>(obj.at(key), path);
        if (v) put(path, *v);
        return v;
    }

    template <class T>
    T value(const json& obj, const std::string& base, const char* key, T fallback) {
        return get<T>(obj, base, key, fallback).value_or(fallback);
    }

    template <class T>
    void put(const std::string& path, const T& v) {
        normalized[ordered_json::json_pointer(path)] = v;
    }

    template <class T>
    std::optional<T> convert(const json& v, const std::string& path) {
        if constexpr (std::is_same_v<T, bool>) {
            if (v.is_boolean()) return v.get<bool>();
            fail(path, "expected a boolean, found " + type_name(v));
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (v.is_string()) return v.get<std::string>();
            fail(path, "expected a string, found " + type_name(v));
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            if (v.is_number_unsigned()) return v.get<std::uint64_t>();
            fail(path, "expected a non-negative integer, found " + describe(v));
        } else if constexpr (std::is_same_v<T, int>) {
            if (v.is_number_integer()) {
                const auto x = v.get<std::int64_t>();
                if (x >= std::numeric_limits<int>::min() && x <= std::numeric_limits<int>::max()) {
                    return static_cast<int>(x);
                }
            }
            fail(path, "expected an integer, found " + describe(v));
        } else {
            static_assert(std::is_same_v<T, double>);
            if (v.is_number()) return v.get<double>();
            fail(path, "expected a number, found " + type_name(v));
        }
        return std::nullopt;
    }

    /// Checks a number read at path; reports `what` when pred fails.
    template <class T, class Pred>
    void check(const std::optional<T>& v, const std::string& path, Pred pred, const char* what) {
        if (v && !pred(*v)) fail(path, what);
    }

private:
    static std::string describe(const json& v) { return v.is_number() ? v.dump() : type_name(v); }
};

inline bool positive(double x) { return x > 0.0; }
inline bool non_negative(double x) { return x >= 0.0; }
inline bool probability(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace detail

/// Parses text as JSON; syntax errors carry the line and column.
inline json parse_scenario_text(const std::string& text, const std::string& origin = "<scenario>") {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::string what = e.what();
        if (auto pos = what.find("syntax error"); pos != std::string::npos) what = what.substr(pos);
        throw ParseError(origin, line, col, what);
    }
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read scenario file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace detail {

struct Loader {
    Reader r;
    Scenario sc;
    std::map<NodeId, net::NodeKind> kinds;
    std::map<std::string, net::DeviceClass> classes;
    std::set<std::string> app_ids;

    bool node_of(const std::optional<std::string>& id, const std::string& path,
                 bool (*pred)(net::NodeKind) = nullptr, const char* need = nullptr) {
        if (!id) return false;
        auto it = kinds.find(*id);
        if (it == kinds.end()) {
            r.fail(path, "unknown node id '" + *id + "'");
            return false;
        }
        if (pred && !pred(it->second)) {
            r.fail(path, "node '" + *id + "' is " + net::to_string(it->second) + ", expected " + need);
            return false;
        }
        return true;
    }

    std::optional<net::Vec3> vec3(const json& v, const std::string& path) {
        if (!v.is_array() || v.size() != 3) {
            r.fail(path, "expected [x, y, z]");
            return std::nullopt;
        }
        net::Vec3 out;
        double* dst[] = {&out.x, &out.y, &out.z};
        for (std::size_t i = 0; i < 3; ++i) {
            auto c = r.convert<double>(v[i], path + "/" + std::to_string(i));
            if (!c) return std::nullopt;
            *dst[i] = *c;
        }
        r.put(path, ordered_json::array({out.x, out.y, out.z}));
        return out;
    }

    void load(const json& doc) {
        if (!r.is_object(doc, "")) return;
        r.only(doc, "", {"schema_version", "name", "seed", "duration_s", "device_classes", "nodes", "cells", "links",
                         "repeater_graph", "protocol", "policy", "timing", "apps"});
        auto version = r.get<int>(doc, "", "schema_version");
        if (version && *version != kSchemaVersion) {
            r.fail("/schema_version", "unsupported schema version " + std::to_string(*version) + " (expected " +
                                          std::to_string(kSchemaVersion) + ")");
        }
        sc.name = r.value<std::string>(doc, "", "name", "scenario");
        sc.seed = r.value<std::uint64_t>(doc, "", "seed", 0);
        auto dur = r.get<double>(doc, "", "duration_s");
        r.check(dur, "/duration_s", positive, "must be positive");
        sc.duration = dur.value_or(0.0);

        device_classes(doc);
        nodes(doc);
        cells(doc);
        links(doc);
        repeaters(doc);
        protocol(doc);
        policy(doc);
        timing(doc);
        applications(doc);
    }

    void device_classes(const json& doc) {
        if (!doc.contains("device_classes")) {
            r.put("/device_classes", ordered_json::object());
            return;
        }
        const auto& dc = doc.at("device_classes");
        if (!r.is_object(dc, "/device_classes")) return;
        for (const auto& [label, spec] : dc.items()) {
            const std::string path = "/device_classes/" + label;
            if (!r.is_object(spec, path)) continue;
            r.only(spec, path, {"t_coh_s", "memory_slots"});
            auto t = r.get<double>(spec, path, "t_coh_s");
            auto m = r.get<int>(spec, path, "memory_slots");
            r.check(t, path + "/t_coh_s", positive, "must be positive");
            r.check(m, path + "/memory_slots", [](int x) { return x >= 0; }, "must be non-negative");
            if (t && m) classes[label] = {*t, *m};
        }
    }

    void nodes(const json& doc) {
        if (!doc.contains("nodes")) {
            r.fail("/nodes", "required field missing");
            return;
        }
        const auto& arr = doc.at("nodes");
        if (!r.is_array(arr, "/nodes")) return;
        if (arr.empty()) r.fail("/nodes", "at least one node is required");
        // ids first so serving_bs may refer forward
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const auto& n = arr[i];
            if (!n.is_object() || !n.contains("id") || !n.contains("kind")) continue;
            if (!n.at("id").is_string() || !n.at("kind").is_string()) continue;
            auto kind = net::parse_node_kind(n.at("kind").get<std::string>());
            if (kind && !kinds.count(n.at("id").get<std::string>())) kinds[n.at("id").get<std::string>()] = *kind;
        }
        std::set<NodeId> seen;
        for (std::size_t i = 0; i < arr.size(); ++i) node(arr[i], "/nodes/" + std::to_string(i), seen);
    }

    void node(const json& n, const std::string& path, std::set<NodeId>& seen) {
        if (!r.is_object(n, path)) return;
        r.only(n, path, {"id", "kind", "position", "device_class", "serving_bs", "quantum_bs", "mobility",
                         "los_blocked"});
        net::NodeSpec spec;
        auto id = r.get<std::string>(n, path, "id");
        auto kind_s = r.get<std::string>(n, path, "kind");
        if (id) {
            if (id->empty()) r.fail(path + "/id", "must not be empty");
            if (!seen.insert(*id).second) r.fail(path + "/id", "duplicate node id '" + *id + "'");
            spec.id = *id;
        }
        std::optional<net::NodeKind> kind;
        if (kind_s) {
            kind = net::parse_node_kind(*kind_s);
            if (!kind) r.fail(path + "/kind", "unknown node kind '" + *kind_s + "' (CBS, QBS, CUE, QUE, SAT_QBS)");
        }
        if (!kind) return;
        spec.kind = *kind;
        if (!n.contains("position")) {
            r.fail(path + "/position", "required field missing");
        } else if (auto p = vec3(n.at("position"), path + "/position")) {
            spec.position = *p;
        }

        const bool quantum = net::is_quantum_capable(*kind);
        auto dc = r.get<std::string>(n, path, "device_class", quantum ? std::nullopt : std::optional<std::string>(""));
        if (dc && !dc->empty()) {
            auto it = classes.find(*dc);
            if (it == classes.end()) {
                r.fail(path + "/device_class", "unknown device class '" + *dc + "'");
            } else {
                spec.device_class = *dc;
                spec.t_coh = it->second.t_coh;
                spec.memory_slots = it->second.memory_slots;
                if (*kind == net::NodeKind::CUE && spec.memory_slots != 0) {
                    r.fail(path + "/device_class", "a CUE cannot use a device class with quantum memory");
                }
                if (quantum && spec.memory_slots < 1) {
                    r.fail(path + "/device_class", "quantum-capable nodes need at least one memory slot");
                }
            }
        }

        if (net::is_user(*kind)) {
            auto bs = r.get<std::string>(n, path, "serving_bs");
            if (node_of(bs, path + "/serving_bs", net::is_base_station, "a base station")) spec.serving_bs = *bs;
        } else if (n.contains("serving_bs")) {
            r.fail(path + "/serving_bs", "only user nodes have a serving base station");
        }
        if (*kind == net::NodeKind::QUE) {
            auto qbs = r.get<std::string>(n, path, "quantum_bs", std::string{});
            if (qbs && !qbs->empty()) {
                auto is_q = [](net::NodeKind k) { return net::is_base_station(k) && net::is_quantum_capable(k); };
                if (node_of(qbs, path + "/quantum_bs", +is_q, "a quantum base station")) spec.quantum_bs = *qbs;
            } else if (!spec.serving_bs.empty() && kinds.count(spec.serving_bs) &&
                       !net::is_quantum_capable(kinds.at(spec.serving_bs))) {
                r.fail(path + "/quantum_bs", "required when the serving base station is classical-only");
            }
        } else if (n.contains("quantum_bs")) {
            r.fail(path + "/quantum_bs", "only QUEs have a quantum base station");
        }

        spec.mobility = mobility(n, path);
        if (*kind == net::NodeKind::SAT_QBS && !spec.mobility.is_orbit()) {
            r.fail(path + "/mobility", "a SAT_QBS needs an orbit mobility model");
        }
        if (spec.mobility.is_orbit() && *kind != net::NodeKind::SAT_QBS) {
            r.fail(path + "/mobility", "orbit mobility is only valid for SAT_QBS nodes");
        }

        r.put(path + "/los_blocked", ordered_json::array());
        if (n.contains("los_blocked") && r.is_array(n.at("los_blocked"), path + "/los_blocked")) {
            const auto& lb = n.at("los_blocked");
            for (std::size_t j = 0; j < lb.size(); ++j) {
                const std::string p = path + "/los_blocked/" + std::to_string(j);
                if (!lb[j].is_array() || lb[j].size() != 2 || !lb[j][0].is_number() || !lb[j][1].is_number()) {
                    r.fail(p, "expected [start_s, end_s]");
                    continue;
                }
                const double s = lb[j][0].get<double>(), e = lb[j][1].get<double>();
                if (!(e > s)) r.fail(p, "interval end must exceed its start");
                spec.los_blocked.push_back({s, e});
                r.put(p, ordered_json::array({s, e}));
            }
        }

        if (id && r.violations.empty()) {
            try {
                sc.topology.add_node(spec);
            } catch (const ConfigError& e) {
                r.fail(path, e.what());
            }
        }
    }

    net::MobilityModel mobility(const json& n, const std::string& path) {
        const std::string mp = path + "/mobility";
        if (!n.contains("mobility")) {
            r.put(mp, ordered_json{{"type", "static"}});
            return net::MobilityModel::fixed();
        }
        const auto& m = n.at("mobility");
        if (!r.is_object(m, mp)) return net::MobilityModel::fixed();
        auto type = r.get<std::string>(m, mp, "type");
        if (!type) return net::MobilityModel::fixed();
        if (*type == "static") {
            r.only(m, mp, {"type"});
            return net::MobilityModel::fixed();
        }
        if (*type == "waypoint") {
            r.only(m, mp, {"type", "points"});
            if (!m.contains("points")) {
                r.fail(mp + "/points", "required field missing");
                return net::MobilityModel::fixed();
            }
            const auto& pts = m.at("points");
            if (!r.is_array(pts, mp + "/points")) return net::MobilityModel::fixed();
            std::vector<net::Waypoint> wps;
            for (std::size_t i = 0; i < pts.size(); ++i) {
                const std::string pp = mp + "/points/" + std::to_string(i);
                if (!r.is_object(pts[i], pp)) continue;
                r.only(pts[i], pp, {"t", "position"});
                auto t = r.get<double>(pts[i], pp, "t");
                std::optional<net::Vec3> pos;
                if (!pts[i].contains("position")) {
                    r.fail(pp + "/position", "required field missing");
                } else {
                    pos = vec3(pts[i].at("position"), pp + "/position");
                }
                if (t && pos) wps.push_back({*t, *pos});
            }
            try {
                return net::MobilityModel::waypoints(std::move(wps));
            } catch (const ConfigError& e) {
                r.fail(mp + "/points", e.what());
                return net::MobilityModel::fixed();
            }
        }
        if (*type == "orbit") {
            r.only(m, mp, {"type", "pass_start_s", "pass_duration_s", "period_s"});
            auto s = r.get<double>(m, mp, "pass_start_s");
            auto d = r.get<double>(m, mp, "pass_duration_s");
            auto p = r.get<double>(m, mp, "period_s");
            if (!s || !d || !p) return net::MobilityModel::fixed();
            try {
                return net::MobilityModel::orbit({*s, *d, *p});
            } catch (const ConfigError& e) {
                r.fail(mp, e.what());
                return net::MobilityModel::fixed();
            }
        }
        r.fail(mp + "/type", "unknown mobility type '" + *type + "' (static, waypoint, orbit)");
        return net::MobilityModel::fixed();
    }

    void cells(const json& doc) {
        r.put("/cells", ordered_json::array());
        if (!doc.contains("cells")) return;
        const auto& arr = doc.at("cells");
        if (!r.is_array(arr, "/cells")) return;
        std::set<NodeId> seen;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "/cells/" + std::to_string(i);
            const auto& c = arr[i];
            if (!r.is_object(c, path)) continue;
            r.only(c, path, {"bs", "classical_radius_m", "quantum_radius_m"});
            auto bs = r.get<std::string>(c, path, "bs");
            auto cr = r.get<double>(c, path, "classical_radius_m");
            auto qr = r.get<double>(c, path, "quantum_radius_m", 0.0);
            r.check(cr, path + "/classical_radius_m", non_negative, "must be non-negative");
            r.check(qr, path + "/quantum_radius_m", non_negative, "must be non-negative");
            const bool bs_ok = node_of(bs, path + "/bs", net::is_base_station, "a base station");
            if (bs_ok && !seen.insert(*bs).second) r.fail(path + "/bs", "second cell for base station '" + *bs + "'");
            if (cr && qr && *qr > *cr) {
                r.fail(path + "/quantum_radius_m", "cell " + bs.value_or("?") + ": quantum radius " +
                                                       format_number(*qr) + " m exceeds classical radius " +
                                                       format_number(*cr) + " m");
            }
            if (bs_ok && qr && *qr > 0.0 && !net::is_quantum_capable(kinds.at(*bs))) {
                r.fail(path + "/quantum_radius_m", "cell " + *bs + " belongs to a classical-only base station");
            }
            if (bs_ok && cr && qr && r.violations.empty()) {
                try {
                    sc.topology.add_cell({*bs, *cr, *qr});
                } catch (const ConfigError& e) {
                    r.fail(path, e.what());
                }
            }
        }
    }

    std::optional<net::ClassicalLinkSpec> classical_spec(const json& o, const std::string& path,
                                                         std::initializer_list<const char*> extra = {}) {
        if (!r.is_object(o, path)) return std::nullopt;
        std::vector<const char*> allowed{"rate_bps", "prop_delay_s", "p_err_c"};
        allowed.insert(allowed.end(), extra.begin(), extra.end());
        for (const auto& [key, v] : o.items()) {
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
                allowed.end()) {
                r.fail(path + "/" + key, "unknown field");
            }
        }
        net::ClassicalLinkSpec s;
        auto rate = r.get<double>(o, path, "rate_bps", s.rate);
        auto prop = r.get<double>(o, path, "prop_delay_s", s.prop_delay);
        auto perr = r.get<double>(o, path, "p_err_c", s.p_err_c);
        r.check(rate, path + "/rate_bps", positive, "must be positive");
        r.check(prop, path + "/prop_delay_s", non_negative, "must be non-negative");
        r.check(perr, path + "/p_err_c", [](double p) { return p >= 0.0 && p < 1.0; }, "must lie in [0, 1)");
        if (!rate || !prop || !perr) return std::nullopt;
        s = {*rate, *prop, *perr};
        try {
            s.validate();
        } catch (const ConfigError&) {
            return std::nullopt;
        }
        return s;
    }

    std::optional<net::QuantumLinkSpec> quantum_spec(const json& o, const std::string& path,
                                                     std::initializer_list<const char*> extra = {}) {
        if (!r.is_object(o, path)) return std::nullopt;
        std::vector<const char*> allowed{"q_attempt", "attempt_period_s", "w0", "requires_los"};
        allowed.insert(allowed.end(), extra.begin(), extra.end());
        for (const auto& [key, v] : o.items()) {
            if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
                allowed.end()) {
                r.fail(path + "/" + key, "unknown field");
            }
        }
        net::QuantumLinkSpec s;
        auto q = r.get<double>(o, path, "q_attempt", s.q_attempt);
        auto per = r.get<double>(o, path, "attempt_period_s", s.attempt_period);
        auto w0 = r.get<double>(o, path, "w0", s.w0);
        auto los = r.get<bool>(o, path, "requires_los", s.requires_los);
        r.check(q, path + "/q_attempt", probability, "must lie in [0, 1]");
        r.check(per, path + "/attempt_period_s", positive, "must be positive");
        r.check(w0, path + "/w0", probability, "must lie in [0, 1]");
        if (!q || !per || !w0 || !los) return std::nullopt;
        s = {*q, *per, *w0, *los};
        try {
            s.validate();
        } catch (const ConfigError&) {
            return std::nullopt;
        }
        return s;
    }

    std::optional<std::pair<NodeId, NodeId>> endpoints(const json& o, const std::string& path) {
        const std::string p = path + "/endpoints";
        if (!o.is_object() || !o.contains("endpoints")) {
            r.fail(p, "required field missing");
            return std::nullopt;
        }
        const auto& e = o.at("endpoints");
        if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
            r.fail(p, "expected [node, node]");
            return std::nullopt;
        }
        const NodeId a = e[0].get<std::string>(), b = e[1].get<std::string>();
        const bool ok_a = node_of(a, p + "/0");
        const bool ok_b = node_of(b, p + "/1");
        if (a == b) r.fail(p, "a link needs two distinct endpoints");
        r.put(p, ordered_json::array({a, b}));
        if (!ok_a || !ok_b || a == b) return std::nullopt;
        return std::pair{a, b};
    }

    void links(const json& doc) {
        const json empty = json::object();
        const auto& l = doc.contains("links") ? doc.at("links") : empty;
        if (!r.is_object(l, "/links")) return;
        r.only(l, "/links", {"defaults", "classical", "quantum"});
        const auto& d = l.contains("defaults") ? l.at("defaults") : empty;
        if (r.is_object(d, "/links/defaults")) {
            r.only(d, "/links/defaults", {"access", "backhaul", "quantum", "inter_bs_quantum"});
            if (auto s = classical_spec(d.value("access", empty), "/links/defaults/access")) {
                sc.topology.set_default_access_link(*s);
            }
            if (auto s = classical_spec(d.value("backhaul", empty), "/links/defaults/backhaul")) {
                sc.topology.set_default_backhaul_link(*s);
            }
            if (auto s = quantum_spec(d.value("quantum", empty), "/links/defaults/quantum")) {
                sc.topology.set_default_quantum_link(*s);
            }
            if (auto s = quantum_spec(d.value("inter_bs_quantum", empty), "/links/defaults/inter_bs_quantum")) {
                sc.topology.set_default_bs_quantum_link(*s);
            }
        }
        r.put("/links/classical", ordered_json::array());
        if (l.contains("classical") && r.is_array(l.at("classical"), "/links/classical")) {
            const auto& arr = l.at("classical");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string path = "/links/classical/" + std::to_string(i);
                auto ends = endpoints(arr[i], path);
                auto spec = classical_spec(arr[i], path, {"endpoints"});
                if (ends && spec) sc.topology.set_classical_link(ends->first, ends->second, *spec);
            }
        }
        r.put("/links/quantum", ordered_json::array());
        if (l.contains("quantum") && r.is_array(l.at("quantum"), "/links/quantum")) {
            const auto& arr = l.at("quantum");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string path = "/links/quantum/" + std::to_string(i);
                auto ends = endpoints(arr[i], path);
                auto spec = quantum_spec(arr[i], path, {"endpoints"});
                if (ends) {
                    for (const auto& e : {ends->first, ends->second}) {
                        if (!net::is_quantum_capable(kinds.at(e))) {
                            r.fail(path + "/endpoints", "node '" + e + "' cannot hold qubits");
                        }
                    }
                }
                if (ends && spec) sc.topology.set_quantum_link(ends->first, ends->second, *spec);
            }
        }
    }

    void repeaters(const json& doc) {
        r.put("/repeater_graph", ordered_json::array());
        if (!doc.contains("repeater_graph")) return;
        const auto& arr = doc.at("repeater_graph");
        if (!r.is_array(arr, "/repeater_graph")) return;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "/repeater_graph/" + std::to_string(i);
            const auto& e = arr[i];
            if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
                r.fail(path, "expected [station, station]");
                continue;
            }
            auto is_q = [](net::NodeKind k) { return net::is_base_station(k) && net::is_quantum_capable(k); };
            const NodeId a = e[0].get<std::string>(), b = e[1].get<std::string>();
            const bool ok = node_of(a, path + "/0", +is_q, "a quantum base station") &
                            node_of(b, path + "/1", +is_q, "a quantum base station");
            r.put(path, ordered_json::array({a, b}));
            if (ok && a == b) r.fail(path, "self-loop");
            if (ok && a != b && r.violations.empty()) {
                try {
                    sc.topology.add_repeater_edge(a, b);
                } catch (const ConfigError& ex) {
                    r.fail(path, ex.what());
                }
            }
        }
    }

    void protocol(const json& doc) {
        const json empty = json::object();
        const auto& p = doc.contains("protocol") ? doc.at("protocol") : empty;
        if (!r.is_object(p, "/protocol")) return;
        r.only(p, "/protocol", {"registration_messages", "resume_messages", "retry_cap", "inactivity_timeout_s",
                                "f_min", "message_bits", "distillation"});
        auto& c = sc.protocol;
        const std::string b = "/protocol";
        auto reg = r.get<int>(p, b, "registration_messages", c.registration_messages);
        auto res = r.get<int>(p, b, "resume_messages", c.resume_messages);
        auto cap = r.get<int>(p, b, "retry_cap", c.retry_cap);
        auto ina = r.get<double>(p, b, "inactivity_timeout_s", c.inactivity_timeout);
        auto fmin = r.get<double>(p, b, "f_min", c.f_min);
        r.check(reg, b + "/registration_messages", [](int x) { return x >= 1; }, "must be at least 1");
        r.check(res, b + "/resume_messages", [](int x) { return x >= 1; }, "must be at least 1");
        r.check(cap, b + "/retry_cap", [](int x) { return x >= 0; }, "must be non-negative");
        r.check(ina, b + "/inactivity_timeout_s", positive, "must be positive");
        r.check(fmin, b + "/f_min", [](double f) { return f > 0.25 && f <= 1.0; }, "must lie in (0.25, 1]");
        c.registration_messages = reg.value_or(c.registration_messages);
        c.resume_messages = res.value_or(c.resume_messages);
        c.retry_cap = cap.value_or(c.retry_cap);
        c.inactivity_timeout = ina.value_or(c.inactivity_timeout);
        c.f_min = fmin.value_or(c.f_min);

        const auto& mb = p.contains("message_bits") ? p.at("message_bits") : empty;
        const std::string mp = b + "/message_bits";
        if (r.is_object(mb, mp)) {
            r.only(mb, mp, {"request", "ack", "correction", "registration"});
            auto& s = c.sizes;
            for (auto [key, dst] : {std::pair{"request", &s.request}, std::pair{"ack", &s.ack},
                                    std::pair{"correction", &s.correction},
                                    std::pair{"registration", &s.registration}}) {
                auto v = r.get<double>(mb, mp, key, *dst);
                r.check(v, mp + "/" + key, positive, "must be positive");
                *dst = v.value_or(*dst);
            }
        }
        const auto& ds = p.contains("distillation") ? p.at("distillation") : empty;
        const std::string dp = b + "/distillation";
        if (r.is_object(ds, dp)) {
            r.only(ds, dp, {"enabled", "factor", "delay_s"});
            auto& d = c.distillation;
            d.enabled = r.value<bool>(ds, dp, "enabled", d.enabled);
            auto f = r.get<double>(ds, dp, "factor", d.factor);
            auto dl = r.get<double>(ds, dp, "delay_s", d.delay);
            r.check(f, dp + "/factor", [](double x) { return x >= 1.0; }, "must be at least 1");
            r.check(dl, dp + "/delay_s", non_negative, "must be non-negative");
            d.factor = f.value_or(d.factor);
            d.delay = dl.value_or(d.delay);
        }
    }

    void policy(const json& doc) {
        const json empty = json::object();
        const auto& p = doc.contains("policy") ? doc.at("policy") : empty;
        if (!r.is_object(p, "/policy")) return;
        r.only(p, "/policy", {"mode", "buffers"});
        auto mode = r.get<std::string>(p, "/policy", "mode", std::string("Reactive"));
        if (mode && *mode != "Reactive" && *mode != "Proactive") {
            r.fail("/policy/mode", "expected Reactive or Proactive");
        }
        sc.policy.proactive = mode && *mode == "Proactive";
        r.put("/policy/buffers", ordered_json::array());
        if (p.contains("buffers") && r.is_array(p.at("buffers"), "/policy/buffers")) {
            const auto& arr = p.at("buffers");
            for (std::size_t i = 0; i < arr.size(); ++i) {
                const std::string path = "/policy/buffers/" + std::to_string(i);
                if (!r.is_object(arr[i], path)) continue;
                r.only(arr[i], path, {"que", "peer", "target", "min_fidelity", "refresh_interval_s", "max_latency_s"});
                protocol::BufferSpec b;
                auto que = r.get<std::string>(arr[i], path, "que");
                auto peer = r.get<std::string>(arr[i], path, "peer");
                auto target = r.get<int>(arr[i], path, "target", b.target);
                auto mf = r.get<double>(arr[i], path, "min_fidelity", b.min_fidelity);
                auto ri = r.get<double>(arr[i], path, "refresh_interval_s", b.refresh_interval);
                auto ml = r.get<double>(arr[i], path, "max_latency_s", b.max_latency);
                const bool ok_q = node_of(que, path + "/que", [](net::NodeKind k) { return k == net::NodeKind::QUE; }, "a QUE");
                const bool ok_p = node_of(peer, path + "/peer", net::is_quantum_capable, "a quantum-capable node");
                r.check(target, path + "/target", [](int x) { return x >= 1; }, "must be at least 1");
                r.check(mf, path + "/min_fidelity", [](double f) { return f >= 0.25 && f <= 1.0; }, "must lie in [0.25, 1]");
                r.check(ri, path + "/refresh_interval_s", positive, "must be positive");
                r.check(ml, path + "/max_latency_s", positive, "must be positive");
                if (ok_q && ok_p && target && mf && ri && ml) {
                    sc.policy.buffers.push_back({*que, *peer, *target, *mf, *ri, *ml});
                }
            }
        }
        if (!sc.policy.proactive && !sc.policy.buffers.empty()) {
            r.fail("/policy/buffers", "buffers require mode Proactive");
        }
        if (sc.policy.proactive && sc.policy.buffers.empty()) {
            r.fail("/policy/buffers", "mode Proactive needs at least one buffer");
        }
    }

    void timing(const json& doc) {
        const json empty = json::object();
        const auto& t = doc.contains("timing") ? doc.at("timing") : empty;
        if (!r.is_object(t, "/timing")) return;
        r.only(t, "/timing", {"t_d_s", "reliability_target"});
        auto td = r.get<double>(t, "/timing", "t_d_s", sc.timing.t_d);
        auto rt = r.get<double>(t, "/timing", "reliability_target", sc.timing.reliability_target);
        r.check(td, "/timing/t_d_s", positive, "must be positive");
        r.check(rt, "/timing/reliability_target", [](double x) { return x > 0.0 && x <= 1.0; }, "must lie in (0, 1]");
        sc.timing = {td.value_or(sc.timing.t_d), rt.value_or(sc.timing.reliability_target)};
    }

    // ---- applications ----

    bool common_fields(const json& a, const std::string& path, AppCommon& c, const char* start_key = "start_s") {
        auto id = r.get<std::string>(a, path, "id");
        auto start = r.get<double>(a, path, start_key, 0.0);
        r.check(start, path + "/" + start_key, non_negative, "must be non-negative");
        if (id) {
            if (id->empty()) r.fail(path + "/id", "must not be empty");
            if (!app_ids.insert(*id).second) r.fail(path + "/id", "duplicate app id '" + *id + "'");
            c.id = *id;
        }
        c.start = start.value_or(0.0);
        return id && start;
    }

    void session_limits(const json& a, const std::string& path, double& max_latency, double& min_fidelity) {
        auto ml = r.get<double>(a, path, "max_latency_s", max_latency);
        auto mf = r.get<double>(a, path, "min_fidelity", min_fidelity);
        r.check(ml, path + "/max_latency_s", positive, "must be positive");
        r.check(mf, path + "/min_fidelity", [](double f) { return f >= 0.25 && f <= 1.0; }, "must lie in [0.25, 1]");
        max_latency = ml.value_or(max_latency);
        min_fidelity = mf.value_or(min_fidelity);
    }

    static bool is_que(net::NodeKind k) { return k == net::NodeKind::QUE; }
    static bool is_qbs(net::NodeKind k) { return net::is_base_station(k) && net::is_quantum_capable(k); }

    void applications(const json& doc) {
        r.put("/apps", ordered_json::array());
        if (!doc.contains("apps")) return;
        const auto& arr = doc.at("apps");
        if (!r.is_array(arr, "/apps")) return;
        for (std::size_t i = 0; i < arr.size(); ++i) {
            const std::string path = "/apps/" + std::to_string(i);
            const auto& a = arr[i];
            if (!r.is_object(a, path)) continue;
            auto type = r.get<std::string>(a, path, "type");
            if (!type) continue;
            if (*type == "qkd") {
                qkd(a, path);
            } else if (*type == "ubqc") {
                ubqc(a, path);
            } else if (*type == "sensing") {
                sensing(a, path);
            } else if (*type == "teleport") {
                teleport(a, path);
            } else if (*type == "handover") {
                handover(a, path);
            } else if (*type == "acquire") {
                acquire(a, path);
            } else {
                r.fail(path + "/type", "unknown app type '" + *type + "' (qkd, ubqc, sensing, teleport, handover, acquire)");
            }
        }
    }

    void qkd(const json& a, const std::string& path) {
        r.only(a, path, {"type", "id", "start_s", "a", "b", "n_pairs", "k_target", "sacrifice_fraction",
                         "qber_abort", "max_latency_s", "min_fidelity", "retry_on_abort", "max_rounds", "keys"});
        QkdApp app;
        bool ok = common_fields(a, path, app.common);
        auto na = r.get<std::string>(a, path, "a");
        auto nb = r.get<std::string>(a, path, "b");
        ok = node_of(na, path + "/a", is_que, "a QUE") && ok;
        ok = node_of(nb, path + "/b", net::is_quantum_capable, "a quantum-capable node") && ok;
        if (na && nb && *na == *nb) {
            r.fail(path + "/b", "both ends are '" + *na + "'");
            ok = false;
        }
        auto n = r.get<int>(a, path, "n_pairs");
        auto k = r.get<int>(a, path, "k_target");
        auto sf = r.get<double>(a, path, "sacrifice_fraction", app.qkd.sacrifice_fraction);
        auto qa = r.get<double>(a, path, "qber_abort", app.qkd.qber_abort);
        session_limits(a, path, app.max_latency, app.min_fidelity);
        app.retry_on_abort = r.value<bool>(a, path, "retry_on_abort", false);
        auto mr = r.get<int>(a, path, "max_rounds", 1);
        auto keys = r.get<int>(a, path, "keys", 1);
        r.check(mr, path + "/max_rounds", [](int x) { return x >= 1; }, "must be at least 1");
        r.check(keys, path + "/keys", [](int x) { return x >= 1; }, "must be at least 1");
        if (!(n && k && sf && qa && mr && keys)) return;
        app.qkd = {*n, *k, *sf, *qa};
        app.max_rounds = *mr;
        app.keys = *keys;
        try {
            app.qkd.validate();
        } catch (const ConfigError& e) {
            r.fail(path, e.what());
            ok = false;
        }
        if (!ok) return;
        app.a = *na;
        app.b = *nb;
        sc.apps.emplace_back(std::move(app));
    }

    void ubqc(const json& a, const std::string& path) {
        r.only(a, path, {"type", "id", "start_s", "client", "server", "k_pairs", "pattern", "exact_mode",
                         "max_latency_s", "min_fidelity", "runs"});
        UbqcApp app;
        bool ok = common_fields(a, path, app.common);
        auto client = r.get<std::string>(a, path, "client");
        auto server = r.get<std::string>(a, path, "server");
        ok = node_of(client, path + "/client", is_que, "a QUE") && ok;
        ok = node_of(server, path + "/server", is_qbs, "a quantum base station") && ok;
        std::vector<int> pattern;
        const std::string pp = path + "/pattern";
        if (!a.contains("pattern")) {
            r.fail(pp, "required field missing");
            ok = false;
        } else if (r.is_array(a.at("pattern"), pp)) {
            for (std::size_t j = 0; j < a.at("pattern").size(); ++j) {
                auto v = r.convert<int>(a.at("pattern")[j], pp + "/" + std::to_string(j));
                if (v) pattern.push_back(*v);
                ok = ok && v.has_value();
            }
            r.put(pp, pattern);
        } else {
            ok = false;
        }
        auto kp = r.get<int>(a, path, "k_pairs", static_cast<int>(pattern.size()));
        app.ubqc.exact_mode = r.value<bool>(a, path, "exact_mode", true);
        session_limits(a, path, app.max_latency, app.min_fidelity);
        auto runs = r.get<int>(a, path, "runs", 1);
        r.check(runs, path + "/runs", [](int x) { return x >= 1; }, "must be at least 1");
        if (!kp || !runs || !ok) return;
        app.ubqc.k_pairs = *kp;
        app.ubqc.pattern = pattern;
        app.runs = *runs;
        try {
            app.ubqc.validate();
        } catch (const ConfigError& e) {
            r.fail(path, e.what());
            return;
        }
        if (app.ubqc.exact_mode && pattern.size() > static_cast<std::size_t>(qcore::kOracleMaxQubits)) {
            r.fail(pp, "exact mode is limited to patterns of at most " + std::to_string(qcore::kOracleMaxQubits) +
                           " qubits");
            return;
        }
        app.client = *client;
        app.server = *server;
        sc.apps.emplace_back(std::move(app));
    }

    void sensing(const json& a, const std::string& path) {
        r.only(a, path, {"type", "id", "start_s", "sensors", "aggregator", "probe", "true_phase_rad", "shots",
                         "t2_s", "interrogation_time_s", "reinit_delay_s"});
        SensingApp app;
        bool ok = common_fields(a, path, app.common);
        const std::string sp = path + "/sensors";
        if (!a.contains("sensors")) {
            r.fail(sp, "required field missing");
            ok = false;
        } else if (r.is_array(a.at("sensors"), sp)) {
            std::set<NodeId> seen;
            for (std::size_t j = 0; j < a.at("sensors").size(); ++j) {
                const std::string p = sp + "/" + std::to_string(j);
                auto id = r.convert<std::string>(a.at("sensors")[j], p);
                if (!node_of(id, p, is_que, "a QUE")) {
                    ok = false;
                    continue;
                }
                if (!seen.insert(*id).second) r.fail(p, "sensor '" + *id + "' listed twice");
                app.sensors.push_back(*id);
            }
            if (app.sensors.empty()) {
                r.fail(sp, "at least one sensor is required");
                ok = false;
            }
            r.put(sp, app.sensors);
        } else {
            ok = false;
        }
        auto agg = r.get<std::string>(a, path, "aggregator");
        ok = node_of(agg, path + "/aggregator", is_qbs, "a quantum base station") && ok;
        auto probe = r.get<std::string>(a, path, "probe", std::string("Separable"));
        if (probe && *probe != "Separable") {
            r.fail(path + "/probe", "scenario sensing supports Separable probes; GHZ probes are available through the library");
            ok = false;
        }
        auto& c = app.sensing;
        auto phase = r.get<double>(a, path, "true_phase_rad", c.true_phase);
        auto shots = r.get<int>(a, path, "shots", c.shots);
        auto t2 = r.get<double>(a, path, "t2_s", c.t2);
        auto ti = r.get<double>(a, path, "interrogation_time_s", c.interrogation_time);
        auto rd = r.get<double>(a, path, "reinit_delay_s", c.reinit_delay);
        r.check(shots, path + "/shots", [](int x) { return x >= 1; }, "must be at least 1");
        r.check(t2, path + "/t2_s", positive, "must be positive");
        r.check(ti, path + "/interrogation_time_s", non_negative, "must be non-negative");
        r.check(rd, path + "/reinit_delay_s", non_negative, "must be non-negative");
        if (ti && rd && *ti + *rd <= 0.0) {
            r.fail(path + "/interrogation_time_s", "a shot must take positive time");
            ok = false;
        }
        if (!(ok && phase && shots && t2 && ti && rd)) return;
        c = {static_cast<int>(app.sensors.size()), apps::Probe::Separable, *phase, *shots, *t2, *ti, *rd, 1.0};
        try {
            c.validate();
        } catch (const ConfigError& e) {
            r.fail(path, e.what());
            return;
        }
        app.aggregator = *agg;
        sc.apps.emplace_back(std::move(app));
    }

    void teleport(const json& a, const std::string& path) {
        r.only(a, path, {"type", "id", "start_s", "sender", "receiver", "count", "hold_s", "max_latency_s",
                         "min_fidelity"});
        TeleportApp app;
        bool ok = common_fields(a, path, app.common);
        auto s = r.get<std::string>(a, path, "sender");
        auto rc = r.get<std::string>(a, path, "receiver");
        ok = node_of(s, path + "/sender", is_que, "a QUE") && ok;
        ok = node_of(rc, path + "/receiver", net::is_quantum_capable, "a quantum-capable node") && ok;
        if (s && rc && *s == *rc) {
            r.fail(path + "/receiver", "sender and receiver coincide");
            ok = false;
        }
        auto count = r.get<int>(a, path, "count", 1);
        auto hold = r.get<double>(a, path, "hold_s", 0.0);
        r.check(count, path + "/count", [](int x) { return x >= 1; }, "must be at least 1");
        r.check(hold, path + "/hold_s", non_negative, "must be non-negative");
        session_limits(a, path, app.max_latency, app.min_fidelity);
        if (!(ok && count && hold)) return;
        app.sender = *s;
        app.receiver = *rc;
        app.count = *count;
        app.hold = *hold;
        sc.apps.emplace_back(std::move(app));
    }

    void handover(const json& a, const std::string& path) {
        r.only(a, path, {"type", "id", "start_s", "que", "to", "mode", "at_s", "max_latency_s"});
        HandoverApp app;
        bool ok = common_fields(a, path, app.common);
        auto que = r.get<std::string>(a, path, "que");
        auto to = r.get<std::string>(a, path, "to");
        ok = node_of(que, path + "/que", is_que, "a QUE") && ok;
        ok = node_of(to, path + "/to", is_qbs, "a quantum base station") && ok;
        auto mode = r.get<std::string>(a, path, "mode", std::string("Soft"));
        if (mode && *mode != "Soft" && *mode != "Hard") {
            r.fail(path + "/mode", "expected Soft or Hard");
            ok = false;
        }
        auto at = r.get<double>(a, path, "at_s");
        auto ml = r.get<double>(a, path, "max_latency_s", app.max_latency);
        r.check(ml, path + "/max_latency_s", positive, "must be positive");
        if (at && *at < app.common.start) {
            r.fail(path + "/at_s", "handover time precedes the app start");
            ok = false;
        }
        if (!(ok && at && ml && mode)) return;
        app.que = *que;
        app.to = *to;
        app.mode = *mode == "Soft" ? protocol::HandoverMode::Soft : protocol::HandoverMode::Hard;
        app.at = *at;
        app.max_latency = *ml;
        sc.apps.emplace_back(std::move(app));
    }

    void acquire(const json& a, const std::string& path) {
        r.only(a, path, {"type", "id", "start_s", "que", "peer", "count", "max_latency_s", "min_fidelity"});
        AcquireApp app;
        bool ok = common_fields(a, path, app.common);
        auto que = r.get<std::string>(a, path, "que");
        auto peer = r.get<std::string>(a, path, "peer");
        ok = node_of(que, path + "/que", is_que, "a QUE") && ok;
        ok = node_of(peer, path + "/peer", net::is_quantum_capable, "a quantum-capable node") && ok;
        auto count = r.get<int>(a, path, "count", 1);
        r.check(count, path + "/count", [](int x) { return x >= 1; }, "must be at least 1");
        session_limits(a, path, app.max_latency, app.min_fidelity);
        if (!(ok && count)) return;
        app.que = *que;
        app.peer = *peer;
        app.count = *count;
        sc.apps.emplace_back(std::move(app));
    }
};

}  // namespace detail

/// Checks a parsed document and, if it is clean, builds the scenario.
inline LoadResult load_scenario(const json& doc) {
    detail::Loader l;
    l.load(doc);
    LoadResult out;
    out.violations = std::move(l.r.violations);
    if (out.violations.empty()) {
        l.sc.normalized = std::move(l.r.normalized);
        out.scenario = std::move(l.sc);
    }
    return out;
}

/// Reads, parses and checks a scenario file. Syntax errors throw ParseError.
inline LoadResult load_scenario_file(const std::string& path) {
    return load_scenario(parse_scenario_text(read_file(path), path));
}

/// Like load_scenario but throws ScenarioError listing every violation.
inline Scenario build_scenario(const json& doc) {
    auto res = load_scenario(doc);
    if (!res.ok()) throw ScenarioError(std::move(res.violations));
    return std::move(*res.scenario);
}

}  // namespace oneq::scenario
