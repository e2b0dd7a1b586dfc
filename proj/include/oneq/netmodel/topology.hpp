#pragma once

#include <oneq/errors.hpp>
#include <oneq/ids.hpp>
#include <oneq/netmodel/mobility.hpp>

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oneq::net {

enum class NodeKind { CBS, QBS, CUE, QUE, SAT_QBS };

inline const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::CBS: return "CBS";
        case NodeKind::QBS: return "QBS";
        case NodeKind::CUE: return "CUE";
        case NodeKind::QUE: return "QUE";
        case NodeKind::SAT_QBS: return "SAT_QBS";
    }
    return "?";
}

inline std::optional<NodeKind> parse_node_kind(const std::string& s) {
    if (s == "CBS") return NodeKind::CBS;
    if (s == "QBS") return NodeKind::QBS;
    if (s == "CUE") return NodeKind::CUE;
    if (s == "QUE") return NodeKind::QUE;
    if (s == "SAT_QBS") return NodeKind::SAT_QBS;
    return std::nullopt;
}

inline bool is_base_station(NodeKind k) {
    return k == NodeKind::CBS || k == NodeKind::QBS || k == NodeKind::SAT_QBS;
}
inline bool is_quantum_capable(NodeKind k) {
    return k == NodeKind::QBS || k == NodeKind::QUE || k == NodeKind::SAT_QBS;
}
inline bool is_user(NodeKind k) { return k == NodeKind::CUE || k == NodeKind::QUE; }

struct DeviceClass {
    double t_coh;      // seconds
    int memory_slots;  // simultaneously stored qubits
};

struct NodeSpec {
    NodeId id;
    NodeKind kind = NodeKind::QUE;
    Vec3 position;
    MobilityModel mobility;
    std::string device_class;
    double t_coh = 0.0;  // resolved from the device class
    int memory_slots = 0;
    NodeId serving_bs;   // classical serving cell (users only)
    NodeId quantum_bs;   // serving quantum cell (QUEs only; empty if none)
    std::vector<PassWindow> los_blocked;

    void validate() const {
        if (kind == NodeKind::CUE && memory_slots != 0) {
            throw ConfigError("node " + id + ": a CUE cannot store qubits");
        }
        if (is_quantum_capable(kind) && memory_slots < 1) {
            throw ConfigError("node " + id + ": quantum-capable nodes need at least one memory slot");
        }
        if (is_quantum_capable(kind) && !(t_coh > 0.0)) {
            throw ConfigError("node " + id + ": coherence time must be positive");
        }
    }
};

struct CellSpec {
    NodeId bs_id;
    double classical_radius = 0.0;  // metres
    double quantum_radius = 0.0;    // metres; zero for a classical-only cell

    void validate() const {
        if (classical_radius < 0.0 || quantum_radius < 0.0) {
            throw ConfigError("cell " + bs_id + ": radii must be non-negative");
        }
        if (quantum_radius > classical_radius) {
            throw ConfigError("cell " + bs_id + ": quantum radius exceeds classical radius");
        }
    }
};

struct ClassicalLinkSpec {
    double rate = 1e6;        // bits per second
    double prop_delay = 0.0;  // seconds
    double p_err_c = 0.0;     // per-message loss probability

    void validate() const {
        if (!(rate > 0.0)) throw ConfigError("classical link: rate must be positive");
        if (prop_delay < 0.0) throw ConfigError("classical link: negative propagation delay");
        if (!(p_err_c >= 0.0 && p_err_c < 1.0)) throw ConfigError("classical link: p_err_c must lie in [0, 1)");
    }
};

/// Heralded free-space entanglement link.
struct QuantumLinkSpec {
    double q_attempt = 1.0;       // per-attempt success probability
    double attempt_period = 1e-3; // seconds
    double w0 = 1.0;              // Werner parameter of a fresh pair
    bool requires_los = true;

    void validate() const {
        if (!(attempt_period > 0.0)) throw ConfigError("quantum link: attempt period must be positive");
        if (!(q_attempt >= 0.0 && q_attempt <= 1.0)) throw ConfigError("quantum link: q_attempt must lie in [0, 1]");
        if (!(w0 >= 0.0 && w0 <= 1.0)) throw ConfigError("quantum link: w0 must lie in [0, 1]");
    }
};

/// Link used by a BS to hand one pair to two of its users: both photons must arrive and
/// each channel's depolarisation multiplies into w.
inline QuantumLinkSpec combine_links(const QuantumLinkSpec& a, const QuantumLinkSpec& b) {
    return {a.q_attempt * b.q_attempt, std::max(a.attempt_period, b.attempt_period), a.w0 * b.w0,
            a.requires_los || b.requires_los};
}

using LinkKey = std::pair<NodeId, NodeId>;

inline LinkKey link_key(const NodeId& a, const NodeId& b) {
    return a < b ? LinkKey{a, b} : LinkKey{b, a};
}

/// Scenario geometry and link table. Read-only once the scenario has been loaded.
class Topology {
public:
    void add_node(NodeSpec n) {
        n.validate();
        if (nodes_.count(n.id)) throw ConfigError("duplicate node id " + n.id);
        order_.push_back(n.id);
        nodes_.emplace(n.id, std::move(n));
    }

    void add_cell(CellSpec c) {
        c.validate();
        node(c.bs_id);
        if (!is_base_station(node(c.bs_id).kind)) throw ConfigError("cell owner " + c.bs_id + " is not a base station");
        if (node(c.bs_id).kind == NodeKind::CBS && c.quantum_radius > 0.0) {
            throw ConfigError("cell " + c.bs_id + ": a CBS has no quantum coverage");
        }
        cells_[c.bs_id] = std::move(c);
    }

    void set_classical_link(const NodeId& a, const NodeId& b, ClassicalLinkSpec spec) {
        spec.validate();
        classical_[link_key(a, b)] = spec;
    }
    void set_quantum_link(const NodeId& a, const NodeId& b, QuantumLinkSpec spec) {
        spec.validate();
        quantum_[link_key(a, b)] = spec;
    }
    void set_default_access_link(ClassicalLinkSpec spec) { spec.validate(); default_access_ = spec; }
    void set_default_backhaul_link(ClassicalLinkSpec spec) { spec.validate(); default_backhaul_ = spec; }
    void set_default_quantum_link(QuantumLinkSpec spec) { spec.validate(); default_quantum_ = spec; }
    void set_default_bs_quantum_link(QuantumLinkSpec spec) { spec.validate(); default_bs_quantum_ = spec; }

    void add_repeater_edge(const NodeId& a, const NodeId& b) {
        for (const auto& id : {a, b}) {
            if (!is_quantum_capable(node(id).kind) || !is_base_station(node(id).kind)) {
                throw ConfigError("repeater edge endpoint " + id + " is not a quantum base station");
            }
        }
        repeaters_[a].insert(b);
        repeaters_[b].insert(a);
    }

    bool has_node(const NodeId& id) const { return nodes_.count(id) != 0; }

    const NodeSpec& node(const NodeId& id) const {
        auto it = nodes_.find(id);
        if (it == nodes_.end()) throw LookupError("unknown node id " + id);
        return it->second;
    }

    const std::vector<NodeId>& node_ids() const { return order_; }

    const CellSpec* cell(const NodeId& bs) const {
        auto it = cells_.find(bs);
        return it == cells_.end() ? nullptr : &it->second;
    }

    Vec3 position(const NodeId& id, double t) const {
        const auto& n = node(id);
        return n.mobility.position(t, n.position);
    }

    bool has_los(const NodeId& id, double t) const {
        for (const auto& w : node(id).los_blocked) {
            if (w.start <= t && t < w.end) return false;
        }
        return true;
    }

    bool in_classical_coverage(const NodeId& n, const NodeId& bs, double t) const {
        return covered(n, bs, t, false);
    }

    bool in_quantum_coverage(const NodeId& n, const NodeId& bs, double t) const {
        return covered(n, bs, t, true);
    }

    /// Whether an entanglement attempt between a and b (distributed by `via`) may run at t.
    bool segment_available(const NodeId& a, const NodeId& b, const NodeId& via, double t,
                           bool needs_los) const {
        for (const auto& h : {a, b}) {
            const auto& spec = node(h);
            if (!spec.mobility.active(t)) return false;
            if (needs_los && !has_los(h, t)) return false;
            if (is_user(spec.kind) && !in_quantum_coverage(h, via, t)) return false;
        }
        return node(via).mobility.active(t);
    }

    const ClassicalLinkSpec& classical_link(const NodeId& a, const NodeId& b) const {
        if (auto it = classical_.find(link_key(a, b)); it != classical_.end()) return it->second;
        const bool backhaul = is_base_station(node(a).kind) && is_base_station(node(b).kind);
        const auto& fallback = backhaul ? default_backhaul_ : default_access_;
        if (!fallback) throw LookupError("no classical link between " + a + " and " + b);
        return *fallback;
    }

    const QuantumLinkSpec& quantum_link(const NodeId& a, const NodeId& b) const {
        if (auto it = quantum_.find(link_key(a, b)); it != quantum_.end()) return it->second;
        const bool inter_bs = is_base_station(node(a).kind) && is_base_station(node(b).kind);
        const auto& fallback = inter_bs ? default_bs_quantum_ : default_quantum_;
        if (!fallback) throw LookupError("no quantum link between " + a + " and " + b);
        return *fallback;
    }

    bool has_quantum_link(const NodeId& a, const NodeId& b) const {
        try {
            quantum_link(a, b);
            return true;
        } catch (const LookupError&) {
            return false;
        }
    }

    bool repeater_adjacent(const NodeId& a, const NodeId& b) const {
        auto it = repeaters_.find(a);
        return it != repeaters_.end() && it->second.count(b) != 0;
    }

    /// Shortest repeater path from a to b (inclusive), BFS with lexicographic tie-break.
    /// Empty if unreachable.
    std::vector<NodeId> repeater_path(const NodeId& a, const NodeId& b) const {
        if (a == b) return {a};
        std::map<NodeId, NodeId> parent;
        std::deque<NodeId> frontier{a};
        parent[a] = a;
        while (!frontier.empty()) {
            auto cur = frontier.front();
            frontier.pop_front();
            auto it = repeaters_.find(cur);
            if (it == repeaters_.end()) continue;
            for (const auto& nb : it->second) {
                if (parent.count(nb)) continue;
                parent[nb] = cur;
                if (nb == b) {
                    std::vector<NodeId> path{b};
                    while (path.back() != a) path.push_back(parent[path.back()]);
                    std::reverse(path.begin(), path.end());
                    return path;
                }
                frontier.push_back(nb);
            }
        }
        return {};
    }

    /// Coherence time of the weakest memory among the holders.
    double pair_t_coh(const NodeId& a, const NodeId& b) const {
        return std::min(node(a).t_coh, node(b).t_coh);
    }

private:
    bool covered(const NodeId& n, const NodeId& bs, double t, bool quantum) const {
        const auto& user = node(n);
        const auto& station = node(bs);
        if (n == bs) return true;
        const CellSpec* c = cell(bs);
        if (!c) return false;
        if (!station.mobility.active(t) || !user.mobility.active(t)) return false;
        const double radius = quantum ? c->quantum_radius : c->classical_radius;
        if (quantum && !is_quantum_capable(user.kind)) return false;
        return distance(position(n, t), position(bs, t)) <= radius;
    }

    std::map<NodeId, NodeSpec> nodes_;
    std::vector<NodeId> order_;
    std::map<NodeId, CellSpec> cells_;
    std::map<LinkKey, ClassicalLinkSpec> classical_;
    std::map<LinkKey, QuantumLinkSpec> quantum_;
    std::optional<ClassicalLinkSpec> default_access_;
    std::optional<ClassicalLinkSpec> default_backhaul_;
    std::optional<QuantumLinkSpec> default_quantum_;
    std::optional<QuantumLinkSpec> default_bs_quantum_;
    std::map<NodeId, std::set<NodeId>> repeaters_;
};

}  // namespace oneq::net
