#pragma once

// Post-run checks over a trace: owners' states at consumption, single use of every
// resource id, and classical coverage of users when a service completes.

#include <oneq/engine/trace.hpp>
#include <oneq/netmodel/topology.hpp>

#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace oneq::scenario {

struct AuditReport {
    std::size_t consumptions = 0;
    std::size_t services = 0;
    std::vector<std::string> bad_owner_state;   // consumption while an owner was Idle or Inactive
    std::vector<std::string> double_use;        // resource ids settled more than once
    std::vector<std::string> uncovered_service; // service completions for users out of coverage

    bool clean() const { return bad_owner_state.empty() && double_use.empty() && uncovered_service.empty(); }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) {
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

}  // namespace detail

inline AuditReport audit_trace(const Trace& trace, const net::Topology& topo) {
    AuditReport rep;
    std::map<std::string, int> settled;
    for (const auto& r : trace.records()) {
        if (r.kind == "consume") {
            ++rep.consumptions;
            for (const auto& st : detail::split(r.detail("states").value_or(""))) {
                if (st == "Idle" || st == "Inactive") {
                    rep.bad_owner_state.push_back(r.detail("resource").value_or("?") + "@" + format_number(r.t));
                }
            }
            ++settled[r.detail("resource").value_or("")];
        } else if (r.kind == "discard" || r.kind == "expire") {
            ++settled[r.detail("resource").value_or("")];
        } else if (r.kind == "swap" || r.kind == "distill") {
            for (const auto& id : detail::split(r.detail("in").value_or(""))) ++settled[id];
        } else if (r.kind == "service-complete") {
            ++rep.services;
            for (const auto& u : detail::split(r.detail("users").value_or(""))) {
                if (!topo.has_node(u)) {
                    rep.uncovered_service.push_back(u + "@" + format_number(r.t));
                    continue;
                }
                const auto& bs = topo.node(u).serving_bs;
                if (!topo.in_classical_coverage(u, bs, r.t)) {
                    rep.uncovered_service.push_back(u + "@" + format_number(r.t));
                }
            }
        }
    }
    for (const auto& [id, n] : settled) {
        if (n > 1 || id.empty()) rep.double_use.push_back(id.empty() ? "<missing id>" : id);
    }
    return rep;
}

}  // namespace oneq::scenario
