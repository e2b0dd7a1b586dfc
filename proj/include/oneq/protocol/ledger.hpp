#pragma once

#include <oneq/errors.hpp>
#include <oneq/ids.hpp>
#include <oneq/qcore/werner.hpp>

#include <map>
#include <string>
#include <vector>

namespace oneq::protocol {

enum class Fate { Live, Consumed, Discarded, Expired };

inline const char* to_string(Fate f) {
    switch (f) {
        case Fate::Live: return "live";
        case Fate::Consumed: return "consumed";
        case Fate::Discarded: return "discarded";
        case Fate::Expired: return "expired";
    }
    return "?";
}

/// When one holder's qubit arrived and how long it stays above the fidelity threshold.
struct QubitClock {
    double arrival;
    double budget;  // seconds
};

struct LedgerEntry {
    qcore::WernerPair pair;
    double t_coh;  // decay constant of the pair: weakest memory among its holders
    std::map<NodeId, QubitClock> qubits;
    Fate fate = Fate::Live;
    double fate_time = 0.0;
    std::string reason;
};

/// Every pair created during a run and what became of it. Entries are never erased, so a
/// settled id can always be looked up and is never reissued.
class ResourceLedger {
public:
    LedgerEntry& add(qcore::WernerPair pair, double t_coh, std::map<NodeId, QubitClock> qubits) {
        const ResourceId id = pair.id();
        auto [it, inserted] = entries_.try_emplace(id, LedgerEntry{std::move(pair), t_coh, std::move(qubits), Fate::Live, 0.0, {}});
        if (!inserted) throw SimulationError("ledger: duplicate resource id " + to_string(id));
        return it->second;
    }

    bool contains(ResourceId id) const { return entries_.count(id) != 0; }

    LedgerEntry& at(ResourceId id) {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw LookupError("ledger: unknown resource " + to_string(id));
        return it->second;
    }
    const LedgerEntry& at(ResourceId id) const {
        auto it = entries_.find(id);
        if (it == entries_.end()) throw LookupError("ledger: unknown resource " + to_string(id));
        return it->second;
    }

    /// The live entry for id; a settled id is rejected with ResourceError.
    LedgerEntry& live(ResourceId id, const char* op) {
        auto& e = at(id);
        if (e.fate != Fate::Live) {
            throw ResourceError(std::string(op) + ": resource " + to_string(id) + " is already " +
                                to_string(e.fate));
        }
        return e;
    }

    void settle(ResourceId id, Fate fate, double t, std::string reason) {
        if (fate == Fate::Live) throw SimulationError("ledger: cannot settle to live");
        auto& e = live(id, "settle");
        if (!e.pair.consumed()) e.pair.consume();
        e.fate = fate;
        e.fate_time = t;
        e.reason = std::move(reason);
    }

    std::vector<ResourceId> live_held_by(const NodeId& node) const {
        std::vector<ResourceId> out;
        for (const auto& [id, e] : entries_) {
            if (e.fate == Fate::Live && e.pair.held_by(node)) out.push_back(id);
        }
        return out;
    }

    std::size_t count(Fate f) const {
        std::size_t n = 0;
        for (const auto& [id, e] : entries_) n += e.fate == f;
        return n;
    }

    std::size_t size() const { return entries_.size(); }
    const std::map<ResourceId, LedgerEntry>& entries() const { return entries_; }

private:
    std::map<ResourceId, LedgerEntry> entries_;
};

}  // namespace oneq::protocol
