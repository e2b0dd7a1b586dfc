#pragma once

// Event-driven control and user plane: QUE connection states, classical messaging with
// retransmission, entanglement sessions, swapping along repeater routes, handover and
// buffer policies. Every handler runs inside the simulator's event loop.

#include <oneq/engine/simulator.hpp>
#include <oneq/errors.hpp>
#include <oneq/ids.hpp>
#include <oneq/netmodel/links.hpp>
#include <oneq/netmodel/topology.hpp>
#include <oneq/protocol/ledger.hpp>
#include <oneq/protocol/operations.hpp>
#include <oneq/qcore/werner.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace oneq::protocol {

enum class QueState { Idle, Connected, Inactive, Entangled };

inline const char* to_string(QueState s) {
    switch (s) {
        case QueState::Idle: return "Idle";
        case QueState::Connected: return "Connected";
        case QueState::Inactive: return "Inactive";
        case QueState::Entangled: return "Entangled";
    }
    return "?";
}

inline bool transition_allowed(QueState from, QueState to) {
    using S = QueState;
    switch (from) {
        case S::Idle: return to == S::Connected;
        case S::Connected: return to == S::Inactive || to == S::Idle || to == S::Entangled;
        case S::Inactive: return to == S::Connected;
        case S::Entangled: return to == S::Connected;
    }
    return false;
}

enum class SliceType { GenerateAndStore, GenerateAndMeasure };
enum class SessionOutcome { Fulfilled, PartiallyFulfilled, Expired, Rejected };
enum class HandoverMode { Soft, Hard };
enum class RegistrationOutcome { Connected, Rejected, Failed };

inline const char* to_string(SliceType s) {
    return s == SliceType::GenerateAndStore ? "GenerateAndStore" : "GenerateAndMeasure";
}
inline const char* to_string(SessionOutcome o) {
    switch (o) {
        case SessionOutcome::Fulfilled: return "Fulfilled";
        case SessionOutcome::PartiallyFulfilled: return "PartiallyFulfilled";
        case SessionOutcome::Expired: return "Expired";
        case SessionOutcome::Rejected: return "Rejected";
    }
    return "?";
}
inline const char* to_string(HandoverMode m) { return m == HandoverMode::Soft ? "Soft" : "Hard"; }
inline const char* to_string(RegistrationOutcome o) {
    switch (o) {
        case RegistrationOutcome::Connected: return "Connected";
        case RegistrationOutcome::Rejected: return "Rejected";
        case RegistrationOutcome::Failed: return "Failed";
    }
    return "?";
}

struct EntanglementRequest {
    NodeId requester;
    NodeId peer;  // a QUE or a base station
    SliceType slice = SliceType::GenerateAndStore;
    int count = 1;
    double max_latency = 1.0;
    double min_fidelity = 0.5;
    int priority = 0;
    std::string app_type = "generic";

    void validate() const {
        if (count < 1) throw ConfigError("entanglement request: count must be at least 1");
        if (!(max_latency > 0.0)) throw ConfigError("entanglement request: max_latency must be positive");
        if (!(min_fidelity >= 0.25 && min_fidelity <= 1.0)) {
            throw ConfigError("entanglement request: min_fidelity must lie in [0.25, 1]");
        }
    }
};

struct SessionResult {
    std::vector<ResourceId> delivered;
    double elapsed = 0.0;
    SessionOutcome outcome = SessionOutcome::Rejected;
    std::uint64_t attempts = 0;  // generation attempts over all segments
    int discarded = 0;
    std::string reason;
};

struct HandoverRecord {
    HandoverMode requested = HandoverMode::Soft;
    HandoverMode performed = HandoverMode::Soft;
    bool ok = false;
    double downtime = 0.0;  // seconds with no usable pair between the QUE and a serving BS
    double w_out = 0.0;
    std::optional<ResourceId> pair;
    std::string reason;
};

struct MessageSizes {
    double request = 512;
    double ack = 128;
    double correction = 64;
    double registration = 1024;
};

struct DistillationConfig {
    bool enabled = false;
    double factor = 1.2;  // w' = min(1, factor * w) from two pairs
    double delay = 0.0;   // seconds
};

struct ProtocolConfig {
    int registration_messages = 4;
    int resume_messages = 2;
    int retry_cap = 10;  // retransmissions allowed after the first attempt
    double inactivity_timeout = 5.0;
    double f_min = 0.8;  // threshold defining each qubit's quantum time budget
    MessageSizes sizes;
    DistillationConfig distillation;

    void validate() const {
        if (registration_messages < 1) throw ConfigError("protocol: registration needs at least one message");
        if (resume_messages < 1) throw ConfigError("protocol: resume needs at least one message");
        if (retry_cap < 0) throw ConfigError("protocol: negative retry cap");
        if (!(inactivity_timeout > 0.0)) throw ConfigError("protocol: inactivity timeout must be positive");
        if (!(f_min > 0.25 && f_min <= 1.0)) throw ConfigError("protocol: F_min must lie in (0.25, 1]");
        if (distillation.enabled && !(distillation.factor >= 1.0 && distillation.delay >= 0.0)) {
            throw ConfigError("protocol: distillation factor must be >= 1 with a non-negative delay");
        }
    }
};

/// Buffer kept topped up by the proactive policy.
struct BufferSpec {
    NodeId que;
    NodeId peer;
    int target = 1;
    double min_fidelity = 0.8;
    double refresh_interval = 0.5;
    double max_latency = 1.0;
};

struct AcquireResult {
    bool ok = false;
    std::vector<ResourceId> pairs;
    double latency = 0.0;
    int from_buffer = 0;
};

class Network {
public:
    using Done = std::function<void(bool)>;
    using PairSink = std::function<void(ResourceId)>;
    using SessionDone = std::function<void(const SessionResult&)>;

    Network(Simulator& sim, const net::Topology& topo, ProtocolConfig cfg = {})
        : sim_(sim), topo_(topo), cfg_(std::move(cfg)) {
        cfg_.validate();
        for (const auto& id : topo_.node_ids()) {
            if (net::is_user(topo_.node(id).kind)) users_[id] = UserState{};
        }
    }

    Network(const Network&) = delete;
    Network& operator=(const Network&) = delete;

    Simulator& sim() { return sim_; }
    const net::Topology& topology() const { return topo_; }
    const ProtocolConfig& config() const { return cfg_; }
    ResourceLedger& ledger() { return ledger_; }
    const ResourceLedger& ledger() const { return ledger_; }
    IdAllocator& ids() { return ids_; }

    QueState state(const NodeId& ue) const { return user(ue).state; }

    NodeId classical_serving(const NodeId& n) const {
        const auto& spec = topo_.node(n);
        if (net::is_base_station(spec.kind)) return n;
        if (spec.serving_bs.empty()) throw LookupError("node " + n + " has no serving base station");
        return spec.serving_bs;
    }

    NodeId quantum_serving(const NodeId& n) const {
        const auto& spec = topo_.node(n);
        if (net::is_base_station(spec.kind)) return n;
        if (auto it = users_.find(n); it != users_.end() && !it->second.quantum_bs.empty()) {
            return it->second.quantum_bs;
        }
        if (!spec.quantum_bs.empty()) return spec.quantum_bs;
        return spec.serving_bs;
    }

    bool classically_covered(const NodeId& n) const {
        if (!net::is_user(topo_.node(n).kind)) return topo_.node(n).mobility.active(sim_.now());
        return topo_.in_classical_coverage(n, classical_serving(n), sim_.now());
    }

    // ---- classical messaging -------------------------------------------------------

    /// Routed message: user -> serving BS -> (backhaul) -> serving BS -> user. Each hop is
    /// retransmitted up to retry_cap times; a user hop outside classical coverage fails.
    void send(const NodeId& from, const NodeId& to, double bits, const std::string& purpose, Done done) {
        auto hops = std::make_shared<std::vector<std::pair<NodeId, NodeId>>>(route(from, to));
        touch_activity(from);
        touch_activity(to);
        send_hop(hops, 0, bits, purpose, from, to, std::move(done));
    }

    // ---- connection management -----------------------------------------------------

    void register_ue(const NodeId& ue, std::function<void(RegistrationOutcome)> done = {}) {
        auto& u = user(ue);
        if (u.state != QueState::Idle) {
            throw PreconditionError("register: " + ue + " is " + to_string(u.state) + ", not Idle");
        }
        const NodeId bs = classical_serving(ue);
        if (!topo_.in_classical_coverage(ue, bs, sim_.now())) {
            sim_.record(ue, "register", {{"bs", bs}, {"outcome", "Rejected"}});
            sim_.metrics().add("registration.rejected", 1);
            if (done) sim_.after(0.0, EventKind::Timer, ue, [done] { done(RegistrationOutcome::Rejected); });
            return;
        }
        exchange(ue, bs, cfg_.registration_messages, cfg_.registration_messages, "register", sim_.now(),
                 [this, ue, bs, done](bool ok, double started) {
                     if (ok) {
                         set_state(ue, QueState::Connected);
                         sim_.metrics().observe("registration.latency", sim_.now() - started, "s");
                     } else {
                         sim_.metrics().add("registration.failed", 1);
                     }
                     sim_.record(ue, "register", {{"bs", bs}, {"outcome", ok ? "Connected" : "Failed"}});
                     if (done) done(ok ? RegistrationOutcome::Connected : RegistrationOutcome::Failed);
                 });
    }

    /// Idle -> registration, Inactive -> resume; Connected or Entangled succeed at once.
    void ensure_connected(const NodeId& ue, Done done) {
        auto& u = user(ue);
        switch (u.state) {
            case QueState::Connected:
            case QueState::Entangled:
                touch_activity(ue);
                done(true);
                return;
            case QueState::Idle:
                register_ue(ue, [done](RegistrationOutcome o) { done(o == RegistrationOutcome::Connected); });
                return;
            case QueState::Inactive: {
                const NodeId bs = classical_serving(ue);
                exchange(ue, bs, cfg_.resume_messages, cfg_.resume_messages, "resume", sim_.now(), [this, ue, done](bool ok, double) {
                    if (ok && user(ue).state == QueState::Inactive) set_state(ue, QueState::Connected);
                    done(ok && (state(ue) == QueState::Connected || state(ue) == QueState::Entangled));
                });
                return;
            }
        }
    }

    void release(const NodeId& ue) {
        if (state(ue) != QueState::Connected) {
            throw PreconditionError("release: " + ue + " must be Connected");
        }
        set_state(ue, QueState::Idle);
    }

    // ---- resources -----------------------------------------------------------------

    /// Measures both qubits; `basis_at_node` belongs to `node`. Returns {bit at node, bit at
    /// partner}. Every QUE holder must be Entangled.
    std::pair<int, int> measure(ResourceId id, const NodeId& node, const qcore::MeasurementBasis& basis_at_node,
                                const qcore::MeasurementBasis& basis_at_partner, const std::string& purpose) {
        auto& e = ledger_.live(id, "measure");
        e.pair.partner_of(node);
        check_owners(e, "measure");
        e.pair.touch(sim_.now(), e.t_coh);
        const double f = e.pair.fidelity();
        auto& rng = sim_.stream(node, "measure");
        const bool first = e.pair.holders().first == node;
        auto bits = first ? qcore::measure_pair(e.pair, basis_at_node, basis_at_partner, rng)
                          : swap_pair(qcore::measure_pair(e.pair, basis_at_partner, basis_at_node, rng));
        settle_consumed(id, f, purpose);
        return bits;
    }

    /// Generic use of a live pair (teleportation, remote preparation, ...).
    double consume(ResourceId id, const std::string& purpose) {
        auto& e = ledger_.live(id, "consume");
        check_owners(e, "consume");
        if (e.pair.correction_pending()) throw ResourceError("consume: " + to_string(id) + " awaits its correction");
        e.pair.touch(sim_.now(), e.t_coh);
        const double f = e.pair.fidelity();
        settle_consumed(id, f, purpose);
        return f;
    }

    void discard(ResourceId id, const std::string& reason) {
        auto& e = ledger_.live(id, "discard");
        const auto holders = e.pair.holders();
        ledger_.settle(id, Fate::Discarded, sim_.now(), reason);
        sim_.metrics().add("pairs_discarded", 1);
        sim_.record(holders.first, "discard", {{"resource", to_string(id)}, {"reason", reason}});
        refresh_state(holders.first);
        refresh_state(holders.second);
    }

    /// True when the qubit held by `holder` has outlived its quantum time budget at t.
    /// Updates per-node counters used for decoherence-failure rates.
    bool qubit_decohered(ResourceId id, const NodeId& holder, double t) {
        const auto& e = ledger_.at(id);
        auto it = e.qubits.find(holder);
        if (it == e.qubits.end()) throw ResourceError("qubit_decohered: " + holder + " holds no qubit of " + to_string(id));
        const bool failed = t - it->second.arrival > it->second.budget;
        if (net::is_user(topo_.node(holder).kind)) {
            sim_.metrics().add("qubits_used." + holder, 1);
            sim_.metrics().add("decoherence_failures." + holder, failed ? 1 : 0);
        }
        return failed;
    }

    double fidelity_now(ResourceId id) const {
        const auto& e = ledger_.at(id);
        if (e.fate != Fate::Live) return 0.0;
        return qcore::fidelity_of(e.pair.w_at(sim_.now(), e.t_coh));
    }

    /// Teleports an abstract payload from `sender` over pair `id`; the two correction bits
    /// travel through send(). The payload is gone from the sender either way.
    void teleport(const NodeId& sender, ResourceId id, QubitPayload& payload,
                  std::function<void(const TeleportRecord&)> done) {
        if (payload.state != PayloadState::Held) throw ResourceError("teleport: payload is not held by " + sender);
        auto& e = ledger_.live(id, "teleport");
        if (!e.pair.held_by(sender)) throw ResourceError("teleport: " + sender + " holds no qubit of " + to_string(id));
        const NodeId receiver = e.pair.partner_of(sender);
        const double quality = consume(id, "teleport");
        payload.state = PayloadState::Lost;
        auto rec = std::make_shared<TeleportRecord>();
        auto& rng = sim_.stream(sender, "teleport");
        rec->m1 = rng.bit();
        rec->m2 = rng.bit();
        const double started = sim_.now();
        send(sender, receiver, cfg_.sizes.correction, "teleport-correction",
             [this, rec, quality, started, sender, receiver, &payload, done](bool ok) {
                 rec->latency = sim_.now() - started;
                 rec->attempts = 1;
                 rec->delivered = ok && classically_covered(receiver);
                 if (rec->delivered) {
                     rec->quality = quality;
                     payload.state = PayloadState::Delivered;
                     service_complete("teleport", {sender, receiver});
                 }
                 done(*rec);
             });
    }

    /// Trace marker checked by the coverage audit: `nodes` completed a service now.
    void service_complete(const std::string& app, const std::vector<NodeId>& nodes) {
        std::string list;
        for (const auto& n : nodes) {
            if (!net::is_user(topo_.node(n).kind)) continue;
            if (!list.empty()) list += ',';
            list += n;
        }
        sim_.record(nodes.empty() ? NodeId{} : nodes.front(), "service-complete", {{"app", app}, {"users", list}});
    }

    // ---- entanglement sessions -----------------------------------------------------

    /// Runs the three-step session: request, generation (with swaps along the repeater
    /// route), acknowledgement. In GenerateAndMeasure mode `sink` receives each accepted pair
    /// and is expected to consume it.
    void start_session(EntanglementRequest req, PairSink sink, SessionDone done) {
        req.validate();
        auto run = std::make_shared<SessionRun>();
        run->req = std::move(req);
        run->sink = std::move(sink);
        run->done = std::move(done);
        run->start = sim_.now();
        run->last_accept = run->start;
        run->deadline = run->start + run->req.max_latency;
        run->serial = ++session_serial_;

        const auto& r = run->req;
        sim_.record(r.requester, "session-request",
                    {{"session", std::to_string(run->serial)}, {"peer", r.peer}, {"slice", to_string(r.slice)},
                     {"count", std::to_string(r.count)}, {"app", r.app_type}});

        if (auto why = admission_failure(*run)) {
            finish(run, SessionOutcome::Rejected, *why);
            return;
        }
        for (const auto& p : parties(*run)) {
            if (users_.count(p)) ++user(p).sessions;
        }
        run->admitted = true;

        send(r.requester, quantum_serving(r.requester), cfg_.sizes.request, "session-request",
             [this, run](bool ok) {
                 if (!ok) {
                     finish(run, SessionOutcome::Expired, "request-undeliverable");
                     return;
                 }
                 produce_next(run);
             });
    }

    // ---- handover ------------------------------------------------------------------

    /// Moves the QUE's stored pair from its current serving QBS to `bs_new`.
    void handover(const NodeId& que, const NodeId& bs_new, HandoverMode mode,
                  std::function<void(const HandoverRecord&)> done, double max_latency = 1.0) {
        const NodeId bs_old = quantum_serving(que);
        std::optional<ResourceId> old;
        for (auto id : ledger_.live_held_by(que)) {
            const auto& e = ledger_.at(id);
            if (e.pair.held_by(bs_old) && !e.pair.correction_pending()) {
                old = id;
                break;
            }
        }
        if (!old) throw PreconditionError("handover: " + que + " holds no stored pair with " + bs_old);

        auto rec = std::make_shared<HandoverRecord>();
        rec->requested = mode;
        rec->performed = mode;
        const bool soft_ok = topo_.repeater_adjacent(bs_old, bs_new) && topo_.has_quantum_link(bs_old, bs_new);
        if (mode == HandoverMode::Soft && !soft_ok) {
            rec->performed = HandoverMode::Hard;
            sim_.record(que, "warning", {{"what", "soft handover infeasible, falling back to hard"},
                                        {"from", bs_old}, {"to", bs_new}});
        }
        sim_.record(que, "handover-start", {{"from", bs_old}, {"to", bs_new}, {"mode", to_string(rec->performed)}});
        if (rec->performed == HandoverMode::Soft) {
            soft_handover(que, bs_old, bs_new, *old, rec, std::move(done), max_latency);
        } else {
            hard_handover(que, bs_old, bs_new, *old, rec, std::move(done), max_latency);
        }
    }

    // ---- distribution policies -----------------------------------------------------

    /// Keeps `spec.target` fresh pairs between que and peer, refreshing every interval and
    /// waiting for the next pass window when the peer is an orbiting station out of view.
    void enable_proactive(BufferSpec spec) {
        if (spec.target < 1) throw ConfigError("proactive buffer: target must be at least 1");
        if (!(spec.refresh_interval > 0.0)) throw ConfigError("proactive buffer: refresh interval must be positive");
        auto b = std::make_shared<Buffer>();
        b->spec = std::move(spec);
        buffers_.push_back(b);
        sim_.after(0.0, EventKind::DecoherenceCheck, b->spec.que, [this, b] { maintain(b); });
    }

    /// Obtains `count` usable pairs between que and peer, first from any proactive buffer,
    /// then by running a store session for the remainder.
    void acquire(const NodeId& que, const NodeId& peer, int count, double max_latency, double min_fidelity,
                 std::function<void(const AcquireResult&)> done) {
        auto res = std::make_shared<AcquireResult>();
        const double started = sim_.now();
        for (auto id : usable_pairs(que, peer, min_fidelity)) {
            if (static_cast<int>(res->pairs.size()) == count) break;
            reserved_.insert(id);
            res->pairs.push_back(id);
        }
        res->from_buffer = static_cast<int>(res->pairs.size());
        if (static_cast<int>(res->pairs.size()) == count) {
            res->ok = true;
            done(*res);
            return;
        }
        const int missing = count - static_cast<int>(res->pairs.size());
        ensure_connected(que, [=, this](bool ok) {
            if (!ok) {
                release_reservations(res->pairs);
                res->latency = sim_.now() - started;
                done(*res);
                return;
            }
            EntanglementRequest req{que, peer, SliceType::GenerateAndStore, missing, max_latency, min_fidelity, 0, "acquire"};
            start_session(req, {}, [=, this](const SessionResult& r) {
                for (auto id : r.delivered) {
                    if (ledger_.at(id).fate == Fate::Live) {
                        reserved_.insert(id);
                        res->pairs.push_back(id);
                    }
                }
                res->ok = static_cast<int>(res->pairs.size()) == count;
                res->latency = sim_.now() - started;
                if (!res->ok) release_reservations(res->pairs);
                done(*res);
            });
        });
    }

    void release_reservations(const std::vector<ResourceId>& ids) {
        for (auto id : ids) reserved_.erase(id);
    }

    std::vector<ResourceId> usable_pairs(const NodeId& a, const NodeId& b, double min_fidelity) const {
        std::vector<ResourceId> out;
        for (auto id : ledger_.live_held_by(a)) {
            const auto& e = ledger_.at(id);
            if (!e.pair.held_by(b) || e.pair.correction_pending() || reserved_.count(id)) continue;
            if (qcore::fidelity_of(e.pair.w_at(sim_.now(), e.t_coh)) >= min_fidelity) out.push_back(id);
        }
        return out;
    }

    /// Marks every live resource expired and writes run-level metrics.
    void finalize() {
        std::vector<ResourceId> live;
        for (const auto& [id, e] : ledger_.entries()) {
            if (e.fate == Fate::Live) live.push_back(id);
        }
        for (auto id : live) {
            const auto holder = ledger_.at(id).pair.holders().first;
            ledger_.settle(id, Fate::Expired, sim_.now(), "run-end");
            sim_.record(holder, "expire", {{"resource", to_string(id)}});
        }
        auto& m = sim_.metrics();
        m.set("pairs_expired", static_cast<double>(ledger_.count(Fate::Expired)), "count");
        const double elapsed = sim_.now();
        const double accepted = m.value_or("pairs_accepted", 0.0);
        m.set("entanglement_generation_rate", elapsed > 0.0 ? accepted / elapsed : 0.0, "pairs/s");
        const auto& fids = m.series("fidelity_at_consumption");
        if (!fids.empty()) {
            double s = 0.0;
            for (double f : fids) s += f;
            m.set("mean_fidelity_at_consumption", s / static_cast<double>(fids.size()), "1");
        }
    }

private:
    struct UserState {
        QueState state = QueState::Idle;
        double last_activity = 0.0;
        bool timer_armed = false;
        int sessions = 0;
        NodeId quantum_bs;  // set by handover
    };

    struct Segment {
        NodeId a;
        NodeId b;
        NodeId via;
        net::QuantumLinkSpec link;
    };

    struct SessionRun {
        EntanglementRequest req;
        PairSink sink;
        SessionDone done;
        double start = 0.0;
        double last_accept = 0.0;  // start of the current pair's delivery interval
        double deadline = 0.0;
        std::uint64_t serial = 0;
        bool admitted = false;
        bool finished = false;
        std::vector<Segment> segments;
        std::vector<NodeId> repeaters;
        SessionResult result;
        std::optional<ResourceId> distill_held;
    };

    struct Buffer {
        BufferSpec spec;
        bool filling = false;
    };

    UserState& user(const NodeId& ue) {
        auto it = users_.find(ue);
        if (it == users_.end()) throw LookupError(ue + " is not a user node");
        return it->second;
    }
    const UserState& user(const NodeId& ue) const {
        auto it = users_.find(ue);
        if (it == users_.end()) throw LookupError(ue + " is not a user node");
        return it->second;
    }

    static std::pair<int, int> swap_pair(std::pair<int, int> p) { return {p.second, p.first}; }

    void set_state(const NodeId& ue, QueState to) {
        auto& u = user(ue);
        if (u.state == to) return;
        if (!transition_allowed(u.state, to)) {
            throw SimulationError("state machine: illegal transition " + std::string(to_string(u.state)) + " -> " +
                                  to_string(to) + " for " + ue);
        }
        sim_.record(ue, "state", {{"from", to_string(u.state)}, {"to", to_string(to)}});
        u.state = to;
        if (to == QueState::Connected) {
            u.last_activity = sim_.now();
            arm_inactivity(ue);
        }
    }

    /// Entangled while holding live resources or running a session; Connected otherwise.
    void refresh_state(const NodeId& n) {
        auto it = users_.find(n);
        if (it == users_.end()) return;
        auto& u = it->second;
        const bool holding = !ledger_.live_held_by(n).empty();
        if (u.state == QueState::Entangled && !holding && u.sessions == 0) {
            set_state(n, QueState::Connected);
        } else if (u.state == QueState::Connected && holding) {
            set_state(n, QueState::Entangled);
        }
    }

    void touch_activity(const NodeId& n) {
        auto it = users_.find(n);
        if (it == users_.end()) return;
        it->second.last_activity = sim_.now();
    }

    void arm_inactivity(const NodeId& ue) {
        auto& u = user(ue);
        if (u.timer_armed) return;
        u.timer_armed = true;
        sim_.schedule(u.last_activity + cfg_.inactivity_timeout, EventKind::Timer, ue, [this, ue] {
            auto& s = user(ue);
            s.timer_armed = false;
            if (s.state != QueState::Connected) return;
            if (s.sessions == 0 && sim_.now() >= s.last_activity + cfg_.inactivity_timeout) {
                set_state(ue, QueState::Inactive);
            } else {
                if (s.sessions > 0) s.last_activity = sim_.now();
                arm_inactivity(ue);
            }
        });
    }

    void check_owners(const LedgerEntry& e, const char* op) const {
        for (const auto& h : {e.pair.holders().first, e.pair.holders().second}) {
            auto it = users_.find(h);
            if (it != users_.end() && it->second.state != QueState::Entangled) {
                throw PreconditionError(std::string(op) + ": owner " + h + " is " + to_string(it->second.state) +
                                        "; resources are usable only when Entangled");
            }
        }
    }

    void settle_consumed(ResourceId id, double fidelity, const std::string& purpose) {
        const auto holders = ledger_.at(id).pair.holders();
        auto owner_state = [this](const NodeId& n) {
            auto it = users_.find(n);
            return it == users_.end() ? std::string("-") : std::string(to_string(it->second.state));
        };
        sim_.record(holders.first, "consume",
                    {{"resource", to_string(id)}, {"holders", holders.first + "," + holders.second},
                     {"states", owner_state(holders.first) + "," + owner_state(holders.second)},
                     {"fidelity", format_number(fidelity)}, {"purpose", purpose}});
        ledger_.settle(id, Fate::Consumed, sim_.now(), purpose);
        reserved_.erase(id);
        sim_.metrics().add("pairs_consumed", 1);
        sim_.metrics().observe("fidelity_at_consumption", fidelity, "1");
        refresh_state(holders.first);
        refresh_state(holders.second);
    }

    std::vector<std::pair<NodeId, NodeId>> route(const NodeId& from, const NodeId& to) const {
        std::vector<std::pair<NodeId, NodeId>> hops;
        if (from == to) return hops;
        const NodeId bs_from = classical_serving(from);
        const NodeId bs_to = classical_serving(to);
        if (from != bs_from) hops.emplace_back(from, bs_from);
        if (bs_from != bs_to) hops.emplace_back(bs_from, bs_to);
        if (to != bs_to) hops.emplace_back(bs_to, to);
        return hops;
    }

    void send_hop(std::shared_ptr<std::vector<std::pair<NodeId, NodeId>>> hops, std::size_t i, double bits,
                  std::string purpose, NodeId from, NodeId to, Done done) {
        if (i == hops->size()) {
            sim_.record(from, "classical", {{"to", to}, {"bits", format_number(bits)}, {"purpose", purpose},
                                            {"delivered", "1"}});
            sim_.metrics().add("classical.messages", 1);
            touch_activity(to);
            done(true);
            return;
        }
        const auto& [a, b] = (*hops)[i];
        bool reachable = true;
        for (const auto& end : {a, b}) {
            const auto& spec = topo_.node(end);
            if (net::is_user(spec.kind)) {
                reachable = reachable && topo_.in_classical_coverage(end, classical_serving(end), sim_.now());
            } else {
                reachable = reachable && spec.mobility.active(sim_.now());
            }
        }
        if (!reachable) {
            fail_message(from, to, bits, purpose, "no-coverage", 0);
            sim_.after(0.0, EventKind::MessageDelivery, b, [done] { done(false); });
            return;
        }
        const auto& link = topo_.classical_link(a, b);
        const auto sent = net::send_with_retries(link, bits, cfg_.retry_cap, sim_.stream(a, "classical"));
        sim_.metrics().add("classical.transmissions", sent.attempts);
        sim_.after(sent.latency, EventKind::MessageDelivery, b,
                   [=, this] {
                       if (!sent.delivered) {
                           fail_message(from, to, bits, purpose, "retries-exhausted", sent.attempts);
                           done(false);
                           return;
                       }
                       send_hop(hops, i + 1, bits, purpose, from, to, done);
                   });
    }

    void fail_message(const NodeId& from, const NodeId& to, double bits, const std::string& purpose,
                      const std::string& reason, int attempts) {
        sim_.record(from, "classical", {{"to", to}, {"bits", format_number(bits)}, {"purpose", purpose},
                                        {"delivered", "0"}, {"reason", reason},
                                        {"attempts", std::to_string(attempts)}});
        sim_.metrics().add("classical.lost_messages", 1);
    }

    /// k alternating messages ue -> bs -> ue ...; fails on the first undeliverable one.
    void exchange(const NodeId& ue, const NodeId& bs, int k, int total, const std::string& purpose,
                  double started, std::function<void(bool, double)> done) {
        if (k == 0) {
            done(true, started);
            return;
        }
        const bool uplink = (total - k) % 2 == 0;
        const NodeId from = uplink ? ue : bs;
        const NodeId to = uplink ? bs : ue;
        send(from, to, cfg_.sizes.registration, purpose, [=, this](bool ok) {
            if (!ok) {
                done(false, started);
                return;
            }
            exchange(ue, bs, k - 1, total, purpose, started, done);
        });
    }

    std::vector<NodeId> parties(const SessionRun& run) const { return {run.req.requester, run.req.peer}; }

    std::optional<std::string> admission_failure(SessionRun& run) {
        const auto& r = run.req;
        if (!topo_.has_node(r.requester) || !topo_.has_node(r.peer)) return "unknown-node";
        if (r.requester == r.peer) return "same-endpoints";
        for (const auto& p : parties(run)) {
            const auto& spec = topo_.node(p);
            if (!net::is_quantum_capable(spec.kind)) return "not-quantum-capable:" + p;
            if (!net::is_user(spec.kind)) continue;
            const auto st = user(p).state;
            if (st != QueState::Connected && st != QueState::Entangled) return "not-connected:" + p;
            if (!topo_.in_quantum_coverage(p, quantum_serving(p), sim_.now())) return "no-quantum-coverage:" + p;
            if (r.slice == SliceType::GenerateAndStore) {
                const auto held = static_cast<int>(ledger_.live_held_by(p).size());
                if (held + r.count > spec.memory_slots) return "memory-full:" + p;
            }
        }
        if (!plan_route(run)) return "no-route";
        return std::nullopt;
    }

    bool plan_route(SessionRun& run) {
        const NodeId& a = run.req.requester;
        const NodeId& b = run.req.peer;
        const bool a_user = net::is_user(topo_.node(a).kind);
        const bool b_user = net::is_user(topo_.node(b).kind);
        const NodeId bs_a = quantum_serving(a);
        const NodeId bs_b = quantum_serving(b);
        const auto path = topo_.repeater_path(bs_a, bs_b);
        if (path.empty()) return false;
        try {
            if (a_user && b_user && path.size() == 1) {
                run.segments.push_back({a, b, bs_a, net::combine_links(topo_.quantum_link(bs_a, a),
                                                                        topo_.quantum_link(bs_a, b))});
                return true;
            }
            if (a_user) run.segments.push_back({a, bs_a, bs_a, topo_.quantum_link(bs_a, a)});
            for (std::size_t i = 0; i + 1 < path.size(); ++i) {
                run.segments.push_back({path[i], path[i + 1], path[i], topo_.quantum_link(path[i], path[i + 1])});
            }
            if (b_user) run.segments.push_back({bs_b, b, bs_b, topo_.quantum_link(bs_b, b)});
        } catch (const LookupError&) {
            return false;
        }
        for (std::size_t i = 0; i + 1 < run.segments.size(); ++i) run.repeaters.push_back(run.segments[i].b);
        return !run.segments.empty();
    }

    /// Samples, attempt by attempt, when segment s next succeeds; nullopt if not before the
    /// deadline. Attempts at instants where a holder is out of reach do not run.
    std::optional<double> next_success(SessionRun& run, const Segment& s) {
        auto& rng = sim_.stream(s.via, "qlink:" + s.a + "-" + s.b);
        double t = sim_.now();
        while (true) {
            t += s.link.attempt_period;
            if (t > run.deadline) return std::nullopt;
            if (!topo_.segment_available(s.a, s.b, s.via, t, s.link.requires_los)) continue;
            ++run.result.attempts;
            if (rng.bernoulli(s.link.q_attempt)) return t;
        }
    }

    void produce_next(std::shared_ptr<SessionRun> run) {
        if (run->finished) return;
        std::vector<double> when;
        for (const auto& s : run->segments) {
            auto t = next_success(*run, s);
            if (!t) {
                sim_.schedule(run->deadline, EventKind::Timer, run->req.requester,
                              [this, run] { finish_partial(run, "deadline"); });
                return;
            }
            when.push_back(*t);
        }
        auto made = std::make_shared<std::vector<std::optional<ResourceId>>>(run->segments.size());
        auto remaining = std::make_shared<std::size_t>(run->segments.size());
        for (std::size_t i = 0; i < run->segments.size(); ++i) {
            sim_.schedule(when[i], EventKind::EntanglementAttempt, run->segments[i].via,
                          [this, run, made, remaining, i] {
                              (*made)[i] = create_segment_pair(run->segments[i]);
                              if (--*remaining == 0) assemble(run, made);
                          });
        }
    }

    ResourceId create_segment_pair(const Segment& s) {
        const double t = sim_.now();
        // success was already drawn by next_success at an instant where the segment was reachable
        if (!topo_.segment_available(s.a, s.b, s.via, t, s.link.requires_los)) {
            throw SimulationError("pair creation outside coverage for " + s.a + "-" + s.b);
        }
        std::optional<qcore::WernerPair> pair;
        pair.emplace(ids_.next(), s.a, s.b, s.link.w0, t);
        const ResourceId id = pair->id();
        std::map<NodeId, QubitClock> qubits;
        for (const auto& h : {s.a, s.b}) {
            qubits[h] = {t, qcore::survival_time(s.link.w0, topo_.node(h).t_coh, cfg_.f_min)};
        }
        ledger_.add(std::move(*pair), topo_.pair_t_coh(s.a, s.b), std::move(qubits));
        sim_.metrics().add("pairs_created", 1);
        sim_.record(s.via, "pair-created", {{"resource", to_string(id)}, {"a", s.a}, {"b", s.b},
                                            {"w", format_number(s.link.w0)}});
        return id;
    }

    void assemble(std::shared_ptr<SessionRun> run, std::shared_ptr<std::vector<std::optional<ResourceId>>> made) {
        if (run->finished) {
            for (auto& id : *made) {
                if (id && ledger_.at(*id).fate == Fate::Live) discard(*id, "session-closed");
            }
            return;
        }
        ResourceId cur = *(*made)[0];
        for (std::size_t k = 0; k < run->repeaters.size(); ++k) {
            const NodeId& rep = run->repeaters[k];
            const ResourceId next = *(*made)[k + 1];
            auto& e1 = ledger_.live(cur, "swap");
            auto& e2 = ledger_.live(next, "swap");
            auto swapped = entanglement_swap(e1.pair, e2.pair, rep, ids_, sim_.stream(rep, "swap"), sim_.now(),
                                             e1.t_coh, e2.t_coh);
            std::map<NodeId, QubitClock> qubits;
            const NodeId far_a = swapped.pair.holders().first;
            const NodeId far_c = swapped.pair.holders().second;
            qubits[far_a] = e1.qubits.at(far_a);
            qubits[far_c] = e2.qubits.at(far_c);
            const ResourceId out = swapped.pair.id();
            const double t_coh = topo_.pair_t_coh(far_a, far_c);
            ledger_.settle(cur, Fate::Consumed, sim_.now(), "swap");
            ledger_.settle(next, Fate::Consumed, sim_.now(), "swap");
            ledger_.add(std::move(swapped.pair), t_coh, std::move(qubits));
            sim_.record(rep, "swap", {{"in", to_string(cur) + "," + to_string(next)}, {"out", to_string(out)},
                                      {"w", format_number(ledger_.at(out).pair.w())}});
            sim_.metrics().add("swaps", 1);
            cur = out;
        }
        if (run->repeaters.empty()) {
            usable(run, cur);
            return;
        }
        // every repeater's Bell outcome must reach the far end before the pair is usable
        auto pending = std::make_shared<std::size_t>(run->repeaters.size());
        auto lost = std::make_shared<bool>(false);
        const NodeId far = run->req.peer;
        for (const auto& rep : run->repeaters) {
            send(rep, far, cfg_.sizes.correction, "swap-correction", [this, run, cur, pending, lost](bool ok) {
                if (!ok) *lost = true;
                if (--*pending != 0) return;
                if (*lost) {
                    discard(cur, "correction-lost");
                    ++run->result.discarded;
                    produce_next(run);
                    return;
                }
                usable(run, cur);
            });
        }
    }

    void usable(std::shared_ptr<SessionRun> run, ResourceId id) {
        if (run->finished) {
            if (ledger_.at(id).fate == Fate::Live) discard(id, "session-closed");
            return;
        }
        auto& e = ledger_.live(id, "usable");
        if (e.pair.correction_pending()) e.pair.apply_correction();
        const auto& r = run->req;

        if (r.slice == SliceType::GenerateAndMeasure) {
            // The requester receives no correction, so it measures as soon as its qubit lands;
            // the far end must hold its qubit until the corrections arrive.
            bool decohered = false;
            for (const auto& [h, clock] : e.qubits) {
                const double t_use = (h == r.requester || run->repeaters.empty()) ? clock.arrival : sim_.now();
                decohered = qubit_decohered(id, h, t_use) || decohered;
            }
            if (decohered) {
                reject_pair(run, id, "decohered");
                return;
            }
        }
        if (fidelity_now(id) < r.min_fidelity) {
            reject_pair(run, id, "below-threshold");
            return;
        }
        if (cfg_.distillation.enabled) {
            if (!run->distill_held) {
                run->distill_held = id;
                produce_next(run);
                return;
            }
            const ResourceId first = *run->distill_held;
            run->distill_held.reset();
            distill(run, first, id);
            return;
        }
        accept(run, id);
    }

    void distill(std::shared_ptr<SessionRun> run, ResourceId p1, ResourceId p2) {
        auto& e1 = ledger_.live(p1, "distill");
        auto& e2 = ledger_.live(p2, "distill");
        const double w = std::min(e1.pair.w_at(sim_.now(), e1.t_coh), e2.pair.w_at(sim_.now(), e2.t_coh));
        const double w_out = std::min(1.0, cfg_.distillation.factor * w);
        const auto holders = e1.pair.holders();
        auto qubits = e1.qubits;
        const double t_coh = e1.t_coh;
        ledger_.settle(p1, Fate::Consumed, sim_.now(), "distill");
        ledger_.settle(p2, Fate::Consumed, sim_.now(), "distill");
        sim_.after(cfg_.distillation.delay, EventKind::AppStep, holders.first,
                   [this, run, holders, qubits, t_coh, w_out, p1, p2]() mutable {
                       qcore::WernerPair out(ids_.next(), holders.first, holders.second, w_out, sim_.now());
                       const ResourceId id = out.id();
                       ledger_.add(std::move(out), t_coh, std::move(qubits));
                       sim_.record(holders.first, "distill", {{"in", to_string(p1) + "," + to_string(p2)},
                                                              {"out", to_string(id)}, {"w", format_number(w_out)}});
                       if (run->finished) {
                           discard(id, "session-closed");
                           return;
                       }
                       accept(run, id);
                   });
    }

    void reject_pair(std::shared_ptr<SessionRun> run, ResourceId id, const std::string& reason) {
        discard(id, reason);
        ++run->result.discarded;
        produce_next(run);
    }

    void accept(std::shared_ptr<SessionRun> run, ResourceId id) {
        auto& r = run->req;
        run->result.delivered.push_back(id);
        sim_.metrics().add("pairs_accepted", 1);
        sim_.metrics().observe("pair_delivery_latency", sim_.now() - run->last_accept, "s");
        run->last_accept = sim_.now();
        refresh_state(r.requester);
        refresh_state(r.peer);
        if (r.slice == SliceType::GenerateAndMeasure && run->sink) run->sink(id);
        if (accepted(*run) >= r.count) {
            send_ack(run);
        } else {
            produce_next(run);
        }
    }

    int accepted(const SessionRun& run) const { return static_cast<int>(run.result.delivered.size()); }

    void send_ack(std::shared_ptr<SessionRun> run) {
        send(run->req.requester, quantum_serving(run->req.requester), cfg_.sizes.ack, "session-ack",
             [this, run](bool ok) {
                 if (run->finished) return;
                 if (!ok) {
                     finish_partial(run, "ack-undeliverable");
                     return;
                 }
                 if (run->req.slice == SliceType::GenerateAndStore) {
                     auto& d = run->result.delivered;
                     std::vector<ResourceId> keep;
                     for (auto id : d) {
                         if (ledger_.at(id).fate != Fate::Live) continue;
                         if (fidelity_now(id) < run->req.min_fidelity) {
                             discard(id, "below-threshold-at-ack");
                             ++run->result.discarded;
                         } else {
                             keep.push_back(id);
                         }
                     }
                     d = std::move(keep);
                     if (accepted(*run) < run->req.count) {
                         if (sim_.now() < run->deadline) {
                             produce_next(run);
                         } else {
                             finish_partial(run, "deadline");
                         }
                         return;
                     }
                 }
                 const double elapsed = sim_.now() - run->start;
                 finish(run, elapsed <= run->req.max_latency ? SessionOutcome::Fulfilled
                                                             : SessionOutcome::PartiallyFulfilled,
                        elapsed <= run->req.max_latency ? "" : "late-ack");
             });
    }

    void finish_partial(std::shared_ptr<SessionRun> run, const std::string& reason) {
        if (run->finished) return;
        finish(run, accepted(*run) > 0 ? SessionOutcome::PartiallyFulfilled : SessionOutcome::Expired, reason);
    }

    void finish(std::shared_ptr<SessionRun> run, SessionOutcome outcome, const std::string& reason) {
        if (run->finished) return;
        run->finished = true;
        if (run->distill_held && ledger_.at(*run->distill_held).fate == Fate::Live) {
            discard(*run->distill_held, "session-closed");
        }
        auto& res = run->result;
        res.outcome = outcome;
        res.reason = reason;
        res.elapsed = sim_.now() - run->start;
        if (run->admitted) {
            for (const auto& p : parties(*run)) {
                if (users_.count(p)) --user(p).sessions;
            }
        }
        for (const auto& p : parties(*run)) {
            if (topo_.has_node(p)) refresh_state(p);
        }
        sim_.metrics().add(std::string("session.") + to_string(outcome), 1);
        if (outcome != SessionOutcome::Rejected) sim_.metrics().observe("session.latency", res.elapsed, "s");
        Details d{{"session", std::to_string(run->serial)}, {"outcome", to_string(outcome)},
                  {"delivered", std::to_string(res.delivered.size())}, {"elapsed", format_number(res.elapsed)},
                  {"attempts", std::to_string(res.attempts)}};
        if (!reason.empty()) d.emplace_back("reason", reason);
        sim_.record(run->req.requester, "session-end", std::move(d));
        if (run->done) run->done(res);
    }

    void soft_handover(const NodeId& que, const NodeId& bs_old, const NodeId& bs_new, ResourceId old,
                       std::shared_ptr<HandoverRecord> rec, std::function<void(const HandoverRecord&)> done,
                       double max_latency) {
        auto bridge = std::make_shared<SessionRun>();
        bridge->start = sim_.now();
        bridge->deadline = sim_.now() + max_latency;
        Segment seg{bs_old, bs_new, bs_old, topo_.quantum_link(bs_old, bs_new)};
        auto t = next_success(*bridge, seg);
        if (!t) {
            rec->ok = false;
            rec->reason = "bridge-timeout";
            sim_.schedule(bridge->deadline, EventKind::Timer, que, [rec, done] { done(*rec); });
            return;
        }
        sim_.schedule(*t, EventKind::EntanglementAttempt, bs_old, [=, this] {
            const ResourceId b = create_segment_pair(seg);
            auto& e_old = ledger_.live(old, "handover");
            auto& e_b = ledger_.live(b, "handover");
            auto swapped = entanglement_swap(e_old.pair, e_b.pair, bs_old, ids_, sim_.stream(bs_old, "swap"),
                                             sim_.now(), e_old.t_coh, e_b.t_coh);
            std::map<NodeId, QubitClock> qubits{{que, e_old.qubits.at(que)}, {bs_new, e_b.qubits.at(bs_new)}};
            const ResourceId out = swapped.pair.id();
            ledger_.settle(old, Fate::Consumed, sim_.now(), "handover-swap");
            ledger_.settle(b, Fate::Consumed, sim_.now(), "handover-swap");
            ledger_.add(std::move(swapped.pair), topo_.pair_t_coh(que, bs_new), std::move(qubits));
            sim_.record(bs_old, "swap", {{"in", to_string(old) + "," + to_string(b)}, {"out", to_string(out)},
                                         {"w", format_number(ledger_.at(out).pair.w())}});
            send(bs_old, bs_new, cfg_.sizes.correction, "swap-correction", [=, this](bool ok) {
                if (!ok) {
                    discard(out, "correction-lost");
                    rec->ok = false;
                    rec->reason = "correction-lost";
                    done(*rec);
                    return;
                }
                ledger_.live(out, "handover").pair.apply_correction();
                user(que).quantum_bs = bs_new;
                rec->ok = true;
                rec->pair = out;
                rec->w_out = ledger_.at(out).pair.w_at(sim_.now(), ledger_.at(out).t_coh);
                rec->downtime = 0.0;
                sim_.record(que, "handover-end", {{"mode", "Soft"}, {"resource", to_string(out)},
                                                  {"downtime", "0"}});
                done(*rec);
            });
        });
    }

    void hard_handover(const NodeId& que, const NodeId& bs_old, const NodeId& bs_new, ResourceId old,
                       std::shared_ptr<HandoverRecord> rec, std::function<void(const HandoverRecord&)> done,
                       double max_latency) {
        discard(old, "handover-release");
        user(que).quantum_bs = bs_new;
        const double gap_start = sim_.now();
        ensure_connected(que, [=, this](bool ok) {
            if (!ok) {
                rec->ok = false;
                rec->reason = "not-connected";
                done(*rec);
                return;
            }
            EntanglementRequest req{que, bs_new, SliceType::GenerateAndStore, 1, max_latency, cfg_.f_min, 0, "handover"};
            start_session(req, {}, [=, this](const SessionResult& r) {
                rec->downtime = sim_.now() - gap_start;
                rec->ok = r.outcome == SessionOutcome::Fulfilled;
                if (rec->ok) {
                    rec->pair = r.delivered.front();
                    const auto& e = ledger_.at(*rec->pair);
                    rec->w_out = e.pair.w_at(sim_.now(), e.t_coh);
                } else {
                    rec->reason = std::string("session-") + to_string(r.outcome);
                }
                (void)bs_old;
                sim_.record(que, "handover-end", {{"mode", "Hard"}, {"downtime", format_number(rec->downtime)}});
                done(*rec);
            });
        });
    }

    void maintain(std::shared_ptr<Buffer> b) {
        const auto& s = b->spec;
        const auto& peer = topo_.node(s.peer);
        if (const auto* orbit = peer.mobility.orbit_pass(); orbit && !peer.mobility.active(sim_.now())) {
            const double next = net::orbit_next_window(*orbit, sim_.now()).start;
            sim_.schedule(next, EventKind::DecoherenceCheck, s.que, [this, b] { maintain(b); });
            return;
        }
        for (auto id : ledger_.live_held_by(s.que)) {
            const auto& e = ledger_.at(id);
            if (!e.pair.held_by(s.peer) || reserved_.count(id)) continue;
            if (fidelity_now(id) < s.min_fidelity) discard(id, "buffer-refresh");
        }
        const int have = static_cast<int>(usable_pairs(s.que, s.peer, s.min_fidelity).size());
        sim_.after(s.refresh_interval, EventKind::DecoherenceCheck, s.que, [this, b] { maintain(b); });
        if (b->filling || have >= s.target) return;
        if (!topo_.in_quantum_coverage(s.que, quantum_serving(s.que), sim_.now())) return;
        b->filling = true;
        const int need = s.target - have;
        ensure_connected(s.que, [this, b, need](bool ok) {
            if (!ok) {
                b->filling = false;
                return;
            }
            const auto& spec = b->spec;
            EntanglementRequest req{spec.que, spec.peer, SliceType::GenerateAndStore, need, spec.max_latency,
                                    spec.min_fidelity, 0, "proactive"};
            start_session(req, {}, [b](const SessionResult&) { b->filling = false; });
        });
    }

    Simulator& sim_;
    const net::Topology& topo_;
    ProtocolConfig cfg_;
    ResourceLedger ledger_;
    IdAllocator ids_;
    std::map<NodeId, UserState> users_;
    std::set<ResourceId> reserved_;
    std::vector<std::shared_ptr<Buffer>> buffers_;
    std::uint64_t session_serial_ = 0;
};

}  // namespace oneq::protocol
