#pragma once

#include <oneq/engine/rng.hpp>
#include <oneq/engine/trace.hpp>
#include <oneq/errors.hpp>

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace oneq {

enum class EventKind { MessageDelivery, EntanglementAttempt, DecoherenceCheck, Timer, AppStep };

inline const char* to_string(EventKind k) {
    switch (k) {
        case EventKind::MessageDelivery: return "message-delivery";
        case EventKind::EntanglementAttempt: return "entanglement-attempt";
        case EventKind::DecoherenceCheck: return "decoherence-check";
        case EventKind::Timer: return "timer";
        case EventKind::AppStep: return "app-step";
    }
    return "?";
}

struct Event {
    double time;
    std::uint64_t seq;
    EventKind kind;
    NodeId node;
    std::function<void()> action;
};

struct RunStats {
    double clock;
    std::uint64_t executed;
};

/// Single-threaded discrete-event kernel. Events run in (time, seq) order; seq is the
/// insertion counter, so equal-time events run in the order they were scheduled.
class Simulator {
public:
    explicit Simulator(std::uint64_t seed) : seed_(seed) {}

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    std::uint64_t seed() const { return seed_; }
    double now() const { return clock_; }
    std::size_t pending() const { return queue_.size(); }
    std::uint64_t executed() const { return executed_; }

    std::uint64_t schedule(double time, EventKind kind, NodeId node, std::function<void()> action) {
        if (!(time >= clock_)) {
            throw SimulationError("schedule: event at t=" + format_number(time) +
                                  " is before the clock t=" + format_number(clock_));
        }
        const std::uint64_t seq = next_seq_++;
        queue_.push_back(Event{time, seq, kind, std::move(node), std::move(action)});
        std::push_heap(queue_.begin(), queue_.end(), later);
        return seq;
    }

    std::uint64_t after(double delay, EventKind kind, NodeId node, std::function<void()> action) {
        if (delay < 0) throw SimulationError("after: negative delay");
        return schedule(clock_ + delay, kind, std::move(node), std::move(action));
    }

    /// Executes every event with time <= t_end, then parks the clock at t_end.
    RunStats run_until(double t_end) {
        if (t_end < clock_) throw SimulationError("run_until: horizon is before the clock");
        std::uint64_t ran = 0;
        while (!queue_.empty() && queue_.front().time <= t_end) {
            std::pop_heap(queue_.begin(), queue_.end(), later);
            Event ev = std::move(queue_.back());
            queue_.pop_back();
            clock_ = ev.time;
            ++executed_;
            ++ran;
            if (ev.action) ev.action();
        }
        clock_ = t_end;
        return {clock_, ran};
    }

    /// Persistent stream for (node, purpose); created on first use.
    Rng& stream(const NodeId& node, const std::string& purpose) {
        auto key = std::make_pair(node, purpose);
        auto it = streams_.find(key);
        if (it == streams_.end()) {
            it = streams_.emplace(std::move(key), Rng{derive_key(seed_, node, purpose)}).first;
        }
        return it->second;
    }

    /// Fresh copy of the stream for (node, purpose), positioned at its start.
    Rng rng_stream(const NodeId& node, const std::string& purpose) const {
        return Rng{derive_key(seed_, node, purpose)};
    }

    Trace& trace() { return trace_; }
    const Trace& trace() const { return trace_; }
    Metrics& metrics() { return metrics_; }
    const Metrics& metrics() const { return metrics_; }

    void record(const NodeId& node, std::string kind, Details details = {}) {
        trace_.append(TraceRecord{clock_, node, std::move(kind), std::move(details)});
    }

private:
    static bool later(const Event& a, const Event& b) {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }

    std::uint64_t seed_;
    double clock_ = 0.0;
    std::uint64_t next_seq_ = 0;
    std::uint64_t executed_ = 0;
    std::vector<Event> queue_;
    std::map<std::pair<NodeId, std::string>, Rng> streams_;
    Trace trace_;
    Metrics metrics_;
};

}  // namespace oneq
