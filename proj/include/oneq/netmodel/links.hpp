#pragma once

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>
#include <oneq/ids.hpp>
#include <oneq/netmodel/topology.hpp>
#include <oneq/qcore/werner.hpp>

#include <optional>

namespace oneq::net {

struct SendResult {
    bool delivered;
    double latency;  // seconds; paid whether or not the message arrives
};

/// One transmission attempt. Latency depends only on (link, size); loss is per message.
inline SendResult classical_send(const ClassicalLinkSpec& link, double size_bits, Rng& rng) {
    if (!(size_bits > 0.0)) throw DomainError("classical_send: message size must be positive");
    const double latency = size_bits / link.rate + link.prop_delay;
    const bool delivered = link.p_err_c <= 0.0 || !rng.bernoulli(link.p_err_c);
    return {delivered, latency};
}

/// Result of sending with retransmissions: up to 1 + retry_cap attempts back to back.
struct RetriedSend {
    bool delivered;
    int attempts;
    double latency;  // total time spent, including failed attempts
};

inline RetriedSend send_with_retries(const ClassicalLinkSpec& link, double size_bits, int retry_cap,
                                     Rng& rng) {
    if (retry_cap < 0) throw ConfigError("send_with_retries: negative retry cap");
    RetriedSend out{false, 0, 0.0};
    while (out.attempts <= retry_cap) {
        const auto r = classical_send(link, size_bits, rng);
        ++out.attempts;
        out.latency += r.latency;
        if (r.delivered) {
            out.delivered = true;
            break;
        }
    }
    return out;
}

/// One heralded generation attempt for holders (a, b), distributed by `via`.
///
/// Throws PreconditionError when a holder is outside coverage (or out of sight) at t; an
/// empty result is an ordinary probabilistic failure.
inline std::optional<qcore::WernerPair> attempt_pair(const Topology& topo, const QuantumLinkSpec& link,
                                                     const NodeId& a, const NodeId& b,
                                                     const NodeId& via, IdAllocator& ids, Rng& rng,
                                                     double t) {
    if (!topo.segment_available(a, b, via, t, link.requires_los)) {
        throw PreconditionError("attempt_pair: " + a + " and " + b + " are not both reachable from " +
                                via + " at t=" + std::to_string(t));
    }
    if (!rng.bernoulli(link.q_attempt)) return std::nullopt;
    return qcore::WernerPair(ids.next(), a, b, link.w0, t);
}

}  // namespace oneq::net
