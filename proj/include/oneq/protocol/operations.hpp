#pragma once

// Stateless resource operations: swapping, teleportation and direct transmission.

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>
#include <oneq/ids.hpp>
#include <oneq/netmodel/links.hpp>
#include <oneq/qcore/statevector.hpp>
#include <oneq/qcore/werner.hpp>

#include <optional>
#include <string>

namespace oneq::protocol {

using qcore::PureState;
using qcore::WernerPair;

struct SwapResult {
    WernerPair pair;
    int correction;  // two bits (x, z) packed as 2x + z; sent to one end point
};

/// Bell measurement at `repeater` on its halves of ab and bc. Both inputs are consumed; the
/// output joins the two far holders with w = w_ab * w_bc, each decayed to `now` first.
/// The output is unusable until the correction has been delivered.
inline SwapResult entanglement_swap(WernerPair& ab, WernerPair& bc, const NodeId& repeater,
                                    IdAllocator& ids, Rng& rng, double now, double t_coh_ab,
                                    double t_coh_bc) {
    ab.require_live("entanglement_swap");
    bc.require_live("entanglement_swap");
    if (!ab.held_by(repeater) || !bc.held_by(repeater)) {
        throw ResourceError("entanglement_swap: " + repeater + " lacks a qubit of " + to_string(ab.id()) +
                            " or " + to_string(bc.id()));
    }
    const NodeId a = ab.partner_of(repeater);
    const NodeId c = bc.partner_of(repeater);
    if (a == repeater || c == repeater) {
        throw ResourceError("entanglement_swap: " + repeater + " holds both qubits of a pair");
    }
    ab.touch(now, t_coh_ab);
    bc.touch(now, t_coh_bc);
    const double w = ab.w() * bc.w();
    ab.consume();
    bc.consume();
    WernerPair out(ids.next(), a, c, w, now);
    out.mark_correction_pending();
    return {std::move(out), static_cast<int>(rng.below(4))};
}

/// Bell index drawn from the Werner mixture: Phi+ w.p. w + (1-w)/4, each other (1-w)/4.
inline int sample_bell_index(double w, Rng& rng) {
    qcore::check_werner(w, "sample_bell_index");
    const double u = rng.uniform();
    const double rest = (1.0 - w) / 4.0;
    if (u < w + rest) return 0;
    if (u < w + 2.0 * rest) return 1;
    if (u < w + 3.0 * rest) return 2;
    return 3;
}

struct TeleportRecord {
    bool delivered = false;
    int attempts = 0;        // classical transmissions of the two-bit message
    double latency = 0.0;    // seconds spent on the classical message
    double quality = 0.0;    // fidelity of the received qubit to the payload (0 if lost)
    int m1 = 0;              // sender's outcome on the payload qubit (Z correction)
    int m2 = 0;              // sender's outcome on its pair half (X correction)
    std::optional<PureState> output;  // exact mode only
};

namespace detail {

inline void check_teleport_pair(WernerPair& pair, const NodeId& sender) {
    pair.require_live("teleport");
    if (pair.correction_pending()) {
        throw ResourceError("teleport: pair " + to_string(pair.id()) + " awaits its correction");
    }
    if (!pair.held_by(sender)) {
        throw ResourceError("teleport: " + sender + " holds no qubit of pair " + to_string(pair.id()));
    }
}

inline void deliver_bits(TeleportRecord& rec, const net::ClassicalLinkSpec& link, double bits,
                         int retry_cap, Rng& rng) {
    const auto sent = net::send_with_retries(link, bits, retry_cap, rng);
    rec.delivered = sent.delivered;
    rec.attempts = sent.attempts;
    rec.latency = sent.latency;
}

}  // namespace detail

/// Exact-mode teleportation of a one-qubit state over `pair`.
///
/// The Werner pair is realised as a Bell state sampled from its mixture, so w < 1 produces
/// the right output statistics on average. The payload is destroyed at the sender whatever
/// happens to the classical message.
inline TeleportRecord teleport(PureState& payload, WernerPair& pair, const NodeId& sender,
                               const net::ClassicalLinkSpec& link, int retry_cap, Rng& rng,
                               double now, double t_coh, double message_bits = 64.0) {
    if (payload.destroyed()) throw ResourceError("teleport: payload no longer exists");
    if (payload.n_qubits() != 1) throw DomainError("teleport: payload must be a single qubit");
    detail::check_teleport_pair(pair, sender);

    pair.touch(now, t_coh);
    const int bell = sample_bell_index(pair.w(), rng);
    pair.consume();

    const PureState original = payload;
    PureState s = payload.tensor(qcore::bell_state(bell));  // q0 payload, q1 sender, q2 receiver
    payload.destroy();
    qcore::apply(s, qcore::Gate::cnot(), {0, 1});
    qcore::apply(s, qcore::Gate::h(), {0});
    auto r1 = qcore::oracle_measure(s, 0, qcore::MeasurementBasis::z(), rng);
    auto r2 = qcore::oracle_measure(r1.post, 0, qcore::MeasurementBasis::z(), rng);

    TeleportRecord rec;
    rec.m1 = r1.bit;
    rec.m2 = r2.bit;
    detail::deliver_bits(rec, link, message_bits, retry_cap, rng);
    if (!rec.delivered) return rec;

    PureState out = std::move(r2.post);
    if (rec.m2) qcore::apply(out, qcore::Gate::x(), {0});
    if (rec.m1) qcore::apply(out, qcore::Gate::z(), {0});
    rec.quality = qcore::overlap_fidelity(original, out);
    rec.output = std::move(out);
    return rec;
}

enum class PayloadState { Held, Delivered, Lost };

/// Abstract single-qubit payload for the parameterised model.
struct QubitPayload {
    std::string label;
    PayloadState state = PayloadState::Held;
};

/// Parameterised teleportation: delivered quality is fidelity_of(w at use time).
inline TeleportRecord teleport(QubitPayload& payload, WernerPair& pair, const NodeId& sender,
                               const net::ClassicalLinkSpec& link, int retry_cap, Rng& rng,
                               double now, double t_coh, double message_bits = 64.0) {
    if (payload.state != PayloadState::Held) {
        throw ResourceError("teleport: payload " + payload.label + " is not held by the sender");
    }
    detail::check_teleport_pair(pair, sender);
    pair.touch(now, t_coh);
    const double quality = pair.fidelity();
    pair.consume();

    TeleportRecord rec;
    rec.m1 = rng.bit();
    rec.m2 = rng.bit();
    detail::deliver_bits(rec, link, message_bits, retry_cap, rng);
    payload.state = rec.delivered ? PayloadState::Delivered : PayloadState::Lost;
    if (rec.delivered) rec.quality = quality;
    return rec;
}

/// Sends the payload itself over the quantum channel. A loss destroys it for good: there
/// is nothing left to retransmit.
inline bool direct_transfer(QubitPayload& payload, const net::QuantumLinkSpec& link, Rng& rng) {
    if (payload.state == PayloadState::Lost) {
        throw ResourceError("direct_transfer: payload " + payload.label + " was permanently lost");
    }
    if (payload.state == PayloadState::Delivered) {
        throw ResourceError("direct_transfer: payload " + payload.label + " already delivered");
    }
    const bool ok = rng.bernoulli(link.q_attempt);
    payload.state = ok ? PayloadState::Delivered : PayloadState::Lost;
    return ok;
}

/// Coverage-checked form: both end points must be in reach of `via` at time t.
inline bool direct_transfer(QubitPayload& payload, const net::Topology& topo, const NodeId& from,
                            const NodeId& to, const NodeId& via, Rng& rng, double t) {
    const auto& link = topo.quantum_link(via, from == via ? to : from);
    if (!topo.segment_available(from, to, via, t, link.requires_los)) {
        throw PreconditionError("direct_transfer: " + from + " and " + to + " are not both covered by " + via);
    }
    return direct_transfer(payload, link, rng);
}

}  // namespace oneq::protocol
