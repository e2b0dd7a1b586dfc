#pragma once

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>
#include <oneq/ids.hpp>
#include <oneq/qcore/basis.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>

namespace oneq::qcore {

inline void check_werner(double w, const char* who) {
    if (!(w >= 0.0 && w <= 1.0)) {
        throw DomainError(std::string(who) + ": Werner parameter " + std::to_string(w) +
                          " outside [0, 1]");
    }
}

/// Overlap with |Phi+> of w|Phi+><Phi+| + (1-w) I/4.
inline double fidelity_of(double w) {
    check_werner(w, "fidelity_of");
    return (1.0 + 3.0 * w) / 4.0;
}

inline double werner_from_fidelity(double f) {
    if (!(f >= 0.25 && f <= 1.0)) {
        throw DomainError("werner_from_fidelity: fidelity " + std::to_string(f) + " outside [0.25, 1]");
    }
    return (4.0 * f - 1.0) / 3.0;
}

inline double decay(double w0, double dt, double t_coh) {
    check_werner(w0, "decay");
    if (!(t_coh > 0.0)) throw ConfigError("decay: coherence time must be positive");
    if (dt < 0.0) throw DomainError("decay: negative elapsed time");
    return w0 * std::exp(-dt / t_coh);
}

/// Time for fidelity_of(decay(w0, t, t_coh)) to fall to f_min. Zero when it is already
/// below; infinite when f_min is the maximally mixed floor.
inline double survival_time(double w0, double t_coh, double f_min) {
    check_werner(w0, "survival_time");
    if (!(t_coh > 0.0)) throw ConfigError("survival_time: coherence time must be positive");
    const double w_min = werner_from_fidelity(f_min);
    if (w_min <= 0.0) return std::numeric_limits<double>::infinity();
    if (w0 <= w_min) return 0.0;
    return t_coh * std::log(w0 / w_min);
}

/// Two-qubit Werner pair shared by two holders.
///
/// Move-only: a pair cannot be copied, and a moved-from pair reads as consumed.
/// `w` is stored as of `last_touched`; decay is applied lazily by touch().
class WernerPair {
public:
    WernerPair(ResourceId id, NodeId a, NodeId b, double w, double created_at)
        : id_(id), holders_{std::move(a), std::move(b)}, w_(w), created_at_(created_at),
          last_touched_(created_at) {
        check_werner(w, "WernerPair");
    }

    WernerPair(const WernerPair&) = delete;
    WernerPair& operator=(const WernerPair&) = delete;
    WernerPair(WernerPair&& other) noexcept { steal(other); }
    WernerPair& operator=(WernerPair&& other) noexcept {
        if (this != &other) steal(other);
        return *this;
    }
    ~WernerPair() = default;

    ResourceId id() const { return id_; }
    const std::pair<NodeId, NodeId>& holders() const { return holders_; }
    bool held_by(const NodeId& n) const { return holders_.first == n || holders_.second == n; }
    const NodeId& partner_of(const NodeId& n) const {
        if (holders_.first == n) return holders_.second;
        if (holders_.second == n) return holders_.first;
        throw ResourceError("pair " + to_string(id_) + " has no qubit at " + n);
    }
    double w() const { return w_; }
    double fidelity() const { return fidelity_of(w_); }
    double created_at() const { return created_at_; }
    double last_touched() const { return last_touched_; }
    bool consumed() const { return consumed_; }
    bool correction_pending() const { return correction_pending_; }

    /// Parameter this pair would have at time t (no mutation).
    double w_at(double t, double t_coh) const {
        return decay(w_, std::max(0.0, t - last_touched_), t_coh);
    }

    void touch(double t, double t_coh) {
        require_live("touch");
        if (t < last_touched_) throw DomainError("WernerPair::touch: time moves backwards");
        w_ = decay(w_, t - last_touched_, t_coh);
        last_touched_ = t;
    }

    /// Replaces w (distillation boost); does not change the clock.
    void set_w(double w) {
        require_live("set_w");
        check_werner(w, "WernerPair::set_w");
        w_ = w;
    }

    void mark_correction_pending() { correction_pending_ = true; }
    void apply_correction() {
        require_live("apply_correction");
        correction_pending_ = false;
    }

    /// Marks both qubits used. Throws if already consumed.
    void consume() {
        require_live("consume");
        consumed_ = true;
    }

    void require_live(const char* op) const {
        if (consumed_) {
            throw ResourceError(std::string(op) + ": pair " + to_string(id_) + " already consumed");
        }
    }

private:
    void steal(WernerPair& o) noexcept {
        id_ = o.id_;
        holders_ = std::move(o.holders_);
        w_ = o.w_;
        created_at_ = o.created_at_;
        last_touched_ = o.last_touched_;
        consumed_ = o.consumed_;
        correction_pending_ = o.correction_pending_;
        o.consumed_ = true;
    }

    ResourceId id_{};
    std::pair<NodeId, NodeId> holders_;
    double w_ = 0.0;
    double created_at_ = 0.0;
    double last_touched_ = 0.0;
    bool consumed_ = false;
    bool correction_pending_ = false;
};

/// Measures both qubits (Z or X each) and consumes the pair.
///
/// Sampling: with probability w the pair behaves as |Phi+> (perfectly correlated in Z and
/// in X), otherwise as I/4 (independent fair bits). Mixed bases give independent fair bits
/// for every w.
inline std::pair<int, int> measure_pair(WernerPair& pair, const MeasurementBasis& basis_a,
                                        const MeasurementBasis& basis_b, Rng& rng) {
    pair.require_live("measure_pair");
    if (pair.correction_pending()) {
        throw ResourceError("measure_pair: pair " + to_string(pair.id()) +
                            " awaits its classical correction");
    }
    if (!basis_a.is_pauli() || !basis_b.is_pauli()) {
        throw DomainError("measure_pair: bases must be Z or X");
    }
    pair.consume();
    const int a = rng.bit();
    if (basis_a.kind() != basis_b.kind()) return {a, rng.bit()};
    if (rng.bernoulli(pair.w())) return {a, a};
    return {a, rng.bit()};
}

}  // namespace oneq::qcore
