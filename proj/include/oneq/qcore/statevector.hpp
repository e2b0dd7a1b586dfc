#pragma once

// Dense statevector oracle. Qubit q is bit q of the amplitude index.

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>
#include <oneq/qcore/basis.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oneq::qcore {

using Amplitude = std::complex<double>;

inline constexpr std::size_t kOracleMaxQubits = 16;
inline constexpr double kNormTolerance = 1e-9;

class PureState {
public:
    /// |0...0> on n qubits.
    explicit PureState(std::size_t n_qubits) : n_(n_qubits) {
        if (n_qubits > kOracleMaxQubits) {
            throw DomainError("PureState: " + std::to_string(n_qubits) + " qubits exceeds oracle cap " +
                              std::to_string(kOracleMaxQubits));
        }
        amps_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
        amps_[0] = 1.0;
    }

    static PureState from_amplitudes(std::vector<Amplitude> amps) {
        if (amps.empty() || (amps.size() & (amps.size() - 1)) != 0) {
            throw DomainError("PureState: amplitude count must be a power of two");
        }
        std::size_t n = 0;
        while ((std::size_t{1} << n) < amps.size()) ++n;
        PureState s(n);
        s.amps_ = std::move(amps);
        if (std::abs(s.norm() - 1.0) > kNormTolerance) {
            throw DomainError("PureState: amplitudes are not normalised");
        }
        return s;
    }

    /// alpha|0> + beta|1>, normalised on construction.
    static PureState qubit(Amplitude alpha, Amplitude beta) {
        const double n = std::sqrt(std::norm(alpha) + std::norm(beta));
        if (n == 0.0) throw DomainError("PureState::qubit: zero vector");
        return from_amplitudes({alpha / n, beta / n});
    }

    std::size_t n_qubits() const { return n_; }
    std::size_t dimension() const { return amps_.size(); }
    std::span<const Amplitude> amplitudes() const { return amps_; }
    std::span<Amplitude> amplitudes() { return amps_; }
    const Amplitude& operator[](std::size_t i) const { return amps_[i]; }

    double norm() const {
        double s = 0.0;
        for (const auto& a : amps_) s += std::norm(a);
        return std::sqrt(s);
    }

    /// True once the state has been handed off (teleported, transmitted, lost).
    bool destroyed() const { return amps_.empty(); }

    void destroy() {
        amps_.clear();
        amps_.shrink_to_fit();
        n_ = 0;
    }

    /// this (x) other; `other` occupies the higher qubit indices.
    PureState tensor(const PureState& other) const {
        PureState out(n_ + other.n_);
        for (std::size_t hi = 0; hi < other.amps_.size(); ++hi) {
            for (std::size_t lo = 0; lo < amps_.size(); ++lo) {
                out.amps_[lo | (hi << n_)] = amps_[lo] * other.amps_[hi];
            }
        }
        return out;
    }

private:
    std::size_t n_;
    std::vector<Amplitude> amps_;
};

enum class GateKind { H, X, Z, CNOT, Rz };

struct Gate {
    GateKind kind;
    double theta = 0.0;

    static Gate h() { return {GateKind::H}; }
    static Gate x() { return {GateKind::X}; }
    static Gate z() { return {GateKind::Z}; }
    static Gate cnot() { return {GateKind::CNOT}; }
    static Gate rz(double theta) { return {GateKind::Rz, theta}; }

    std::size_t arity() const { return kind == GateKind::CNOT ? 2 : 1; }
};

namespace detail {

inline void check_qubit(const PureState& s, std::size_t q) {
    if (s.destroyed()) throw ResourceError("oracle: state has been destroyed");
    if (q >= s.n_qubits()) {
        throw DomainError("oracle: qubit " + std::to_string(q) + " out of range for " +
                          std::to_string(s.n_qubits()) + "-qubit state");
    }
}

// [[u00 u01] [u10 u11]] on qubit q.
inline void apply_1q(PureState& s, std::size_t q, Amplitude u00, Amplitude u01, Amplitude u10,
                     Amplitude u11) {
    auto amps = s.amplitudes();
    const std::size_t step = std::size_t{1} << q;
    for (std::size_t base = 0; base < amps.size(); base += 2 * step) {
        for (std::size_t k = 0; k < step; ++k) {
            const std::size_t i0 = base + k;
            const std::size_t i1 = i0 + step;
            const Amplitude a0 = amps[i0];
            const Amplitude a1 = amps[i1];
            amps[i0] = u00 * a0 + u01 * a1;
            amps[i1] = u10 * a0 + u11 * a1;
        }
    }
}

// Rotation taking the basis' "0" vector to |0> and its "1" vector to |1>.
inline void rotate_to_z(PureState& s, std::size_t q, const MeasurementBasis& basis) {
    const double r = std::numbers::sqrt2 / 2.0;
    switch (basis.kind()) {
        case MeasurementBasis::Kind::Z: return;
        case MeasurementBasis::Kind::X: apply_1q(s, q, r, r, r, -r); return;
        case MeasurementBasis::Kind::Equatorial: {
            // <+-_theta| = (<0| +- e^{-i theta} <1|)/sqrt2
            const Amplitude ph = std::polar(1.0, -basis.angle());
            apply_1q(s, q, r, r * ph, r, -r * ph);
            return;
        }
    }
}

}  // namespace detail

/// Applies `gate` in place. Targets: one index, or (control, target) for CNOT.
inline void apply(PureState& state, const Gate& gate, std::span<const std::size_t> targets) {
    if (targets.size() != gate.arity()) {
        throw DomainError("oracle: gate expects " + std::to_string(gate.arity()) + " target(s)");
    }
    for (auto q : targets) detail::check_qubit(state, q);
    const double r = std::numbers::sqrt2 / 2.0;
    switch (gate.kind) {
        case GateKind::H: detail::apply_1q(state, targets[0], r, r, r, -r); break;
        case GateKind::X: detail::apply_1q(state, targets[0], 0.0, 1.0, 1.0, 0.0); break;
        case GateKind::Z: detail::apply_1q(state, targets[0], 1.0, 0.0, 0.0, -1.0); break;
        case GateKind::Rz:
            detail::apply_1q(state, targets[0], std::polar(1.0, -gate.theta / 2), 0.0, 0.0,
                             std::polar(1.0, gate.theta / 2));
            break;
        case GateKind::CNOT: {
            const std::size_t c = targets[0];
            const std::size_t t = targets[1];
            if (c == t) throw DomainError("oracle: CNOT control equals target");
            auto amps = state.amplitudes();
            const std::size_t cm = std::size_t{1} << c;
            const std::size_t tm = std::size_t{1} << t;
            for (std::size_t i = 0; i < amps.size(); ++i) {
                if ((i & cm) && !(i & tm)) std::swap(amps[i], amps[i | tm]);
            }
            break;
        }
    }
}

inline void apply(PureState& state, const Gate& gate, std::initializer_list<std::size_t> targets) {
    apply(state, gate, std::span<const std::size_t>(targets.begin(), targets.size()));
}

/// Value-semantics form: returns the transformed state.
inline PureState oracle_apply(PureState state, const Gate& gate,
                              std::initializer_list<std::size_t> targets) {
    apply(state, gate, targets);
    return state;
}

/// CZ as (I (x) H) CNOT (I (x) H).
inline void apply_cz(PureState& state, std::size_t a, std::size_t b) {
    apply(state, Gate::h(), {b});
    apply(state, Gate::cnot(), {a, b});
    apply(state, Gate::h(), {b});
}

struct Projection {
    double probability;
    PureState post;  // qubit removed; meaningless when probability == 0
};

/// Projects `qubit` onto outcome `bit` of `basis` and removes it.
inline Projection oracle_project(const PureState& state, std::size_t qubit,
                                 const MeasurementBasis& basis, int bit) {
    detail::check_qubit(state, qubit);
    PureState rotated = state;
    detail::rotate_to_z(rotated, qubit, basis);
    const auto amps = rotated.amplitudes();
    const std::size_t mask = std::size_t{1} << qubit;
    const std::size_t low = mask - 1;

    std::vector<Amplitude> kept(amps.size() / 2);
    double p = 0.0;
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const std::size_t i = (j & low) | ((j & ~low) << 1) | (bit ? mask : 0);
        kept[j] = amps[i];
        p += std::norm(amps[i]);
    }
    if (p > 0.0) {
        const double scale = 1.0 / std::sqrt(p);
        for (auto& a : kept) a *= scale;
    } else {
        kept.assign(kept.size(), Amplitude{0.0, 0.0});
        kept[0] = 1.0;
    }
    if (kept.size() == 1 && state.n_qubits() == 1) {
        // measuring the last qubit leaves the trivial 0-qubit state (amplitude 1)
        kept[0] = 1.0;
    }
    PureState out(state.n_qubits() - 1);
    std::copy(kept.begin(), kept.end(), out.amplitudes().begin());
    return {p, std::move(out)};
}

inline double probability_of(const PureState& state, std::size_t qubit,
                             const MeasurementBasis& basis, int bit) {
    return oracle_project(state, qubit, basis, bit).probability;
}

struct MeasureResult {
    int bit;
    PureState post;
};

/// Born-rule measurement of `qubit`; the returned state has that qubit removed.
inline MeasureResult oracle_measure(const PureState& state, std::size_t qubit,
                                    const MeasurementBasis& basis, Rng& rng) {
    auto zero = oracle_project(state, qubit, basis, 0);
    if (rng.uniform() < zero.probability) return {0, std::move(zero.post)};
    auto one = oracle_project(state, qubit, basis, 1);
    return {1, std::move(one.post)};
}

/// |<a|b>|^2 for states of equal size.
inline double overlap_fidelity(const PureState& a, const PureState& b) {
    if (a.dimension() != b.dimension()) throw DomainError("fidelity: dimension mismatch");
    Amplitude s{0.0, 0.0};
    for (std::size_t i = 0; i < a.dimension(); ++i) s += std::conj(a[i]) * b[i];
    return std::norm(s);
}

/// The four Bell states on qubits (0, 1), indexed as Phi+, Phi-, Psi+, Psi-.
inline PureState bell_state(int which) {
    const double r = std::numbers::sqrt2 / 2.0;
    std::vector<Amplitude> a(4, 0.0);
    switch (which) {
        case 0: a[0] = r; a[3] = r; break;
        case 1: a[0] = r; a[3] = -r; break;
        case 2: a[1] = r; a[2] = r; break;
        case 3: a[1] = r; a[2] = -r; break;
        default: throw DomainError("bell_state: index must be 0..3");
    }
    return PureState::from_amplitudes(std::move(a));
}

inline PureState phi_plus() { return bell_state(0); }

}  // namespace oneq::qcore
