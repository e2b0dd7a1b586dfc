#pragma once

#include <cmath>
#include <numbers>
#include <string>

namespace oneq::qcore {

inline double wrap_angle(double theta) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double r = std::fmod(theta, two_pi);
    if (r < 0) r += two_pi;
    // fmod of a value just below 2*pi can round up to exactly 2*pi after the shift
    if (r >= two_pi) r = 0.0;
    return r;
}

/// Single-qubit projective basis: Z, X, or equatorial {|0> +- e^{i theta}|1>}.
class MeasurementBasis {
public:
    enum class Kind { Z, X, Equatorial };

    static MeasurementBasis z() { return MeasurementBasis{Kind::Z, 0.0}; }
    static MeasurementBasis x() { return MeasurementBasis{Kind::X, 0.0}; }
    static MeasurementBasis equatorial(double theta) {
        return MeasurementBasis{Kind::Equatorial, wrap_angle(theta)};
    }

    Kind kind() const { return kind_; }
    double angle() const { return angle_; }

    bool is_pauli() const { return kind_ != Kind::Equatorial; }

    std::string name() const {
        switch (kind_) {
            case Kind::Z: return "Z";
            case Kind::X: return "X";
            case Kind::Equatorial: return "E(" + std::to_string(angle_) + ")";
        }
        return "?";
    }

    friend bool operator==(const MeasurementBasis&, const MeasurementBasis&) = default;

private:
    MeasurementBasis(Kind k, double a) : kind_(k), angle_(a) {}

    Kind kind_;
    double angle_;
};

}  // namespace oneq::qcore
