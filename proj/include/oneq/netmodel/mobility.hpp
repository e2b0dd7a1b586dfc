#pragma once

#include <oneq/errors.hpp>

#include <cmath>
#include <variant>
#include <vector>

namespace oneq::net {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

inline double distance(const Vec3& a, const Vec3& b) {
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

struct Waypoint {
    double t;
    Vec3 position;
};

/// Repeating coverage window of an orbiting node: [start + kP, start + kP + duration).
struct OrbitPass {
    double pass_start;
    double pass_duration;
    double period;

    void validate() const {
        if (!(period > 0.0)) throw ConfigError("orbit: period must be positive");
        if (!(pass_duration > 0.0 && pass_duration < period)) {
            throw ConfigError("orbit: pass duration must be positive and shorter than the period");
        }
    }
};

struct PassWindow {
    double start;
    double end;
};

/// Earliest pass window whose end lies strictly after t. A window includes its start.
inline PassWindow orbit_next_window(const OrbitPass& orbit, double t) {
    orbit.validate();
    const double k = std::floor((t - orbit.pass_start - orbit.pass_duration) / orbit.period) + 1.0;
    const double start = orbit.pass_start + k * orbit.period;
    return {start, start + orbit.pass_duration};
}

inline bool orbit_in_pass(const OrbitPass& orbit, double t) {
    const auto w = orbit_next_window(orbit, t);
    return w.start <= t && t < w.end;
}

struct Static {};

class MobilityModel {
public:
    MobilityModel() = default;
    static MobilityModel fixed() { return MobilityModel{}; }

    static MobilityModel waypoints(std::vector<Waypoint> points) {
        if (points.empty()) throw ConfigError("waypoint mobility needs at least one point");
        for (std::size_t i = 1; i < points.size(); ++i) {
            if (!(points[i].t > points[i - 1].t)) {
                throw ConfigError("waypoint times must be strictly increasing");
            }
        }
        MobilityModel m;
        m.model_ = std::move(points);
        return m;
    }

    static MobilityModel orbit(OrbitPass pass) {
        pass.validate();
        MobilityModel m;
        m.model_ = pass;
        return m;
    }

    bool is_orbit() const { return std::holds_alternative<OrbitPass>(model_); }
    const OrbitPass* orbit_pass() const { return std::get_if<OrbitPass>(&model_); }
    const std::vector<Waypoint>* waypoint_list() const { return std::get_if<std::vector<Waypoint>>(&model_); }

    /// Waypoints interpolate linearly and hold their end points. Static and orbiting nodes
    /// stay at `base` (for an orbit, the centre of its ground footprint).
    Vec3 position(double t, const Vec3& base) const {
        const auto* pts = waypoint_list();
        if (!pts) return base;
        if (t <= pts->front().t) return pts->front().position;
        if (t >= pts->back().t) return pts->back().position;
        for (std::size_t i = 1; i < pts->size(); ++i) {
            const auto& b = (*pts)[i];
            if (t <= b.t) {
                const auto& a = (*pts)[i - 1];
                const double f = (t - a.t) / (b.t - a.t);
                return {a.position.x + f * (b.position.x - a.position.x),
                        a.position.y + f * (b.position.y - a.position.y),
                        a.position.z + f * (b.position.z - a.position.z)};
            }
        }
        return pts->back().position;
    }

    /// False only for an orbiting node outside its pass.
    bool active(double t) const {
        const auto* o = orbit_pass();
        return !o || orbit_in_pass(*o, t);
    }

private:
    std::variant<Static, std::vector<Waypoint>, OrbitPass> model_{Static{}};
};

}  // namespace oneq::net
