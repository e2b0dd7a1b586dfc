#pragma once

// Digital vs. quantum time budgets: joint probability that a task finishes within its
// deadline while the resources it uses stay coherent.

#include <oneq/errors.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace oneq {

struct TimingBudget {
    double t_d;                       // digital deadline, seconds
    double f_min = 0.8;               // fidelity threshold defining the quantum budget
    double reliability_target = 0.99; // 1 - P_e

    void validate() const {
        if (!(t_d > 0.0)) throw ConfigError("TimingBudget: t_d must be positive");
        if (!(f_min > 0.25 && f_min <= 1.0)) throw ConfigError("TimingBudget: F_min must lie in (0.25, 1]");
        if (!(reliability_target > 0.0 && reliability_target <= 1.0)) {
            throw ConfigError("TimingBudget: reliability target must lie in (0, 1]");
        }
    }
};

struct TimingPoint {
    double t;
    double p_latency_within;  // empirical P(latency <= t)
    double survival;          // P(resource still coherent after t)
};

struct TimingEvaluation {
    double joint;           // P(latency <= t_d and coherent throughout use)
    double p_latency;       // P(latency <= t_d)
    double p_coherent;      // E[survival(latency)]
    bool meets_target;      // joint >= reliability_target
    std::vector<TimingPoint> curve;
};

using SurvivalFn = std::function<double(double)>;

/// Right-continuous survival of a sample of lifetimes: fraction with lifetime >= t.
inline SurvivalFn empirical_survival(std::vector<double> lifetimes) {
    std::sort(lifetimes.begin(), lifetimes.end());
    return [ls = std::move(lifetimes)](double t) {
        if (ls.empty()) return 0.0;
        const auto it = std::lower_bound(ls.begin(), ls.end(), t);
        return static_cast<double>(ls.end() - it) / static_cast<double>(ls.size());
    };
}

inline std::vector<double> default_timing_grid(std::span<const double> latencies, double t_d,
                                               std::size_t points = 64) {
    double hi = t_d;
    for (double l : latencies) hi = std::max(hi, l);
    if (!(hi > 0.0) || std::isinf(hi)) hi = 1.0;
    hi *= 1.25;
    std::vector<double> grid(points);
    for (std::size_t i = 0; i < points; ++i) {
        grid[i] = hi * static_cast<double>(i) / static_cast<double>(points - 1);
    }
    return grid;
}

/// Each sample i is a task that took latency L_i and held its resources for that long.
/// joint = mean_i 1[L_i <= t_d] * survival(L_i).
inline TimingEvaluation eval_timing(std::span<const double> latencies, const SurvivalFn& survival,
                                    const TimingBudget& budget, std::span<const double> grid = {}) {
    if (latencies.empty()) throw DomainError("eval_timing: no latency samples");
    if (!(budget.t_d > 0.0)) throw ConfigError("eval_timing: t_d must be positive");

    double joint = 0.0;
    double within = 0.0;
    double coherent = 0.0;
    for (double l : latencies) {
        const double s = std::clamp(survival(l), 0.0, 1.0);
        coherent += s;
        if (l <= budget.t_d) {
            within += 1.0;
            joint += s;
        }
    }
    const auto n = static_cast<double>(latencies.size());
    TimingEvaluation ev{joint / n, within / n, coherent / n, false, {}};
    ev.meets_target = ev.joint >= budget.reliability_target;

    std::vector<double> sorted(latencies.begin(), latencies.end());
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> owned;
    if (grid.empty()) {
        owned = default_timing_grid(latencies, std::isinf(budget.t_d) ? 0.0 : budget.t_d);
        grid = owned;
    }
    ev.curve.reserve(grid.size());
    for (double t : grid) {
        const auto k = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        ev.curve.push_back({t, static_cast<double>(k) / n, std::clamp(survival(t), 0.0, 1.0)});
    }
    return ev;
}

}  // namespace oneq
