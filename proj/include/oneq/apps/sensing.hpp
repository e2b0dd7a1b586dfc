#pragma once

// Distributed phase sensing with N probes. Separable probes reach the standard quantum
// limit; a shared GHZ probe read out by parity is the Heisenberg-scaling variant.

#include <oneq/engine/rng.hpp>
#include <oneq/errors.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace oneq::apps {

enum class Probe { Separable, Ghz };

inline const char* to_string(Probe p) { return p == Probe::Separable ? "Separable" : "GHZ"; }

struct SensingConfig {
    int n_sensors = 1;
    Probe probe = Probe::Separable;
    double true_phase = std::numbers::pi / 2.0;
    int shots = 1000;
    double t2 = 1.0;                  // seconds
    double interrogation_time = 0.0;  // seconds
    double reinit_delay = 0.0;        // per-shot re-initialisation, seconds (the T1 cost)
    double ghz_w = 1.0;               // GHZ dephasing-mixture parameter

    void validate() const {
        if (n_sensors < 1) throw ConfigError("sensing: n_sensors must be at least 1");
        if (shots < 1) throw ConfigError("sensing: shots must be at least 1");
        if (!(t2 > 0.0)) throw ConfigError("sensing: t2 must be positive");
        if (interrogation_time < 0.0 || reinit_delay < 0.0) throw ConfigError("sensing: negative durations");
        if (!(ghz_w >= 0.0 && ghz_w <= 1.0)) throw ConfigError("sensing: ghz_w must lie in [0, 1]");
    }

    double contrast() const {
        const double n = probe == Probe::Ghz ? static_cast<double>(n_sensors) : 1.0;
        const double c = std::exp(-n * interrogation_time / t2);
        return probe == Probe::Ghz ? ghz_w * c : c;
    }

    /// Phase at which the estimator is most sensitive.
    double operating_point() const {
        return probe == Probe::Ghz ? std::numbers::pi / (4.0 * n_sensors) : std::numbers::pi / 2.0;
    }
};

struct SensingResult {
    double estimate = 0.0;   // radians
    double std_error = 0.0;  // batch-means standard error of the estimate
    double contrast = 0.0;
    int shots_used = 0;
    int shots_discarded = 0;  // separable: lost reports; GHZ: shots with a lost report
    double elapsed = 0.0;     // shots * (interrogation + reinit)
};

/// Inverts P(0) = (1 + C cos(N phi)) / 2 for phi in [0, pi/N].
inline double invert_fringe(double p0, double contrast, int n_fold) {
    if (!(contrast > 0.0)) throw DomainError("invert_fringe: contrast must be positive");
    const double c = std::clamp((2.0 * p0 - 1.0) / contrast, -1.0, 1.0);
    return std::acos(c) / static_cast<double>(n_fold);
}

/// true if sensor i's report for the current shot reached the aggregator.
using ReportChannel = std::function<bool(int sensor)>;

inline constexpr int kSensingBlocks = 100;

/// Shot-by-shot accumulation, so shots can be driven by simulator events.
class SensingAccumulator {
public:
    explicit SensingAccumulator(SensingConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        contrast_ = cfg_.contrast();
        fold_ = cfg_.probe == Probe::Ghz ? cfg_.n_sensors : 1;
        p0_ = 0.5 * (1.0 + contrast_ * std::cos(fold_ * cfg_.true_phase));
        blocks_ = std::min(kSensingBlocks, cfg_.shots);
        zeros_.assign(blocks_, 0.0);
        total_.assign(blocks_, 0.0);
    }

    const SensingConfig& config() const { return cfg_; }
    bool done() const { return shot_ >= cfg_.shots; }
    double shot_duration() const { return cfg_.interrogation_time + cfg_.reinit_delay; }

    void shot(Rng& rng, const ReportChannel& report = {}) {
        if (done()) throw SimulationError("sensing: all shots already taken");
        const int blk = static_cast<int>(static_cast<long long>(shot_) * blocks_ / cfg_.shots);
        ++shot_;
        if (cfg_.probe == Probe::Separable) {
            for (int i = 0; i < cfg_.n_sensors; ++i) {
                const bool zero = rng.bernoulli(p0_);
                if (report && !report(i)) {
                    ++discarded_;
                    continue;
                }
                zeros_[blk] += zero;
                total_[blk] += 1.0;
            }
            ++used_;
            return;
        }
        // parity of all N outcomes; every sensor must report for the shot to count
        const bool even = rng.bernoulli(p0_);
        bool all = true;
        for (int i = 0; i < cfg_.n_sensors && report; ++i) all = report(i) && all;
        if (!all) {
            ++discarded_;
            return;
        }
        zeros_[blk] += even;
        total_[blk] += 1.0;
        ++used_;
    }

    SensingResult result() const {
        SensingResult res;
        res.contrast = contrast_;
        res.elapsed = shot_ * shot_duration();
        res.shots_used = used_;
        res.shots_discarded = discarded_;
        double z = 0.0, n = 0.0;
        for (int b = 0; b < blocks_; ++b) {
            z += zeros_[b];
            n += total_[b];
        }
        if (n == 0.0) throw DomainError("sensing: no usable shots");
        res.estimate = invert_fringe(z / n, contrast_, fold_);

        std::vector<double> est;
        for (int b = 0; b < blocks_; ++b) {
            if (total_[b] > 0.0) est.push_back(invert_fringe(zeros_[b] / total_[b], contrast_, fold_));
        }
        if (est.size() >= 2) {
            double mean = 0.0;
            for (double e : est) mean += e;
            mean /= static_cast<double>(est.size());
            double ss = 0.0;
            for (double e : est) ss += (e - mean) * (e - mean);
            const double sd = std::sqrt(ss / static_cast<double>(est.size() - 1));
            res.std_error = sd / std::sqrt(static_cast<double>(est.size()));
        }
        return res;
    }

private:
    SensingConfig cfg_;
    double contrast_ = 1.0;
    int fold_ = 1;
    double p0_ = 0.5;
    int blocks_ = 1;
    int shot_ = 0;
    int used_ = 0;
    int discarded_ = 0;
    std::vector<double> zeros_, total_;
};

inline SensingResult sensing_run(const SensingConfig& cfg, Rng& rng, const ReportChannel& report = {}) {
    SensingAccumulator acc(cfg);
    while (!acc.done()) acc.shot(rng, report);
    return acc.result();
}

}  // namespace oneq::apps
