#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "td/learner/trainer.hpp"

namespace td::harness {

struct EpisodeReturn {
    int episode = 0;
    int endStep = 0;
    double value = 0.0;
};

/// Returns of the episodes that ended inside the log; a trailing unfinished episode is dropped.
inline std::vector<EpisodeReturn> episode_returns(const std::vector<learner::LogRow>& log) {
    std::vector<EpisodeReturn> out;
    for (std::size_t i = 0; i + 1 < log.size(); ++i) {
        if (log[i + 1].episode != log[i].episode) {
            out.push_back({log[i].episode, log[i].step, log[i].episodeReturn});
        }
    }
    return out;
}

/// Trailing mean over `window` values; the first entries average the available prefix.
inline std::vector<double> moving_average(const std::vector<double>& x, std::size_t window) {
    if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
    std::vector<double> out(x.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sum += x[i];
        if (i >= window) sum -= x[i - window];
        out[i] = sum / static_cast<double>(std::min(i + 1, window));
    }
    return out;
}

struct SeedCurve {
    std::vector<EpisodeReturn> returns;
    std::vector<double> movingAverage;
};

inline SeedCurve seed_curve(const std::vector<learner::LogRow>& log, std::size_t window = 20) {
    SeedCurve c;
    c.returns = episode_returns(log);
    if (c.returns.empty()) throw std::invalid_argument("learning curve: log has no completed episode");
    std::vector<double> values;
    for (const auto& r : c.returns) values.push_back(r.value);
    c.movingAverage = moving_average(values, window);
    return c;
}

/**
 * Wide CSV: one row per episode index with each seed's end step, return and
 * moving average, then the mean and sample std of the moving average over the
 * seeds that reached that episode.
 */
inline void write_learning_curve(std::ostream& os, const std::vector<std::vector<learner::LogRow>>& logs,
                                 std::size_t window = 20) {
    if (logs.empty()) throw std::invalid_argument("learning curve: need at least one log");
    std::vector<SeedCurve> curves;
    for (const auto& log : logs) curves.push_back(seed_curve(log, window));
    std::size_t rows = 0;
    for (const auto& c : curves) rows = std::max(rows, c.returns.size());

    os << "episode";
    for (std::size_t s = 0; s < curves.size(); ++s) {
        os << ",end_step_" << s << ",return_" << s << ",ma_" << s;
    }
    os << ",ma_mean,ma_std,seeds\n";
    const auto old = os.precision(10);
    for (std::size_t e = 0; e < rows; ++e) {
        os << e;
        std::vector<double> ma;
        for (const auto& c : curves) {
            if (e < c.returns.size()) {
                os << ',' << c.returns[e].endStep << ',' << c.returns[e].value << ',' << c.movingAverage[e];
                ma.push_back(c.movingAverage[e]);
            } else {
                os << ",,,";
            }
        }
        double mean = 0.0;
        for (double v : ma) mean += v;
        mean /= static_cast<double>(ma.size());
        double ss = 0.0;
        for (double v : ma) ss += (v - mean) * (v - mean);
        const double sd = ma.size() > 1 ? std::sqrt(ss / static_cast<double>(ma.size() - 1)) : 0.0;
        os << ',' << mean << ',' << sd << ',' << ma.size() << '\n';
    }
    os.precision(old);
}

struct ConvergenceCheck {
    double plateau = 0.0;
    double atDeadline = 0.0;  // moving average of the last episode ending by the deadline
    int reachedAt = -1;       // end step of the first full-window average at the threshold, -1 if never
    bool passed = false;
};

/**
 * Plateau = mean moving average over episodes ending in the last `plateauSteps`
 * of the run. Passes when a full-window moving average ending by `deadline`
 * is within `fraction` of the plateau (sign-aware). Prefix averages over fewer
 * than `window` episodes never count.
 */
inline ConvergenceCheck convergence(const std::vector<learner::LogRow>& log, int deadline = 8000,
                                    int plateauSteps = 2000, double fraction = 0.9,
                                    std::size_t window = 20) {
    if (log.empty()) throw std::invalid_argument("convergence: empty log");
    const SeedCurve c = seed_curve(log, window);
    const int last = log.back().step;
    double sum = 0.0;
    int n = 0;
    for (std::size_t i = window - 1; i < c.returns.size(); ++i) {
        if (c.returns[i].endStep > last - plateauSteps) {
            sum += c.movingAverage[i];
            ++n;
        }
    }
    ConvergenceCheck out;
    if (n == 0) return out;
    out.plateau = sum / n;
    const double threshold = out.plateau - (1.0 - fraction) * std::abs(out.plateau);
    for (std::size_t i = window - 1; i < c.returns.size() && c.returns[i].endStep <= deadline; ++i) {
        out.atDeadline = c.movingAverage[i];
        if (out.reachedAt < 0 && c.movingAverage[i] >= threshold) out.reachedAt = c.returns[i].endStep;
    }
    out.passed = out.reachedAt >= 0;
    return out;
}

}  // namespace td::harness
