#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace td::mpc {

/// Per-lane terminal-target weights, lane 0 leftmost; sums to 1.
struct LaneTargetWeights {
    std::vector<double> weights;
};

/**
 * Driving tendency epsilon in [-1, 1] as a lateral preference: the lane
 * coordinate u = (eps + 1) / 2 * (m - 1) spreads a unit triangular kernel over
 * the neighbouring lane indices.
 */
inline LaneTargetWeights tendency_to_weights(double epsilon, int laneCount) {
    if (!(epsilon >= -1.0 && epsilon <= 1.0)) {
        throw std::invalid_argument("tendency_to_weights: epsilon must lie in [-1, 1]");
    }
    if (laneCount < 1) {
        throw std::invalid_argument("tendency_to_weights: lane count must be >= 1");
    }
    const double u = (epsilon + 1.0) / 2.0 * (laneCount - 1);
    LaneTargetWeights out;
    out.weights.resize(static_cast<std::size_t>(laneCount));
    double sum = 0.0;
    for (int j = 0; j < laneCount; ++j) {
        const double w = std::max(0.0, 1.0 - std::abs(u - j));
        out.weights[static_cast<std::size_t>(j)] = w;
        sum += w;
    }
    for (auto& w : out.weights) w /= sum;
    return out;
}

/// Index of the heaviest lane; ties go to the lane closest to `egoLane`, then the lower index.
inline int dominant_lane(const LaneTargetWeights& w, int egoLane) {
    int best = 0;
    for (int j = 1; j < static_cast<int>(w.weights.size()); ++j) {
        const double wj = w.weights[static_cast<std::size_t>(j)];
        const double wb = w.weights[static_cast<std::size_t>(best)];
        const double tol = 1e-12 * std::max(wj, wb);
        if (wj > wb + tol) {
            best = j;
        } else if (std::abs(wj - wb) <= tol && std::abs(j - egoLane) < std::abs(best - egoLane)) {
            best = j;
        }
    }
    return best;
}

}  // namespace td::mpc
