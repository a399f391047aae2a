#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "td/interaction/impact.hpp"
#include "td/sim/config.hpp"
#include "td/sim/world.hpp"

namespace td::learner {

struct RewardCoeffs {
    double speedFactor = 1.3;       // rho_s
    double proximityFactor = -0.08; // rho_n
    double tendencyFactor = 20.0;   // rho_dt
    double tendencyOffset = 10.0;
    double vMax = 15.0;
    double dMax = 180.0;
    double minSeparation = 0.1;
    double lateralClamp = 3.0;

    void validate() const {
        if (!(speedFactor > 0.0)) throw std::invalid_argument("RewardCoeffs: speed factor must be > 0");
        if (!(proximityFactor < 0.0)) {
            throw std::invalid_argument("RewardCoeffs: proximity factor must be < 0");
        }
        if (!(tendencyFactor > 0.0)) {
            throw std::invalid_argument("RewardCoeffs: tendency factor must be > 0");
        }
        if (!(vMax > 0.0) || !(dMax > 0.0) || !(minSeparation > 0.0) || !(lateralClamp > 0.0)) {
            throw std::invalid_argument("RewardCoeffs: vMax, dMax, separations must be > 0");
        }
    }
};

/// Normalised gap D_j and lateral offset L_j per lane, both in [0, 1].
struct PolicyState {
    std::vector<double> gap;
    std::vector<double> lateral;

    std::size_t lanes() const { return gap.size(); }

    /// [D_1, L_1, ..., D_m, L_m]
    std::vector<double> features() const {
        std::vector<double> out;
        out.reserve(2 * gap.size());
        for (std::size_t j = 0; j < gap.size(); ++j) {
            out.push_back(gap[j]);
            out.push_back(lateral[j]);
        }
        return out;
    }
};

inline double normalised_gap(double gap, double dMax) { return std::min(gap / dMax, 1.0); }

inline double normalised_lateral(double offset, double clamp) {
    return (std::clamp(offset, -clamp, clamp) + clamp) / (2.0 * clamp);
}

/**
 * One (D, L) pair per lane from that lane's impact vehicle, or a virtual lead
 * at dMax on the lane centre when the lane is empty.
 */
inline PolicyState build_policy_state(const interaction::ImpactSet& impact,
                                      const sim::VehicleState& ego, const sim::MapInfo& map,
                                      const RewardCoeffs& coeffs) {
    if (static_cast<int>(impact.perLane.size()) != map.laneCount) {
        throw std::invalid_argument("build_policy_state: impact set does not cover every lane");
    }
    PolicyState s;
    const interaction::VirtualLead virt{coeffs.dMax, coeffs.vMax};
    for (int lane = 0; lane < map.laneCount; ++lane) {
        const auto lead = interaction::lead_or_virtual(impact, lane, ego, map, virt);
        s.gap.push_back(normalised_gap(lead.lon - ego.lon, coeffs.dMax));
        s.lateral.push_back(normalised_lateral(lead.lat - ego.lat, coeffs.lateralClamp));
    }
    return s;
}

enum class FreeSide { None, Left, Right };

/**
 * Side with the larger best normalised gap among lanes left vs right of the
 * ego lane. With lanes on one side only, that side wins when it beats the
 * current lane. Ties give None.
 */
inline FreeSide free_direction(const PolicyState& state, int egoLane) {
    const int m = static_cast<int>(state.lanes());
    if (egoLane < 0 || egoLane >= m) throw std::invalid_argument("free_direction: bad ego lane");
    constexpr double none = -std::numeric_limits<double>::infinity();
    double left = none, right = none;
    for (int j = 0; j < egoLane; ++j) left = std::max(left, state.gap[static_cast<std::size_t>(j)]);
    for (int j = egoLane + 1; j < m; ++j) right = std::max(right, state.gap[static_cast<std::size_t>(j)]);
    const double own = state.gap[static_cast<std::size_t>(egoLane)];
    if (left == none && right == none) return FreeSide::None;
    if (left == none) return right > own ? FreeSide::Right : FreeSide::None;
    if (right == none) return left > own ? FreeSide::Left : FreeSide::None;
    if (left > right) return FreeSide::Left;
    if (right > left) return FreeSide::Right;
    return FreeSide::None;
}

struct RewardTerms {
    double speed = 0.0;
    double proximity = 0.0;
    double tendency = 0.0;
    double total = 0.0;
};

inline double speed_reward(double speed, const RewardCoeffs& c) { return speed * c.speedFactor / c.vMax; }

/// rho_n / (ds^2 + dd^2), each separation floored at minSeparation.
inline double proximity_reward(double dLon, double dLat, const RewardCoeffs& c) {
    const double ds = std::max(std::abs(dLon), c.minSeparation);
    const double dd = std::max(std::abs(dLat), c.minSeparation);
    return c.proximityFactor / (ds * ds + dd * dd);
}

inline double tendency_reward(FreeSide side, double epsilon, const RewardCoeffs& c) {
    switch (side) {
        case FreeSide::Left: return -c.tendencyFactor * epsilon + c.tendencyOffset;
        case FreeSide::Right: return c.tendencyFactor * epsilon - c.tendencyOffset;
        case FreeSide::None: break;
    }
    return 0.0;
}

/// r = r_s + r_n + r_dt; r_n sums over real impact vehicles only.
inline RewardTerms compute_reward(const sim::TrafficSnapshot& snapshot,
                                  const interaction::ImpactSet& impact, double epsilon,
                                  const sim::MapInfo& map, const RewardCoeffs& coeffs) {
    if (!std::isfinite(epsilon)) throw std::invalid_argument("compute_reward: non-finite epsilon");
    const auto& ego = snapshot.ego;
    RewardTerms r;
    r.speed = speed_reward(ego.speed, coeffs);
    for (const auto& slot : impact.perLane) {
        if (slot) r.proximity += proximity_reward(slot->lon - ego.lon, slot->lat - ego.lat, coeffs);
    }
    const PolicyState state = build_policy_state(impact, ego, map, coeffs);
    r.tendency = tendency_reward(free_direction(state, map.lane_of(ego.lat)), epsilon, coeffs);
    r.total = r.speed + r.proximity + r.tendency;
    return r;
}

}  // namespace td::learner
