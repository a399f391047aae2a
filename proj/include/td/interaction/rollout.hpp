#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "td/interaction/idm.hpp"
#include "td/interaction/impact.hpp"

namespace td::interaction {

/// Predicted end-of-horizon relation to one lane's lead (tau^i).
struct TerminalState {
    double gapAhead = 0.0;  // centre gap after the final update [m]
    double lat = 0.0;       // lead lateral position [m]
    double heading = 0.0;   // lead heading [rad]
    // Carried along for target construction.
    double leadSpeed = 0.0;
    double initialGap = 0.0;
};

/// O = {tau^1..tau^m}, lane 0 (leftmost) first.
struct TerminalSet {
    std::vector<TerminalState> entries;
};

/// Smallest gap fed to IDM; keeps the recurrence defined once the ego overruns a lead.
inline constexpr double kMinRolloutGap = 0.1;

/**
 * Ego follows one lead at constant lead speed for `horizon` steps:
 *   a_k = IDM(v_k, v_k - v_lead, gap_k)
 *   v_{k+1} = max(0, v_k + a_k dt)
 *   gap_{k+1} = gap_k + v_lead dt - v_k dt
 */
inline double rollout_gap(double egoSpeed, double leadSpeed, double gap, const IdmParams& params,
                          int horizon, double dt) {
    double v = egoSpeed;
    for (int k = 0; k < horizon; ++k) {
        const double a = idm_accel(v, v - leadSpeed, std::max(gap, kMinRolloutGap), params);
        const double vNext = std::max(0.0, v + a * dt);
        gap = gap + leadSpeed * dt - v * dt;
        v = vNext;
    }
    return gap;
}

inline TerminalSet rollout_terminal_states(const sim::TrafficSnapshot& snapshot,
                                           const sim::MapInfo& map, const IdmParams& params,
                                           int horizon, double dt, double virtualGap = 180.0) {
    if (horizon < 1) {
        throw std::invalid_argument("rollout_terminal_states: horizon must be >= 1");
    }
    params.validate();
    const ImpactSet impact = select_impact_vehicles(snapshot, map);
    const VirtualLead virt{virtualGap, params.desiredSpeed};
    TerminalSet out;
    out.entries.reserve(static_cast<std::size_t>(map.laneCount));
    for (int lane = 0; lane < map.laneCount; ++lane) {
        const sim::VehicleState lead = lead_or_virtual(impact, lane, snapshot.ego, map, virt);
        const double gap0 = lead.lon - snapshot.ego.lon;
        TerminalState tau;
        tau.gapAhead = rollout_gap(snapshot.ego.speed, lead.speed, gap0, params, horizon, dt);
        tau.lat = lead.lat;
        tau.heading = lead.heading;
        tau.leadSpeed = lead.speed;
        tau.initialGap = gap0;
        out.entries.push_back(tau);
    }
    return out;
}

}  // namespace td::interaction
