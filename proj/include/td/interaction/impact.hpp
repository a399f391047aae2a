#pragma once

#include <optional>
#include <vector>

#include "td/sim/config.hpp"
#include "td/sim/vehicle.hpp"
#include "td/sim/world.hpp"

namespace td::interaction {

/// Nearest vehicle ahead of the ego in each lane; nullopt where the lane is empty.
struct ImpactSet {
    std::vector<std::optional<sim::VehicleState>> perLane;
};

/// Phantom lead used for lanes without a real vehicle ahead.
struct VirtualLead {
    double gap = 180.0;    // spawnRange
    double speed = 12.0;   // v0
};

inline ImpactSet select_impact_vehicles(const sim::TrafficSnapshot& snapshot,
                                        const sim::MapInfo& map) {
    ImpactSet set;
    set.perLane.assign(static_cast<std::size_t>(map.laneCount), std::nullopt);
    for (const auto& v : snapshot.traffic) {
        if (v.lon < snapshot.ego.lon) continue;
        auto& slot = set.perLane[static_cast<std::size_t>(map.lane_of(v.lat))];
        if (!slot || v.lon < slot->lon) {
            slot = v;
        }
    }
    return set;
}

/// Real lead of `lane`, or the lane-centred virtual lead at `virt.gap` ahead.
inline sim::VehicleState lead_or_virtual(const ImpactSet& set, int lane,
                                         const sim::VehicleState& ego, const sim::MapInfo& map,
                                         const VirtualLead& virt) {
    const auto& slot = set.perLane.at(static_cast<std::size_t>(lane));
    if (slot) return *slot;
    return sim::VehicleState{ego.lon + virt.gap, map.lane_center(lane), 0.0, virt.speed};
}

}  // namespace td::interaction
