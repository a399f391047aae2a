#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "td/sim/config.hpp"
#include "td/sim/vehicle.hpp"

namespace td::sim {

using Rng = std::mt19937_64;

inline double sample_traffic_speed(Rng& rng, const SimConfig& config) {
    std::uniform_real_distribution<double> dist(config.speedMin, config.speedMax);
    return dist(rng);
}

/**
 * Random lane-centred traffic ahead of the ego. Every vehicle lies in
 * [egoLon + s0, egoLon + spawnRange] and same-lane neighbours are at least s0
 * apart. Throws when the requested count cannot fit.
 */
inline std::vector<VehicleState> spawn_traffic(Rng& rng, const SimConfig& config,
                                               double egoLon = 0.0) {
    const int count = config.trafficCount;
    if (count <= 0) {
        return {};
    }
    const double gap = config.spawnMinGap;
    const double lo = egoLon + gap;
    const double hi = egoLon + config.spawnRange;
    if (hi < lo) {
        throw std::invalid_argument("spawn_traffic: spawn range shorter than minimum gap");
    }
    const int perLane = static_cast<int>(std::floor((hi - lo) / gap)) + 1;
    if (count > perLane * config.laneCount) {
        throw std::invalid_argument("spawn_traffic: density exceeds minimum-gap capacity");
    }

    std::uniform_int_distribution<int> laneDist(0, config.laneCount - 1);
    std::uniform_real_distribution<double> lonDist(lo, hi);
    std::vector<VehicleState> out;
    out.reserve(static_cast<std::size_t>(count));
    const MapInfo map = config.map();
    constexpr int kMaxAttempts = 10000;
    int attempts = 0;
    while (static_cast<int>(out.size()) < count) {
        if (++attempts > kMaxAttempts) {
            throw std::runtime_error("spawn_traffic: could not satisfy minimum gap");
        }
        const int lane = laneDist(rng);
        const double lon = lonDist(rng);
        const double lat = map.lane_center(lane);
        const bool clear = std::none_of(out.begin(), out.end(), [&](const VehicleState& v) {
            return std::abs(v.lat - lat) < 1e-9 && std::abs(v.lon - lon) < gap;
        });
        if (!clear) {
            continue;
        }
        VehicleState v;
        v.lon = lon;
        v.lat = lat;
        v.heading = 0.0;
        v.speed = sample_traffic_speed(rng, config);
        out.push_back(v);
    }
    return out;
}

/// Constant-speed advance along the road; lat, heading and speed are kept.
inline std::vector<VehicleState> advance_traffic(std::vector<VehicleState> traffic, double dt) {
    if (dt < 0.0) {
        throw std::invalid_argument("advance_traffic: dt must be >= 0");
    }
    for (auto& v : traffic) {
        v.lon += v.speed * dt;
    }
    return traffic;
}

}  // namespace td::sim
