#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace td::sim {

/// Lane geometry of a straight multi-lane road. Lane 0 is leftmost, centred at lat 0.
struct MapInfo {
    int laneCount = 3;
    double laneWidth = 3.5;

    double lane_center(int lane) const { return lane * laneWidth; }

    int lane_of(double lat) const {
        const int lane = static_cast<int>(std::lround(lat / laneWidth));
        return lane < 0 ? 0 : (lane >= laneCount ? laneCount - 1 : lane);
    }

    double lat_min() const { return -laneWidth / 2.0; }
    double lat_max() const { return (laneCount - 1 + 0.5) * laneWidth; }
};

/// Stationary obstacle placed by a scenario file (Frenet coordinates).
struct StaticObstacle {
    double lon = 0.0;
    double lat = 0.0;
};

/// Explicitly placed traffic vehicle.
struct TrafficSpec {
    double lon = 0.0;
    int lane = 0;
    double speed = 0.0;
};

/// Linear lateral ramp of one traffic vehicle into another lane.
struct ScriptedEvent {
    int vehicleId = 1;
    double time = 0.0;
    int targetLane = 0;
    double duration = 2.0;
};

struct SimConfig {
    int laneCount = 3;
    double laneWidth = 3.5;
    double dt = 0.1;
    double episodeLimit = 80.0;
    double spawnRange = 180.0;
    double speedMin = 6.0;
    double speedMax = 12.0;
    double wheelbase = 2.9;
    double vehicleLength = 5.0;
    double vehicleWidth = 2.0;
    std::uint64_t seed = 1;

    double routeLength = 300.0;
    int trafficCount = 9;
    double spawnMinGap = 20.0;
    /// -1 picks a random start lane.
    int egoLane = -1;
    double egoSpeed = 8.0;
    double egoMaxSpeed = 12.0;
    /// Safe-stop detection: lane counts as blocked when a stationary vehicle
    /// sits within vehicleLength + followDistance + blockedMargin ahead.
    double followDistance = 5.0;
    double blockedMargin = 10.0;

    bool reactiveTraffic = true;
    double trafficMaxBrake = 9.0;

    std::vector<TrafficSpec> traffic;
    std::vector<StaticObstacle> staticObstacles;
    std::vector<ScriptedEvent> scriptedEvents;

    MapInfo map() const { return {laneCount, laneWidth}; }

    int step_limit() const { return static_cast<int>(std::lround(episodeLimit / dt)); }

    void validate() const {
        if (laneCount < 1) throw std::invalid_argument("SimConfig: lane_count must be >= 1");
        if (!(laneWidth > 0.0)) throw std::invalid_argument("SimConfig: lane_width must be > 0");
        if (!(dt > 0.0)) throw std::invalid_argument("SimConfig: dt must be > 0");
        const double steps = episodeLimit / dt;
        if (!(episodeLimit > 0.0) || std::abs(steps - std::round(steps)) > 1e-9 * steps) {
            throw std::invalid_argument("SimConfig: episode_limit / dt must be an integer");
        }
        if (speedMin > speedMax || speedMin < 0.0) {
            throw std::invalid_argument("SimConfig: speed range must satisfy 0 <= min <= max");
        }
        if (!(spawnRange > 0.0)) throw std::invalid_argument("SimConfig: spawn_range must be > 0");
        if (!(wheelbase > 0.0) || !(vehicleLength > 0.0) || !(vehicleWidth > 0.0)) {
            throw std::invalid_argument("SimConfig: vehicle dimensions must be > 0");
        }
        if (trafficCount < 0) throw std::invalid_argument("SimConfig: traffic_count must be >= 0");
        if (egoLane >= laneCount) throw std::invalid_argument("SimConfig: ego_lane out of range");
        for (const auto& e : scriptedEvents) {
            if (e.targetLane < 0 || e.targetLane >= laneCount || !(e.duration > 0.0)) {
                throw std::invalid_argument("SimConfig: bad scripted event");
            }
        }
    }
};

}  // namespace td::sim
