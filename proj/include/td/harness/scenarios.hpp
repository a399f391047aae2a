#pragma once

#include "td/harness/config_io.hpp"

namespace td::harness {

/// Random dynamic traffic flow on a three-lane road.
inline ScenarioConfig default_scenario() {
    ScenarioConfig c;
    c.sync();
    return c;
}

/**
 * Static obstacles in Frenet coordinates on an empty three-lane road. The ego
 * starts in the middle lane behind an obstacle; the left lane stays open. With
 * `blocked` every lane is closed at the end, and a safe stop in front of the
 * closure completes the run.
 */
inline ScenarioConfig static_scenario(bool blocked = false) {
    ScenarioConfig c;
    auto& s = c.train.sim;
    s.trafficCount = 0;
    s.egoLane = 1;
    s.egoSpeed = 8.0;
    s.routeLength = 200.0;
    s.episodeLimit = 40.0;
    s.staticObstacles = {{35.0, 3.5}, {70.0, 7.0}, {110.0, 3.5}, {150.0, 7.0}};
    if (blocked) {
        s.staticObstacles = {{35.0, 3.5}, {70.0, 7.0}, {120.0, 0.0}, {120.0, 3.5}, {120.0, 7.0}};
    }
    c.sync();
    return c;
}

/// Dense flow with a left-lane vehicle cutting into the ego lane at 5.6 s.
inline ScenarioConfig dynamic_scenario() {
    ScenarioConfig c;
    auto& s = c.train.sim;
    s.trafficCount = 0;
    s.egoLane = 1;
    s.egoSpeed = 10.0;
    s.routeLength = 250.0;
    s.episodeLimit = 40.0;
    s.traffic = {{30.0, 0, 8.0}, {60.0, 1, 9.0}, {45.0, 2, 8.5}, {-25.0, 1, 9.0}, {100.0, 2, 7.0}};
    s.scriptedEvents = {{1, 5.6, 1, 2.0}};
    c.sync();
    return c;
}

}  // namespace td::harness
