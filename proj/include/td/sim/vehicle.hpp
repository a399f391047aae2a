#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace td::sim {

/**
 * Pose and speed of one vehicle in the road-aligned frame.
 *
 * `lon` runs along the road, `lat` across it. Lane k (0-based, 0 = leftmost)
 * is centred at lat = k * laneWidth, so "left" means decreasing lat. Heading
 * is measured from the road direction toward increasing lat.
 */
struct VehicleState {
    double lon = 0.0;      // [m]
    double lat = 0.0;      // [m]
    double heading = 0.0;  // [rad]
    double speed = 0.0;    // [m/s]

    friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Commanded action a = [v, delta_f]: speed is applied directly (no powertrain).
struct Action {
    double speed = 0.0;  // [m/s]
    double steer = 0.0;  // front wheel angle [rad]

    friend bool operator==(const Action&, const Action&) = default;
};

inline bool is_finite(const VehicleState& s) {
    return std::isfinite(s.lon) && std::isfinite(s.lat) && std::isfinite(s.heading) &&
           std::isfinite(s.speed);
}

inline bool is_finite(const Action& a) { return std::isfinite(a.speed) && std::isfinite(a.steer); }

/// Continuous-time kinematic bicycle derivative (d lon, d lat, d heading).
struct PoseRate {
    double lon = 0.0;
    double lat = 0.0;
    double heading = 0.0;
};

inline PoseRate bicycle_rate(double heading, const Action& action, double wheelbase) {
    return {action.speed * std::cos(heading), action.speed * std::sin(heading),
            action.speed * std::tan(action.steer) / wheelbase};
}

/**
 * One forward-Euler step of the kinematic bicycle model with the commanded
 * speed held over the step. The returned speed is the commanded speed.
 */
inline VehicleState step_kinematics(const VehicleState& state, const Action& action, double dt,
                                    double wheelbase) {
    if (!is_finite(state) || !is_finite(action) || !std::isfinite(dt) ||
        !std::isfinite(wheelbase)) {
        throw std::invalid_argument("step_kinematics: non-finite input");
    }
    if (dt < 0.0 || wheelbase <= 0.0) {
        throw std::invalid_argument("step_kinematics: dt must be >= 0 and wheelbase > 0");
    }
    if (std::abs(action.steer) >= std::numbers::pi / 2.0) {
        throw std::invalid_argument("step_kinematics: |front wheel angle| must be < pi/2");
    }
    if (action.speed < 0.0) {
        throw std::invalid_argument("step_kinematics: commanded speed must be >= 0");
    }
    const PoseRate rate = bicycle_rate(state.heading, action, wheelbase);
    VehicleState next;
    next.lon = state.lon + dt * rate.lon;
    next.lat = state.lat + dt * rate.lat;
    next.heading = state.heading + dt * rate.heading;
    next.speed = action.speed;
    return next;
}

}  // namespace td::sim
