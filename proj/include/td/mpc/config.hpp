#pragma once

#include <stdexcept>

#include "td/sim/collision.hpp"

namespace td::mpc {

struct MpcConfig {
    int predictionHorizon = 30;  // N_p
    int controlHorizon = 15;     // N_c
    double dt = 0.1;
    double wheelbase = 2.9;

    double controlWeight = 0.01;   // R_u
    double incrementWeight = 0.2;  // R_du
    double proximityWeight = 10.0; // R (obstacle proximity cost)

    double speedIncrementLimit = 3.0;    // |dv| per step [m/s]
    double steerIncrementLimit = 0.388;  // |d delta| per step [rad]
    double maxSpeed = 12.0;
    double maxSteer = 0.35;

    double followDistance = 5.0;  // d_s, bumper to bumper
    double vehicleLength = 5.0;   // a
    double vehicleWidth = 2.0;    // b
    double collisionMargin = 1e-3;  // slack on the strict clearance [m^2]
    /// Added to the circle-pair distance 2R; absorbs one step of unmodelled traffic braking [m].
    double safetyBuffer = 0.1;

    double kktTolerance = 1e-6;
    /// Constraints are solved as g <= -backoff so the reported violation of g <= 0 is zero.
    double constraintBackoff = 1e-3;
    int maxIterations = 100;     // outer augmented-Lagrangian iterations
    int innerIterations = 50;    // Newton iterations per outer iteration

    double virtualLeadGap = 180.0;
    /// Obstacles whose initial |d lon| exceeds this are left out of the problem.
    double obstacleRange = 100.0;

    double safety_radius_sq() const { return sim::two_circle_radius_sq(vehicleLength, vehicleWidth); }

    /// Required squared distance between circle centres.
    double clearance_sq() const {
        const double d = 2.0 * sim::two_circle_radius(vehicleLength, vehicleWidth) + safetyBuffer;
        return d * d + collisionMargin;
    }

    void validate() const {
        if (predictionHorizon < 1 || controlHorizon < 1 || controlHorizon > predictionHorizon) {
            throw std::invalid_argument("MpcConfig: need 1 <= N_c <= N_p");
        }
        if (!(constraintBackoff >= 0.0)) {
            throw std::invalid_argument("MpcConfig: backoff must be >= 0");
        }
        if (!(safetyBuffer >= 0.0) || !(collisionMargin >= 0.0)) {
            throw std::invalid_argument("MpcConfig: safety buffer and margin must be >= 0");
        }
        if (!(kktTolerance > 0.0)) throw std::invalid_argument("MpcConfig: tolerance must be > 0");
        if (controlWeight < 0.0 || incrementWeight < 0.0 || proximityWeight < 0.0) {
            throw std::invalid_argument("MpcConfig: weights must be >= 0");
        }
        if (!(dt > 0.0) || !(wheelbase > 0.0)) {
            throw std::invalid_argument("MpcConfig: dt and wheelbase must be > 0");
        }
        if (maxIterations < 0 || innerIterations < 1) {
            throw std::invalid_argument("MpcConfig: bad iteration limits");
        }
    }
};

}  // namespace td::mpc
