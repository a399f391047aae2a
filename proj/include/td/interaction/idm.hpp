#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace td::interaction {

struct IdmParams {
    double safeTimeHeadway = 1.0;  // T [s]
    double maxAccel = 3.0;         // a_max [m/s^2]
    double accelExponent = 10.0;   // delta
    double desiredDecel = 1.7;     // b [m/s^2]
    double minGap = 20.0;          // s0 [m]
    double desiredSpeed = 12.0;    // v0 [m/s]

    void validate() const {
        if (!(safeTimeHeadway > 0.0 && maxAccel > 0.0 && accelExponent > 0.0 &&
              desiredDecel > 0.0 && minGap > 0.0 && desiredSpeed > 0.0)) {
            throw std::invalid_argument("IdmParams: all parameters must be strictly positive");
        }
    }
};

/// Desired gap s*(v, dv). closingSpeed = v_ego - v_lead, positive when closing in.
inline double idm_desired_gap(double egoSpeed, double closingSpeed, const IdmParams& p) {
    const double dynamic = egoSpeed * p.safeTimeHeadway +
                           egoSpeed * closingSpeed / (2.0 * std::sqrt(p.maxAccel * p.desiredDecel));
    return p.minGap + std::max(0.0, dynamic);
}

/// IDM acceleration without any output clamp.
inline double idm_accel_unclamped(double egoSpeed, double closingSpeed, double gap,
                                  const IdmParams& p) {
    if (!(gap > 0.0)) {
        throw std::invalid_argument("idm_accel: gap must be > 0");
    }
    if (egoSpeed < 0.0) {
        throw std::invalid_argument("idm_accel: ego speed must be >= 0");
    }
    const double free = std::pow(egoSpeed / p.desiredSpeed, p.accelExponent);
    const double ratio = std::isinf(gap) ? 0.0 : idm_desired_gap(egoSpeed, closingSpeed, p) / gap;
    return p.maxAccel * (1.0 - free - ratio * ratio);
}

/// IDM acceleration clamped to [-2b, a_max].
inline double idm_accel(double egoSpeed, double closingSpeed, double gap, const IdmParams& p) {
    return std::clamp(idm_accel_unclamped(egoSpeed, closingSpeed, gap, p), -2.0 * p.desiredDecel,
                      p.maxAccel);
}

}  // namespace td::interaction
