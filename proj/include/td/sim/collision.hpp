#pragma once

#include <array>
#include <cmath>

#include "td/sim/vehicle.hpp"

namespace td::sim {

/// Two-circle cover of an a x b rectangle: R^2 = (a/4)^2 + (b/2)^2.
inline double two_circle_radius_sq(double length, double width) {
    const double q = length / 4.0;
    const double h = width / 2.0;
    return q * q + h * h;
}

inline double two_circle_radius(double length, double width) {
    return std::sqrt(two_circle_radius_sq(length, width));
}

struct Point2 {
    double lon = 0.0;
    double lat = 0.0;
};

/// Circle centres at +-a/4 along the body axis.
inline std::array<Point2, 2> circle_centres(const VehicleState& pose, double length) {
    const double off = length / 4.0;
    const double c = std::cos(pose.heading);
    const double s = std::sin(pose.heading);
    return {Point2{pose.lon + off * c, pose.lat + off * s},
            Point2{pose.lon - off * c, pose.lat - off * s}};
}

/// True iff any cross pair of circle centres is closer than 2R.
inline bool check_collision(const VehicleState& a, const VehicleState& b, double length,
                            double width) {
    const double limit = 4.0 * two_circle_radius_sq(length, width);
    const auto ca = circle_centres(a, length);
    const auto cb = circle_centres(b, length);
    for (const auto& p : ca) {
        for (const auto& q : cb) {
            const double dx = p.lon - q.lon;
            const double dy = p.lat - q.lat;
            if (dx * dx + dy * dy < limit) {
                return true;
            }
        }
    }
    return false;
}

}  // namespace td::sim
