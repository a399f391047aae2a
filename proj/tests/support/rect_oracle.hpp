#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "td/sim/vehicle.hpp"

namespace rect_oracle {

using td::sim::VehicleState;

struct Corner {
    double lon = 0.0;
    double lat = 0.0;
};

// Separating-axis overlap of two oriented a x b rectangles.
inline bool overlap(const VehicleState& p, const VehicleState& q, double a, double b) {
    auto corners = [&](const VehicleState& s) {
        const double c = std::cos(s.heading), sn = std::sin(s.heading);
        std::array<Corner, 4> out;
        const double hx[4] = {a / 2, a / 2, -a / 2, -a / 2};
        const double hy[4] = {b / 2, -b / 2, -b / 2, b / 2};
        for (int i = 0; i < 4; ++i) {
            out[i] = {s.lon + hx[i] * c - hy[i] * sn, s.lat + hx[i] * sn + hy[i] * c};
        }
        return out;
    };
    const auto cp = corners(p), cq = corners(q);
    const double axes[4][2] = {{std::cos(p.heading), std::sin(p.heading)},
                               {-std::sin(p.heading), std::cos(p.heading)},
                               {std::cos(q.heading), std::sin(q.heading)},
                               {-std::sin(q.heading), std::cos(q.heading)}};
    for (const auto& ax : axes) {
        double pmin = 1e300, pmax = -1e300, qmin = 1e300, qmax = -1e300;
        for (const auto& c : cp) {
            const double d = c.lon * ax[0] + c.lat * ax[1];
            pmin = std::min(pmin, d);
            pmax = std::max(pmax, d);
        }
        for (const auto& c : cq) {
            const double d = c.lon * ax[0] + c.lat * ax[1];
            qmin = std::min(qmin, d);
            qmax = std::max(qmax, d);
        }
        if (pmax < qmin || qmax < pmin) return false;
    }
    return true;
}

}  // namespace rect_oracle
