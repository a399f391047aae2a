#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "td/sim/world.hpp"

namespace td::sim {

inline constexpr const char* kTrajectoryHeader =
    "t,veh_id,lon,lat,heading,speed,action_v,action_delta,feasible,iterations,kkt_residual,"
    "fallback_used";

/// Shortest round-trippable decimal form.
inline std::string fmt_num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_trajectory_csv(std::ostream& os, const std::vector<TrajectoryRow>& rows) {
    os << kTrajectoryHeader << '\n';
    for (const auto& r : rows) {
        os << fmt_num(r.t) << ',' << r.vehId << ',' << fmt_num(r.state.lon) << ','
           << fmt_num(r.state.lat) << ',' << fmt_num(r.state.heading) << ','
           << fmt_num(r.state.speed) << ',' << fmt_num(r.action.speed) << ','
           << fmt_num(r.action.steer) << ',';
        if (r.diag) {
            os << (r.diag->feasible ? 1 : 0) << ',' << r.diag->iterations << ','
               << fmt_num(r.diag->kktResidual) << ',' << (r.diag->fallbackUsed ? 1 : 0);
        } else {
            os << ",,,";
        }
        os << '\n';
    }
}

}  // namespace td::sim
