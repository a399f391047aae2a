#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "td/interaction/idm.hpp"
#include "td/sim/collision.hpp"
#include "td/sim/config.hpp"
#include "td/sim/traffic.hpp"
#include "td/sim/vehicle.hpp"

namespace td::sim {

/// Ego plus every traffic vehicle inside the observation window.
struct TrafficSnapshot {
    double time = 0.0;
    VehicleState ego;
    std::vector<VehicleState> traffic;
    std::vector<int> ids;

    /// Flat state s^f: ego (lon, lat, heading, speed) followed by each vehicle.
    std::vector<double> flatten() const {
        std::vector<double> out;
        out.reserve(4 * (traffic.size() + 1));
        auto push = [&](const VehicleState& v) {
            out.insert(out.end(), {v.lon, v.lat, v.heading, v.speed});
        };
        push(ego);
        for (const auto& v : traffic) push(v);
        return out;
    }

    friend bool operator==(const TrafficSnapshot&, const TrafficSnapshot&) = default;
};

struct ControlDiagnostics {
    bool feasible = true;
    int iterations = 0;
    double kktResidual = 0.0;
    bool fallbackUsed = false;

    friend bool operator==(const ControlDiagnostics&, const ControlDiagnostics&) = default;
};

struct Decision {
    Action action;
    ControlDiagnostics diag;
};

struct TrajectoryRow {
    double t = 0.0;
    int vehId = 0;  // 0 = ego
    VehicleState state;
    Action action;
    std::optional<ControlDiagnostics> diag;  // ego rows only

    friend bool operator==(const TrajectoryRow&, const TrajectoryRow&) = default;
};

enum class StepStatus { Running, Collided, Completed, TimeLimit };

struct TrafficVehicle {
    int id = 0;
    VehicleState state;
    double desiredSpeed = 0.0;
    bool isStatic = false;
    // Active lateral ramp, if any.
    bool ramping = false;
    double rampStart = 0.0;
    double rampFrom = 0.0;
    double rampTo = 0.0;
    double rampDuration = 0.0;
};

class World {
public:
    World(SimConfig config, interaction::IdmParams trafficIdm = {})
        : config_(std::move(config)), trafficIdm_(trafficIdm) {
        config_.validate();
    }

    const SimConfig& config() const { return config_; }
    MapInfo map() const { return config_.map(); }
    double time() const { return stepIndex_ * config_.dt; }
    int step_index() const { return stepIndex_; }
    const VehicleState& ego() const { return ego_; }
    const Action& last_action() const { return lastAction_; }
    const std::vector<TrafficVehicle>& traffic() const { return traffic_; }

    /// New episode: ego start lane (random unless configured), then traffic.
    void reset(Rng& rng) {
        const MapInfo m = map();
        int lane = config_.egoLane;
        if (lane < 0) {
            std::uniform_int_distribution<int> laneDist(0, config_.laneCount - 1);
            lane = laneDist(rng);
        }
        ego_ = VehicleState{0.0, m.lane_center(lane), 0.0, config_.egoSpeed};
        lastAction_ = Action{config_.egoSpeed, 0.0};
        stepIndex_ = 0;
        firedEvents_.assign(config_.scriptedEvents.size(), false);
        traffic_.clear();
        int id = 1;
        for (const auto& spec : config_.traffic) {
            if (spec.lane < 0 || spec.lane >= config_.laneCount) {
                throw std::invalid_argument("World: traffic lane out of range");
            }
            TrafficVehicle v;
            v.id = id++;
            v.state = VehicleState{spec.lon, m.lane_center(spec.lane), 0.0, spec.speed};
            v.desiredSpeed = spec.speed;
            traffic_.push_back(v);
        }
        for (const auto& obs : config_.staticObstacles) {
            TrafficVehicle v;
            v.id = id++;
            v.state = VehicleState{obs.lon, obs.lat, 0.0, 0.0};
            v.isStatic = true;
            traffic_.push_back(v);
        }
        for (const auto& s : spawn_traffic(rng, config_, ego_.lon)) {
            TrafficVehicle v;
            v.id = id++;
            v.state = s;
            v.desiredSpeed = s.speed;
            traffic_.push_back(v);
        }
    }

    /// Sorted by lane, then lon; vehicles farther than spawnRange are excluded.
    TrafficSnapshot snapshot() const {
        const MapInfo m = map();
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < traffic_.size(); ++i) {
            if (std::abs(traffic_[i].state.lon - ego_.lon) <= config_.spawnRange) {
                idx.push_back(i);
            }
        }
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
            const int la = m.lane_of(traffic_[a].state.lat);
            const int lb = m.lane_of(traffic_[b].state.lat);
            if (la != lb) return la < lb;
            if (traffic_[a].state.lon != traffic_[b].state.lon) {
                return traffic_[a].state.lon < traffic_[b].state.lon;
            }
            return traffic_[a].id < traffic_[b].id;
        });
        TrafficSnapshot snap;
        snap.time = time();
        snap.ego = ego_;
        for (std::size_t i : idx) {
            snap.traffic.push_back(traffic_[i].state);
            snap.ids.push_back(traffic_[i].id);
        }
        return snap;
    }

    bool ego_collides() const {
        return std::any_of(traffic_.begin(), traffic_.end(), [&](const TrafficVehicle& v) {
            return check_collision(ego_, v.state, config_.vehicleLength, config_.vehicleWidth);
        });
    }

    /// Every lane has a stationary vehicle just ahead of the ego.
    bool all_lanes_blocked() const {
        const MapInfo m = map();
        const double reach =
            config_.vehicleLength + config_.followDistance + config_.blockedMargin;
        for (int lane = 0; lane < m.laneCount; ++lane) {
            const bool blocked =
                std::any_of(traffic_.begin(), traffic_.end(), [&](const TrafficVehicle& v) {
                    const double gap = v.state.lon - ego_.lon;
                    return m.lane_of(v.state.lat) == lane && v.state.speed < 0.1 && gap >= 0.0 &&
                           gap <= reach;
                });
            if (!blocked) return false;
        }
        return true;
    }

    StepStatus step(const Action& action) {
        if (!is_finite(action)) {
            throw std::invalid_argument("World::step: non-finite action");
        }
        const double dt = config_.dt;
        const VehicleState egoBefore = ego_;
        ego_ = step_kinematics(ego_, action, dt, config_.wheelbase);
        lastAction_ = action;
        update_traffic(egoBefore);
        ++stepIndex_;

        if (ego_collides()) return StepStatus::Collided;
        if (ego_.lon >= config_.routeLength) return StepStatus::Completed;
        if (ego_.speed < 0.1 && all_lanes_blocked()) return StepStatus::Completed;
        if (stepIndex_ >= config_.step_limit()) return StepStatus::TimeLimit;
        return StepStatus::Running;
    }

private:
    void update_traffic(const VehicleState& egoBefore) {
        const double dt = config_.dt;
        const double t = time();
        const MapInfo m = map();

        // Scripted lateral ramps start on the first step at or after their time.
        for (std::size_t e = 0; e < config_.scriptedEvents.size(); ++e) {
            const auto& ev = config_.scriptedEvents[e];
            if (firedEvents_[e] || t + 1e-9 < ev.time) continue;
            firedEvents_[e] = true;
            for (auto& v : traffic_) {
                if (v.id != ev.vehicleId) continue;
                v.ramping = true;
                v.rampStart = t;
                v.rampFrom = v.state.lat;
                v.rampTo = m.lane_center(ev.targetLane);
                v.rampDuration = ev.duration;
            }
        }

        std::vector<double> newSpeed(traffic_.size());
        for (std::size_t i = 0; i < traffic_.size(); ++i) {
            newSpeed[i] = config_.reactiveTraffic ? following_speed(i, egoBefore)
                                                  : traffic_[i].state.speed;
        }
        std::vector<VehicleState> states;
        states.reserve(traffic_.size());
        for (std::size_t i = 0; i < traffic_.size(); ++i) {
            VehicleState s = traffic_[i].state;
            s.speed = newSpeed[i];
            states.push_back(s);
        }
        states = advance_traffic(std::move(states), dt);
        for (std::size_t i = 0; i < traffic_.size(); ++i) {
            auto& v = traffic_[i];
            v.state = states[i];
            if (v.ramping) {
                const double tNext = t + dt;
                const double frac = std::min(1.0, (tNext - v.rampStart) / v.rampDuration);
                v.state.lat = v.rampFrom + (v.rampTo - v.rampFrom) * frac;
                const double rate = (v.rampTo - v.rampFrom) / v.rampDuration;
                v.state.heading = frac < 1.0 && v.state.speed > 0.0
                                      ? std::atan2(rate, v.state.speed)
                                      : 0.0;
                if (frac >= 1.0) v.ramping = false;
            }
        }
    }

    /// IDM speed update of traffic vehicle i toward its nearest leader (traffic or ego).
    double following_speed(std::size_t i, const VehicleState& egoState) const {
        const auto& self = traffic_[i];
        if (self.isStatic) return 0.0;
        // A leader counts when some pair of circle centres is laterally closer than the
        // collision distance 2R plus a small buffer.
        const double band = 2.0 * two_circle_radius(config_.vehicleLength, config_.vehicleWidth) + 0.1;
        const auto own = circle_centres(self.state, config_.vehicleLength);
        double bestGap = std::numeric_limits<double>::infinity();
        double leadSpeed = 0.0;
        auto consider = [&](const VehicleState& other) {
            const double gap = other.lon - self.state.lon;
            if (gap <= 0.0) return;
            const auto centres = circle_centres(other, config_.vehicleLength);
            double closest = std::numeric_limits<double>::infinity();
            for (const auto& c : centres) {
                for (const auto& o : own) closest = std::min(closest, std::abs(c.lat - o.lat));
            }
            if (closest >= band) return;
            if (gap < bestGap) {
                bestGap = gap;
                leadSpeed = other.speed;
            }
        };
        for (std::size_t j = 0; j < traffic_.size(); ++j) {
            if (j != i) consider(traffic_[j].state);
        }
        consider(egoState);

        interaction::IdmParams p = trafficIdm_;
        p.desiredSpeed = std::max(self.desiredSpeed, 0.1);
        const double v = self.state.speed;
        double a = 0.0;
        if (bestGap <= 0.1) {
            a = -config_.trafficMaxBrake;
        } else {
            a = interaction::idm_accel_unclamped(v, v - leadSpeed, bestGap, p);
            a = std::clamp(a, -config_.trafficMaxBrake, p.maxAccel);
        }
        return std::max(0.0, v + a * config_.dt);
    }

    SimConfig config_;
    interaction::IdmParams trafficIdm_;
    VehicleState ego_;
    Action lastAction_;
    std::vector<TrafficVehicle> traffic_;
    std::vector<bool> firedEvents_;
    int stepIndex_ = 0;
};

struct EpisodeResult {
    int steps = 0;
    bool collided = false;
    bool completed = false;
    bool aborted = false;
    double avgSpeed = 0.0;
    double returnSum = 0.0;
    std::vector<TrajectoryRow> trajectory;

    friend bool operator==(const EpisodeResult&, const EpisodeResult&) = default;
};

/// Thrown when the policy fails mid-episode; carries the partial result.
class EpisodeAborted : public std::runtime_error {
public:
    EpisodeAborted(const std::string& what, EpisodeResult partial)
        : std::runtime_error(what), result(std::move(partial)) {}
    EpisodeResult result;
};

using Policy = std::function<Decision(const TrafficSnapshot&)>;
using RewardFn = std::function<double(const TrafficSnapshot&)>;

struct EpisodeOptions {
    bool recordTrajectory = true;
    RewardFn reward;  // evaluated on the post-step snapshot
};

inline void append_rows(std::vector<TrajectoryRow>& rows, const World& world,
                        const std::optional<ControlDiagnostics>& diag) {
    const double t = world.time();
    rows.push_back({t, 0, world.ego(), world.last_action(), diag});
    for (const auto& v : world.traffic()) {
        rows.push_back({t, v.id, v.state, Action{v.state.speed, 0.0}, std::nullopt});
    }
}

/// Steps until collision, completion or the time limit.
inline EpisodeResult run_episode(const Policy& policy, const SimConfig& config, Rng& rng,
                                 const interaction::IdmParams& trafficIdm = {},
                                 const EpisodeOptions& options = {}) {
    World world(config, trafficIdm);
    world.reset(rng);
    EpisodeResult result;
    if (options.recordTrajectory) {
        append_rows(result.trajectory, world, std::nullopt);
    }
    double speedSum = 0.0;
    StepStatus status = StepStatus::Running;
    while (status == StepStatus::Running) {
        Decision decision;
        try {
            decision = policy(world.snapshot());
            if (!is_finite(decision.action)) {
                throw std::runtime_error("policy returned a non-finite action");
            }
            status = world.step(decision.action);
        } catch (const std::exception& e) {
            result.aborted = true;
            result.avgSpeed = result.steps > 0 ? speedSum / result.steps : 0.0;
            throw EpisodeAborted(std::string("episode aborted: ") + e.what(), std::move(result));
        }
        ++result.steps;
        speedSum += world.ego().speed;
        if (options.reward) {
            result.returnSum += options.reward(world.snapshot());
        }
        if (options.recordTrajectory) {
            append_rows(result.trajectory, world, decision.diag);
        }
    }
    result.collided = status == StepStatus::Collided;
    result.completed = status == StepStatus::Completed;
    result.avgSpeed = result.steps > 0 ? speedSum / result.steps : 0.0;
    return result;
}

}  // namespace td::sim
