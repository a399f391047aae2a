#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "td/interaction/impact.hpp"
#include "td/learner/agent.hpp"
#include "td/learner/replay.hpp"
#include "td/learner/reward.hpp"
#include "td/learner/trainer.hpp"
#include "td/sim/world.hpp"

namespace td::harness {

/// Polynomial-trajectory RL comparison agent: action (d_s, a_x), quintic + PID tracking.
struct BaselineRlConfig {
    double horizon = 3.0;        // quintic duration [s]
    double lateralRange = 3.5;   // |d_s| limit [m]
    double maxAccel = 3.0;       // |a_x| limit [m/s^2]
    double maxSteer = 0.35;
    double kpLat = 0.8;
    double kiLat = 0.0;
    double kdLat = 0.3;
    double kpLon = 1.0;
    double speedWeight = 1.0;
    double comfortWeight = 0.1;
    double collisionPenalty = 50.0;
    int totalSteps = 10000;

    void validate() const {
        if (!(horizon > 0.0) || !(lateralRange > 0.0) || !(maxAccel > 0.0) || !(maxSteer > 0.0)) {
            throw std::invalid_argument("BaselineRlConfig: limits must be > 0");
        }
        if (kpLat < 0.0 || kiLat < 0.0 || kdLat < 0.0 || kpLon < 0.0) {
            throw std::invalid_argument("BaselineRlConfig: gains must be >= 0");
        }
        if (speedWeight < 0.0 || comfortWeight < 0.0 || collisionPenalty < 0.0) {
            throw std::invalid_argument("BaselineRlConfig: reward weights must be >= 0");
        }
        if (totalSteps < 0) throw std::invalid_argument("BaselineRlConfig: total_steps must be >= 0");
    }
};

/// y(t) = sum c_i t^i on [0, T].
struct Quintic {
    std::array<double, 6> c{};

    double pos(double t) const {
        return c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
    }
    double vel(double t) const {
        return c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
    }
    double acc(double t) const {
        return 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
    }
};

/// Quintic matching position, velocity and acceleration at t = 0 and t = T.
inline Quintic quintic_between(double y0, double v0, double a0, double y1, double v1, double a1,
                               double T) {
    if (!(T > 0.0)) throw std::invalid_argument("quintic_between: T must be > 0");
    Quintic q;
    q.c[0] = y0;
    q.c[1] = v0;
    q.c[2] = a0 / 2.0;
    const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
    const double h = y1 - y0 - v0 * T - a0 * T2 / 2.0;
    const double dv = v1 - v0 - a0 * T;
    const double da = a1 - a0;
    q.c[3] = (10.0 * h - 4.0 * dv * T + da * T2 / 2.0) / T3;
    q.c[4] = (-15.0 * h + 7.0 * dv * T - da * T2) / T4;
    q.c[5] = (6.0 * h - 3.0 * dv * T + da * T2 / 2.0) / T5;
    return q;
}

/**
 * Tracks a quintic lateral path and a constant-acceleration speed profile.
 * Each step re-plans the quintic from the reference state of the previous
 * plan (not the measured state) to the action's endpoint; a lateral PID acts on
 * the error to the reference one step ahead. The reference re-syncs to the
 * measured state on reset or when the error exceeds `resyncDistance`.
 */
class PolynomialTracker {
public:
    static constexpr double resyncDistance = 1.0;

    PolynomialTracker(BaselineRlConfig config, sim::MapInfo map, double dt, double maxSpeed)
        : config_(config), map_(map), dt_(dt), maxSpeed_(maxSpeed) {
        config_.validate();
        if (!(dt > 0.0)) throw std::invalid_argument("PolynomialTracker: dt must be > 0");
    }

    void reset() {
        integral_ = 0.0;
        synced_ = false;
    }

    /// Normalised action in (-1, 1)^2 to (d_s, a_x).
    std::array<double, 2> scale(const std::vector<double>& action) const {
        if (action.size() != 2) throw std::invalid_argument("PolynomialTracker: action must be 2-D");
        return {action[0] * config_.lateralRange, action[1] * config_.maxAccel};
    }

    /// Lateral endpoint relative to the current lane centre, kept between the outer lane centres.
    double endpoint(const sim::VehicleState& ego, double ds) const {
        const double base = map_.lane_center(map_.lane_of(ego.lat));
        return std::clamp(base + ds, map_.lane_center(0), map_.lane_center(map_.laneCount - 1));
    }

    sim::Action control(const sim::VehicleState& ego, double ds, double ax) {
        const double latRate = ego.speed * std::sin(ego.heading);
        if (!synced_ || std::abs(refPos_ - ego.lat) > resyncDistance) {
            refPos_ = ego.lat;
            refVel_ = latRate;
            refAcc_ = 0.0;
            integral_ = 0.0;
            synced_ = true;
        }
        const Quintic path =
            quintic_between(refPos_, refVel_, refAcc_, endpoint(ego, ds), 0.0, 0.0, config_.horizon);
        refPos_ = path.pos(dt_);
        refVel_ = path.vel(dt_);
        refAcc_ = path.acc(dt_);
        const double err = refPos_ - ego.lat;
        const double errRate = refVel_ - latRate;
        integral_ += err * dt_;
        const double steer = std::clamp(
            config_.kpLat * err + config_.kiLat * integral_ + config_.kdLat * errRate,
            -config_.maxSteer, config_.maxSteer);
        const double vRef = ego.speed + ax * dt_;
        const double speed = std::clamp(ego.speed + config_.kpLon * (vRef - ego.speed), 0.0, maxSpeed_);
        return {speed, steer};
    }

private:
    BaselineRlConfig config_;
    sim::MapInfo map_;
    double dt_;
    double maxSpeed_;
    double integral_ = 0.0;
    bool synced_ = false;
    double refPos_ = 0.0;
    double refVel_ = 0.0;
    double refAcc_ = 0.0;
};

/// Policy features plus speed, in-lane offset and heading.
inline std::vector<double> baseline_observe(const sim::TrafficSnapshot& snap, const sim::MapInfo& map,
                                            const learner::RewardCoeffs& coeffs) {
    auto s = learner::observe(snap, map, coeffs);
    const double centre = map.lane_center(map.lane_of(snap.ego.lat));
    s.push_back(snap.ego.speed / coeffs.vMax);
    s.push_back(std::clamp((snap.ego.lat - centre) / map.laneWidth + 0.5, 0.0, 1.0));
    s.push_back(snap.ego.heading);
    return s;
}

inline int baseline_state_dim(const sim::MapInfo& map) { return 2 * map.laneCount + 3; }

struct BaselineRewardTerms {
    double speed = 0.0;
    double comfort = 0.0;
    double collision = 0.0;
    double total() const { return speed + comfort + collision; }
};

inline BaselineRewardTerms baseline_reward(double speed, const std::vector<double>& action,
                                           double steer, bool collided, const BaselineRlConfig& c,
                                           double vMax) {
    BaselineRewardTerms r;
    r.speed = c.speedWeight * speed / vMax;
    r.comfort = -c.comfortWeight * (action[1] * action[1] + (steer / c.maxSteer) * (steer / c.maxSteer));
    r.collision = collided ? -c.collisionPenalty : 0.0;
    return r;
}

/**
 * Soft actor-critic training of the comparison agent. Collisions end the
 * episode with a penalty; nothing aborts. Logged in the training-log schema
 * with r_s = speed, r_n = comfort, r_dt = collision term and epsilon = d_s / range.
 */
inline learner::TrainResult train_baseline_rl(const learner::TrainConfig& config,
                                              const BaselineRlConfig& rl, learner::SacAgent& agent,
                                              std::uint64_t seed,
                                              const std::function<void(const learner::LogRow&)>& onStep = {}) {
    config.validate();
    rl.validate();
    const sim::MapInfo map = config.sim.map();
    if (agent.state_dim() != baseline_state_dim(map) || agent.action_dim() != 2) {
        throw std::invalid_argument("train_baseline_rl: agent shape mismatch");
    }
    const auto& lc = config.learner;
    learner::SeedStreams rng(seed);
    learner::ReplayBuffer buffer(static_cast<std::size_t>(lc.replayCapacity));
    sim::World world(config.sim, config.idm);
    world.reset(rng.env);
    PolynomialTracker tracker(rl, map, config.sim.dt, config.sim.egoMaxSpeed);

    learner::TrainResult result;
    int episode = 0;
    double episodeReturn = 0.0;
    learner::UpdateStats last{};
    for (int step = 1; step <= rl.totalSteps; ++step) {
        const auto state = baseline_observe(world.snapshot(), map, config.reward);
        const auto action = agent.sample_action(state, rng.agent);
        const auto [ds, ax] = tracker.scale(action);
        const sim::Action cmd = tracker.control(world.ego(), ds, ax);
        const sim::StepStatus status = world.step(cmd);
        const bool collided = status == sim::StepStatus::Collided;
        const auto r = baseline_reward(world.ego().speed, action, cmd.steer, collided, rl, config.reward.vMax);
        const auto next = baseline_observe(world.snapshot(), map, config.reward);
        const bool done = collided || status == sim::StepStatus::Completed;
        buffer.push({state, action, r.total(), next, done});
        episodeReturn += r.total();
        if (step > lc.warmupSteps && step % lc.updateEvery == 0 &&
            buffer.size() >= static_cast<std::size_t>(lc.batchSize)) {
            last = agent.update(buffer, rng.agent);
            ++result.updates;
        }
        learner::LogRow row{step, episode, episodeReturn, r.speed, r.comfort, r.collision, action[0],
                            agent.alpha(), last.criticLoss, last.policyLoss, false, collided};
        result.log.push_back(row);
        if (onStep) onStep(row);
        if (collided) ++result.collisions;
        if (status != sim::StepStatus::Running) {
            ++episode;
            episodeReturn = 0.0;
            world.reset(rng.env);
            tracker.reset();
        }
    }
    result.episodes = result.log.empty() ? 0 : result.log.back().episode + 1;
    return result;
}

}  // namespace td::harness
