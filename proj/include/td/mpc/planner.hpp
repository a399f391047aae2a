#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "td/interaction/idm.hpp"
#include "td/interaction/rollout.hpp"
#include "td/mpc/problem.hpp"
#include "td/mpc/solver.hpp"
#include "td/mpc/weights.hpp"
#include "td/sim/world.hpp"

namespace td::mpc {

/// Carried between receding-horizon solves.
struct PlannerState {
    std::optional<NlpSolution> previous;
    std::optional<sim::Action> lastApplied;
};

/**
 * Initial action sequence. A previous solution is shifted by one step with its
 * tail repeated; otherwise a constant-speed, proportional-steer sequence heads
 * for the lane with the largest weight.
 */
inline std::vector<sim::Action> warm_start(const interaction::TerminalSet& terminal,
                                           const LaneTargetWeights& weights,
                                           const std::optional<NlpSolution>& previous,
                                           const sim::VehicleState& ego, const sim::MapInfo& map,
                                           const MpcConfig& config) {
    const auto nc = static_cast<std::size_t>(config.controlHorizon);
    if (previous && previous->actions.size() == nc) {
        std::vector<sim::Action> out(previous->actions.begin() + 1, previous->actions.end());
        out.push_back(previous->actions.back());
        return out;
    }
    (void)terminal;
    const int lane = dominant_lane(weights, map.lane_of(ego.lat));
    const double targetLat = map.lane_center(lane);
    const double speed = std::clamp(ego.speed, 0.0, config.maxSpeed);
    constexpr double kLat = 0.04;
    constexpr double kHeading = 0.6;
    std::vector<sim::Action> out;
    out.reserve(nc);
    sim::VehicleState s = ego;
    for (std::size_t k = 0; k < nc; ++k) {
        const double steer = std::clamp(kLat * (targetLat - s.lat) - kHeading * s.heading,
                                        -config.maxSteer, config.maxSteer);
        const sim::Action a{speed, steer};
        out.push_back(a);
        s = sim::step_kinematics(s, a, config.dt, config.wheelbase);
    }
    return out;
}

/// Straight-ahead braking at the maximum speed decrement, down to standstill.
inline std::vector<sim::Action> fallback_brake(const sim::TrafficSnapshot& snapshot,
                                               const MpcConfig& config) {
    std::vector<sim::Action> out;
    double v = std::max(0.0, snapshot.ego.speed);
    for (int k = 0; k < config.controlHorizon; ++k) {
        v = std::max(0.0, v - config.speedIncrementLimit);
        out.push_back({v, 0.0});
    }
    return out;
}

struct PlanResult {
    sim::Action applied;
    NlpSolution solution;
};

/// Solve with explicit targets; substitutes fallback_brake when infeasible.
inline PlanResult plan_to_targets(const sim::TrafficSnapshot& snapshot,
                                  std::vector<TargetPose> targets,
                                  const interaction::TerminalSet& terminal,
                                  const LaneTargetWeights& weights, PlannerState& state,
                                  const MpcConfig& config, const sim::MapInfo& map) {
    const sim::Action previousAction =
        state.lastApplied.value_or(sim::Action{snapshot.ego.speed, 0.0});
    const auto obstacles = predict_obstacles(snapshot, config.predictionHorizon, config.dt);
    const NlpProblem problem =
        build_problem(snapshot, std::move(targets), obstacles, config, map, previousAction);
    const auto init = warm_start(terminal, weights, state.previous, snapshot.ego, map, config);
    NlpSolution sol = solve(problem, init, config);
    if (!sol.feasible) {
        sol.actions = fallback_brake(snapshot, config);
        const ProblemEvaluator ev(problem);
        const auto x = to_decision_vector(sol.actions);
        const auto states = ev.rollout(x);
        sol.predictedStates.assign(states.begin() + 1, states.end());
        sol.cost = ev.cost(x);
        sol.fallbackUsed = true;
        state.previous.reset();
    } else {
        state.previous = sol;
    }
    PlanResult out{sol.actions.front(), std::move(sol)};
    state.lastApplied = out.applied;
    return out;
}

/**
 * One receding-horizon step: impact selection, IDM terminal rollout,
 * tendency weights, problem build, warm start, solve. Only the first action
 * is applied.
 */
inline PlanResult plan(const sim::TrafficSnapshot& snapshot, double epsilon, PlannerState& state,
                       const MpcConfig& config, const interaction::IdmParams& idm,
                       const sim::MapInfo& map) {
    const auto terminal = interaction::rollout_terminal_states(
        snapshot, map, idm, config.predictionHorizon, config.dt, config.virtualLeadGap);
    const auto weights = tendency_to_weights(std::clamp(epsilon, -1.0, 1.0), map.laneCount);
    auto targets = targets_from_terminal_set(terminal, weights, snapshot.ego, map, config);
    return plan_to_targets(snapshot, std::move(targets), terminal, weights, state, config, map);
}

inline sim::ControlDiagnostics diagnostics_of(const NlpSolution& sol) {
    return {sol.feasible, sol.iterations, sol.kktResidual, sol.fallbackUsed};
}

}  // namespace td::mpc
