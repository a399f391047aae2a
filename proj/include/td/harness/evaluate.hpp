#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "td/harness/baseline_rl.hpp"
#include "td/interaction/rollout.hpp"
#include "td/learner/agent.hpp"
#include "td/learner/trainer.hpp"
#include "td/mpc/planner.hpp"
#include "td/sim/world.hpp"

namespace td::harness {

struct EvalSummary {
    int runs = 0;
    int collisions = 0;
    int completions = 0;
    int aborted = 0;
    double collisionRate = 0.0;
    double completionRate = 0.0;
    double avgSpeedMean = 0.0;
    double avgSpeedStd = 0.0;  // sample standard deviation
    std::vector<double> episodeSpeeds;

    friend bool operator==(const EvalSummary&, const EvalSummary&) = default;
};

inline nlohmann::ordered_json to_json(const EvalSummary& s) {
    nlohmann::ordered_json j;
    j["runs"] = s.runs;
    j["collisions"] = s.collisions;
    j["completions"] = s.completions;
    j["aborted"] = s.aborted;
    j["collision_rate"] = s.collisionRate;
    j["completion_rate"] = s.completionRate;
    j["avg_speed_mean"] = s.avgSpeedMean;
    j["avg_speed_std"] = s.avgSpeedStd;
    j["episode_avg_speeds"] = s.episodeSpeeds;
    return j;
}

/// Aggregate per-episode outcomes; aborted episodes count as incomplete.
inline EvalSummary summarise(const std::vector<sim::EpisodeResult>& results) {
    if (results.empty()) throw std::invalid_argument("summarise: need at least one run");
    EvalSummary s;
    s.runs = static_cast<int>(results.size());
    for (const auto& r : results) {
        s.collisions += r.collided ? 1 : 0;
        s.completions += r.completed ? 1 : 0;
        s.aborted += r.aborted ? 1 : 0;
        s.episodeSpeeds.push_back(r.avgSpeed);
    }
    s.collisionRate = double(s.collisions) / s.runs;
    s.completionRate = double(s.completions) / s.runs;
    double sum = 0.0;
    for (double v : s.episodeSpeeds) sum += v;
    s.avgSpeedMean = sum / s.runs;
    if (s.runs > 1) {
        double ss = 0.0;
        for (double v : s.episodeSpeeds) ss += (v - s.avgSpeedMean) * (v - s.avgSpeedMean);
        s.avgSpeedStd = std::sqrt(ss / (s.runs - 1));
    }
    return s;
}

/// Builds a fresh per-episode controller (planner state, tracker, ...).
using PolicyFactory = std::function<sim::Policy()>;

/// Episode i uses its own stream seeded from (seed, i).
inline std::mt19937_64 episode_rng(std::uint64_t seed, int index) {
    std::seed_seq seq{seed, static_cast<std::uint64_t>(index), std::uint64_t{0x6576616c}};
    return std::mt19937_64(seq);
}

struct EvalRun {
    EvalSummary summary;
    std::vector<sim::EpisodeResult> episodes;
};

inline EvalRun eval_policy(const PolicyFactory& factory, const sim::SimConfig& sim,
                           const interaction::IdmParams& idm, int runs, std::uint64_t seed,
                           bool recordTrajectories = false) {
    if (runs < 1) throw std::invalid_argument("eval_policy: runs must be >= 1");
    EvalRun out;
    sim::EpisodeOptions opts;
    opts.recordTrajectory = recordTrajectories;
    for (int i = 0; i < runs; ++i) {
        auto rng = episode_rng(seed, i);
        try {
            out.episodes.push_back(sim::run_episode(factory(), sim, rng, idm, opts));
        } catch (const sim::EpisodeAborted& e) {
            out.episodes.push_back(e.result);
        }
    }
    out.summary = summarise(out.episodes);
    return out;
}

inline sim::Decision to_decision(const mpc::PlanResult& r) {
    return {r.applied, mpc::diagnostics_of(r.solution)};
}

/// Proposed controller: deterministic tendency tanh(mean) fed to the MPC planner.
inline PolicyFactory proposed_policy(const learner::SacAgent& agent, const learner::TrainConfig& cfg) {
    return [&agent, cfg] {
        auto state = std::make_shared<mpc::PlannerState>();
        return sim::Policy([&agent, cfg, state](const sim::TrafficSnapshot& snap) {
            const auto map = cfg.sim.map();
            const double eps = agent.mean_action(learner::observe(snap, map, cfg.reward)).front();
            return to_decision(mpc::plan(snap, eps, *state, cfg.mpc, cfg.idm, map));
        });
    };
}

/// Fixed-tendency controller, e.g. a constant epsilon for ablations.
inline PolicyFactory fixed_tendency_policy(double epsilon, const learner::TrainConfig& cfg) {
    return [epsilon, cfg] {
        auto state = std::make_shared<mpc::PlannerState>();
        return sim::Policy([epsilon, cfg, state](const sim::TrafficSnapshot& snap) {
            return to_decision(mpc::plan(snap, epsilon, *state, cfg.mpc, cfg.idm, cfg.sim.map()));
        });
    };
}

struct BaselineTargets {
    std::vector<mpc::TargetPose> targets;
    mpc::LaneTargetWeights weights;
};

/**
 * Baseline MPC targets: all weight on the middle lane, placed a virtual-lead gap
 * beyond the distance covered at maximum speed over the horizon so the
 * terminal term always rewards more speed.
 */
inline BaselineTargets baseline_mpc_targets(const sim::TrafficSnapshot& snap, const mpc::MpcConfig& config,
                                            const sim::MapInfo& map) {
    BaselineTargets out;
    const int middle = map.laneCount / 2;
    out.weights.weights.assign(static_cast<std::size_t>(map.laneCount), 0.0);
    out.weights.weights[static_cast<std::size_t>(middle)] = 1.0;
    const double reach = config.maxSpeed * config.predictionHorizon * config.dt + config.virtualLeadGap;
    for (int j = 0; j < map.laneCount; ++j) {
        out.targets.push_back(
            {snap.ego.lon + reach, map.lane_center(j), 0.0, out.weights.weights[static_cast<std::size_t>(j)]});
    }
    return out;
}

/// Same constraints, solver and fallback as the proposed planner; only the targets differ.
inline mpc::PlanResult baseline_mpc_plan(const sim::TrafficSnapshot& snap, mpc::PlannerState& state,
                                         const mpc::MpcConfig& config,
                                         const interaction::IdmParams& idm, const sim::MapInfo& map) {
    auto [targets, weights] = baseline_mpc_targets(snap, config, map);
    const auto terminal = interaction::rollout_terminal_states(snap, map, idm, config.predictionHorizon,
                                                               config.dt, config.virtualLeadGap);
    return mpc::plan_to_targets(snap, std::move(targets), terminal, weights, state, config, map);
}

inline PolicyFactory baseline_mpc_policy(const learner::TrainConfig& cfg) {
    return [cfg] {
        auto state = std::make_shared<mpc::PlannerState>();
        return sim::Policy([cfg, state](const sim::TrafficSnapshot& snap) {
            return to_decision(baseline_mpc_plan(snap, *state, cfg.mpc, cfg.idm, cfg.sim.map()));
        });
    };
}

/// Trained comparison agent with deterministic actions and the polynomial tracker.
inline PolicyFactory baseline_rl_policy(const learner::SacAgent& agent, const learner::TrainConfig& cfg,
                                        const BaselineRlConfig& rl) {
    return [&agent, cfg, rl] {
        auto tracker = std::make_shared<PolynomialTracker>(rl, cfg.sim.map(), cfg.sim.dt,
                                                           cfg.sim.egoMaxSpeed);
        return sim::Policy([&agent, cfg, tracker](const sim::TrafficSnapshot& snap) {
            const auto action = agent.mean_action(baseline_observe(snap, cfg.sim.map(), cfg.reward));
            const auto [ds, ax] = tracker->scale(action);
            return sim::Decision{tracker->control(snap.ego, ds, ax), {}};
        });
    };
}

}  // namespace td::harness
