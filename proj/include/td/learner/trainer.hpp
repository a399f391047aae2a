#pragma once

#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "td/interaction/idm.hpp"
#include "td/interaction/impact.hpp"
#include "td/learner/agent.hpp"
#include "td/learner/replay.hpp"
#include "td/learner/reward.hpp"
#include "td/mpc/config.hpp"
#include "td/mpc/planner.hpp"
#include "td/sim/config.hpp"
#include "td/sim/world.hpp"

namespace td::learner {

/// Every module's settings for one training or evaluation run.
struct TrainConfig {
    sim::SimConfig sim;
    mpc::MpcConfig mpc;
    interaction::IdmParams idm;
    RewardCoeffs reward;
    LearnerConfig learner;

    void validate() const {
        sim.validate();
        mpc.validate();
        idm.validate();
        reward.validate();
        learner.validate();
    }
};

struct LogRow {
    int step = 0;
    int episode = 0;
    double episodeReturn = 0.0;  // cumulative within the episode
    double speedReward = 0.0;
    double proximityReward = 0.0;
    double tendencyReward = 0.0;
    double epsilon = 0.0;
    double alpha = 0.0;
    double criticLoss = 0.0;
    double policyLoss = 0.0;
    bool fallbackUsed = false;
    bool collision = false;
};

inline constexpr const char* kTrainingLogHeader =
    "step,episode,return,r_s,r_n,r_dt,epsilon,alpha,critic_loss,policy_loss,fallback_used,collision";

inline void write_training_log(std::ostream& os, const std::vector<LogRow>& rows) {
    os << kTrainingLogHeader << '\n';
    const auto old = os.precision(10);
    for (const auto& r : rows) {
        os << r.step << ',' << r.episode << ',' << r.episodeReturn << ',' << r.speedReward << ','
           << r.proximityReward << ',' << r.tendencyReward << ',' << r.epsilon << ',' << r.alpha << ','
           << r.criticLoss << ',' << r.policyLoss << ',' << (r.fallbackUsed ? 1 : 0) << ','
           << (r.collision ? 1 : 0) << '\n';
    }
    os.precision(old);
}

/// Independent streams for the environment and the agent from one seed.
struct SeedStreams {
    std::mt19937_64 env;
    std::mt19937_64 agent;

    explicit SeedStreams(std::uint64_t seed) {
        std::seed_seq envSeq{seed, std::uint64_t{0x656e76}};
        std::seed_seq agentSeq{seed, std::uint64_t{0x6167656e74}};
        env.seed(envSeq);
        agent.seed(agentSeq);
    }
};

/// Flattened policy state of a snapshot.
inline std::vector<double> observe(const sim::TrafficSnapshot& snapshot, const sim::MapInfo& map,
                                   const RewardCoeffs& coeffs) {
    const auto impact = interaction::select_impact_vehicles(snapshot, map);
    return build_policy_state(impact, snapshot.ego, map, coeffs).features();
}

class TrainingAborted : public std::runtime_error {
public:
    TrainingAborted(const std::string& what, std::vector<LogRow> partial)
        : std::runtime_error(what), log(std::move(partial)) {}
    std::vector<LogRow> log;
};

struct TrainOptions {
    bool abortOnCollision = true;
    std::function<void(const LogRow&)> onStep;
};

struct TrainResult {
    std::vector<LogRow> log;
    int collisions = 0;
    int episodes = 0;
    int fallbacks = 0;
    int updates = 0;
};

/**
 * Step-level soft actor-critic loop around the MPC planner: observe, sample a
 * tendency, plan, step, reward, store, and after warm-up update once per
 * `updateEvery` steps. Collisions abort unless disabled in `options`.
 */
inline TrainResult train(const TrainConfig& config, SacAgent& agent, std::uint64_t seed,
                         const TrainOptions& options = {}) {
    config.validate();
    const sim::MapInfo map = config.sim.map();
    if (agent.state_dim() != 2 * map.laneCount || agent.action_dim() != 1) {
        throw std::invalid_argument("train: agent shape does not match lane count");
    }
    const LearnerConfig& lc = config.learner;
    SeedStreams rng(seed);
    ReplayBuffer buffer(static_cast<std::size_t>(lc.replayCapacity));
    sim::World world(config.sim, config.idm);
    world.reset(rng.env);
    mpc::PlannerState planner;

    TrainResult result;
    result.log.reserve(static_cast<std::size_t>(lc.totalSteps));
    int episode = 0;
    double episodeReturn = 0.0;
    UpdateStats last{};
    for (int step = 1; step <= lc.totalSteps; ++step) {
        const sim::TrafficSnapshot snap = world.snapshot();
        const auto state = observe(snap, map, config.reward);
        const double eps = agent.sample_action(state, rng.agent).front();
        const auto planned = mpc::plan(snap, eps, planner, config.mpc, config.idm, map);
        const sim::StepStatus status = world.step(planned.applied);

        const sim::TrafficSnapshot next = world.snapshot();
        const auto impact = interaction::select_impact_vehicles(next, map);
        const RewardTerms r = compute_reward(next, impact, eps, map, config.reward);
        const auto nextState = build_policy_state(impact, next.ego, map, config.reward).features();
        const bool collided = status == sim::StepStatus::Collided;
        const bool done = collided || status == sim::StepStatus::Completed;
        buffer.push({state, {eps}, r.total, nextState, done});
        episodeReturn += r.total;

        if (step > lc.warmupSteps && step % lc.updateEvery == 0 &&
            buffer.size() >= static_cast<std::size_t>(lc.batchSize)) {
            last = agent.update(buffer, rng.agent);
            ++result.updates;
        }

        LogRow row{step, episode, episodeReturn, r.speed, r.proximity, r.tendency, eps,
                   agent.alpha(), last.criticLoss, last.policyLoss,
                   planned.solution.fallbackUsed, collided};
        result.log.push_back(row);
        if (options.onStep) options.onStep(row);
        if (row.fallbackUsed) ++result.fallbacks;
        if (collided) {
            ++result.collisions;
            if (options.abortOnCollision) {
                throw TrainingAborted("train: collision at step " + std::to_string(step) +
                                          " (episode " + std::to_string(episode) + ")",
                                      std::move(result.log));
            }
        }
        if (status != sim::StepStatus::Running) {
            ++episode;
            episodeReturn = 0.0;
            world.reset(rng.env);
            planner = {};
        }
    }
    result.episodes = result.log.empty() ? 0 : result.log.back().episode + 1;
    return result;
}

}  // namespace td::learner
