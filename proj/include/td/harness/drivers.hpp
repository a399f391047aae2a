#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "td/harness/baseline_rl.hpp"
#include "td/harness/config_io.hpp"
#include "td/harness/evaluate.hpp"
#include "td/harness/learning_curve.hpp"
#include "td/learner/trainer.hpp"
#include "td/sim/trajectory_csv.hpp"

namespace td::harness {

namespace fs = std::filesystem;

/// Common driver inputs; unset optionals fall back to the scenario config.
struct DriverOptions {
    ScenarioConfig config;
    std::uint64_t seed = 1;
    int runs = 0;                      // evaluation episodes after training (0 = none)
    std::optional<int> steps;          // training steps override
    fs::path out = "out";
    std::optional<fs::path> checkpoint;  // load instead of training
    std::optional<double> epsilon;       // fixed tendency instead of a learned one
};

inline void write_text(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << text;
}

inline std::string to_text(const Json& j) { return j.dump(2) + "\n"; }

inline std::vector<learner::LogRow> read_training_log(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != learner::kTrainingLogHeader) {
        throw std::invalid_argument("training log: bad header");
    }
    std::vector<learner::LogRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 12) throw std::invalid_argument("training log: expected 12 columns");
        try {
            learner::LogRow r;
            r.step = std::stoi(cells[0]);
            r.episode = std::stoi(cells[1]);
            r.episodeReturn = std::stod(cells[2]);
            r.speedReward = std::stod(cells[3]);
            r.proximityReward = std::stod(cells[4]);
            r.tendencyReward = std::stod(cells[5]);
            r.epsilon = std::stod(cells[6]);
            r.alpha = std::stod(cells[7]);
            r.criticLoss = std::stod(cells[8]);
            r.policyLoss = std::stod(cells[9]);
            r.fallbackUsed = cells[10] == "1";
            r.collision = cells[11] == "1";
            rows.push_back(r);
        } catch (const std::logic_error&) {
            throw std::invalid_argument("training log: bad number in '" + line + "'");
        }
    }
    return rows;
}

inline std::vector<learner::LogRow> read_training_log(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "'");
    return read_training_log(f);
}

struct DriverResult {
    Json metrics;
    bool ok = true;  // false when training aborted
};

namespace detail {

inline void write_log_and_curve(const fs::path& out, const std::vector<learner::LogRow>& log) {
    std::ostringstream os;
    learner::write_training_log(os, log);
    write_text(out / "training_log.csv", os.str());
    if (!episode_returns(log).empty()) {
        std::ostringstream curve;
        write_learning_curve(curve, {log});
        write_text(out / "learning_curve.csv", curve.str());
    }
}

inline Json train_json(const learner::TrainResult& r, int steps) {
    Json j;
    j["steps"] = steps;
    j["episodes"] = r.episodes;
    j["completed_episodes"] = episode_returns(r.log).size();
    j["collisions"] = r.collisions;
    j["fallbacks"] = r.fallbacks;
    j["updates"] = r.updates;
    return j;
}

inline Json evaluate_into(const PolicyFactory& policy, const DriverOptions& o, const fs::path& out) {
    const auto& t = o.config.train;
    const auto run = eval_policy(policy, t.sim, t.idm, o.runs, o.seed, true);
    std::ostringstream traj;
    sim::write_trajectory_csv(traj, run.episodes.front().trajectory);
    write_text(out / "trajectory.csv", traj.str());
    return to_json(run.summary);
}

inline void save_agent(const learner::SacAgent& agent, const fs::path& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    agent.save(f);
}

inline void load_agent(learner::SacAgent& agent, const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "'");
    agent.load(f);
}

inline void prepare(const DriverOptions& o, const std::string& controller) {
    fs::create_directories(o.out);
    Json cfg = dump_config(o.config);
    cfg["controller"] = controller;
    write_text(o.out / "config.json", to_text(cfg));
}

inline ScenarioConfig with_steps(ScenarioConfig c, const std::optional<int>& steps) {
    if (steps) {
        if (*steps < 0) throw std::invalid_argument("--steps must be >= 0");
        c.train.learner.totalSteps = *steps;
        c.baselineRl.totalSteps = *steps;
    }
    return c;
}

}  // namespace detail

/// Train the tendency policy (unless a checkpoint is given), then optionally evaluate it.
inline DriverResult run_proposed(DriverOptions o, const std::string& name = "proposed") {
    o.config = detail::with_steps(o.config, o.steps);
    o.config.validate();
    detail::prepare(o, name);
    const auto& t = o.config.train;
    DriverResult res;
    res.metrics["controller"] = name;
    res.metrics["seed"] = o.seed;

    if (o.epsilon) {
        if (o.runs < 1) throw std::invalid_argument("a fixed tendency needs --runs >= 1");
        res.metrics["epsilon"] = *o.epsilon;
        res.metrics["eval"] = detail::evaluate_into(fixed_tendency_policy(*o.epsilon, t), o, o.out);
        write_text(o.out / "metrics.json", to_text(res.metrics));
        return res;
    }

    std::mt19937_64 init(o.seed);
    learner::SacAgent agent(2 * t.sim.laneCount, t.learner, init);
    if (o.checkpoint) {
        detail::load_agent(agent, *o.checkpoint);
    } else {
        try {
            const auto r = learner::train(t, agent, o.seed);
            detail::write_log_and_curve(o.out, r.log);
            res.metrics["train"] = detail::train_json(r, t.learner.totalSteps);
        } catch (const learner::TrainingAborted& e) {
            detail::write_log_and_curve(o.out, e.log);
            res.metrics["train"] = {{"aborted", e.what()}, {"steps", e.log.size()}};
            res.ok = false;
            write_text(o.out / "metrics.json", to_text(res.metrics));
            return res;
        }
        detail::save_agent(agent, o.out / "agent.ckpt");
    }
    if (o.runs > 0) res.metrics["eval"] = detail::evaluate_into(proposed_policy(agent, t), o, o.out);
    write_text(o.out / "metrics.json", to_text(res.metrics));
    return res;
}

inline DriverResult run_baseline_mpc(DriverOptions o) {
    o.config.validate();
    if (o.runs < 1) throw std::invalid_argument("baseline-mpc needs --runs >= 1");
    detail::prepare(o, "baseline_mpc");
    DriverResult res;
    res.metrics["controller"] = "baseline_mpc";
    res.metrics["seed"] = o.seed;
    res.metrics["eval"] = detail::evaluate_into(baseline_mpc_policy(o.config.train), o, o.out);
    write_text(o.out / "metrics.json", to_text(res.metrics));
    return res;
}

inline DriverResult run_baseline_rl(DriverOptions o) {
    o.config = detail::with_steps(o.config, o.steps);
    o.config.validate();
    detail::prepare(o, "baseline_rl");
    const auto& t = o.config.train;
    DriverResult res;
    res.metrics["controller"] = "baseline_rl";
    res.metrics["seed"] = o.seed;
    std::mt19937_64 init(o.seed);
    learner::SacAgent agent(baseline_state_dim(t.sim.map()), t.learner, init, 2);
    if (o.checkpoint) {
        detail::load_agent(agent, *o.checkpoint);
    } else {
        const auto r = train_baseline_rl(t, o.config.baselineRl, agent, o.seed);
        detail::write_log_and_curve(o.out, r.log);
        res.metrics["train"] = detail::train_json(r, o.config.baselineRl.totalSteps);
        detail::save_agent(agent, o.out / "agent.ckpt");
    }
    if (o.runs > 0) {
        res.metrics["eval"] =
            detail::evaluate_into(baseline_rl_policy(agent, t, o.config.baselineRl), o, o.out);
    }
    write_text(o.out / "metrics.json", to_text(res.metrics));
    return res;
}

/// Learning curve over several training logs (one per seed).
inline void run_curve(const std::vector<fs::path>& logs, const fs::path& out) {
    if (logs.empty()) throw std::invalid_argument("curve needs at least one --log");
    std::vector<std::vector<learner::LogRow>> all;
    for (const auto& p : logs) all.push_back(read_training_log(p));
    fs::create_directories(out);
    std::ostringstream os;
    write_learning_curve(os, all);
    write_text(out / "learning_curve.csv", os.str());
}

}  // namespace td::harness
