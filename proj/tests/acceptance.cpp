#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "td/harness/drivers.hpp"
#include "td/harness/scenarios.hpp"
#include "td/interaction/idm.hpp"
#include "td/interaction/rollout.hpp"
#include "td/learner/reward.hpp"
#include "td/mpc/planner.hpp"
#include "td/sim/collision.hpp"
#include "idm_oracle.hpp"
#include "mpc_oracle.hpp"
#include "rect_oracle.hpp"
#include "sac_gradcheck.hpp"

namespace fs = std::filesystem;
using namespace td;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Row {
    int id;
    std::string name;
    Outcome outcome;
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << x;
    return os.str();
}

void progress(const std::string& msg) { std::cerr << "[acceptance] " << msg << std::endl; }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open '" + p.string() + "'");
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

sim::TrafficSnapshot snapshot_of(std::vector<sim::VehicleState> traffic, sim::VehicleState ego) {
    sim::TrafficSnapshot s;
    s.ego = ego;
    s.traffic = std::move(traffic);
    for (std::size_t i = 0; i < s.traffic.size(); ++i) s.ids.push_back(static_cast<int>(i) + 1);
    return s;
}

mpc::NlpProblem problem_for(const sim::TrafficSnapshot& s, double eps, const mpc::MpcConfig& cfg,
                            const sim::MapInfo& map, sim::Action prev) {
    const auto terminal =
        interaction::rollout_terminal_states(s, map, interaction::IdmParams{}, cfg.predictionHorizon, cfg.dt);
    return mpc::build_problem(s, terminal, mpc::tendency_to_weights(eps, map.laneCount),
                              mpc::predict_obstacles(s, cfg.predictionHorizon, cfg.dt), cfg, map, prev);
}

struct Training {
    std::vector<harness::DriverResult> results;
    std::vector<std::vector<learner::LogRow>> logs;
    std::vector<double> seconds;
};

Training train_seeds(const fs::path& out, const std::vector<std::uint64_t>& seeds) {
    Training t;
    for (auto seed : seeds) {
        progress("training the tendency policy, seed " + std::to_string(seed));
        harness::DriverOptions o;
        o.config = harness::default_scenario();
        o.seed = seed;
        o.runs = 0;
        o.out = out / ("proposed_seed" + std::to_string(seed));
        const auto start = std::chrono::steady_clock::now();
        t.results.push_back(harness::run_proposed(o));
        t.seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        t.logs.push_back(harness::read_training_log(o.out / "training_log.csv"));
        progress("  done in " + fmt(t.seconds.back(), 5) + " s");
    }
    return t;
}

Outcome collision_free_training(const Training& t) {
    const auto& m = t.results.front().metrics;
    if (!t.results.front().ok) return {false, "seed 1 aborted: " + m["train"]["aborted"].get<std::string>()};
    const int collisions = m["train"]["collisions"].get<int>();
    const int steps = m["train"]["steps"].get<int>();
    int others = 0;
    for (std::size_t i = 1; i < t.results.size(); ++i) {
        others += t.results[i].ok ? t.results[i].metrics["train"]["collisions"].get<int>() : 1;
    }
    const bool pass = steps == 10000 && collisions == 0 && t.seconds.front() <= 1800.0;
    return {pass, "seed 1: " + std::to_string(steps) + " steps, " + std::to_string(collisions) +
                      " collisions, " + fmt(t.seconds.front(), 4) + " s; other seeds: " +
                      std::to_string(others) + " collisions"};
}

Outcome convergence_shape(const Training& t) {
    int passed = 0;
    std::string detail;
    for (std::size_t i = 0; i < t.logs.size(); ++i) {
        const auto c = harness::convergence(t.logs[i]);
        passed += c.passed ? 1 : 0;
        detail += "seed " + std::to_string(i + 1) + ": plateau " + fmt(c.plateau) + ", reached at " +
                  (c.reachedAt >= 0 ? std::to_string(c.reachedAt) : std::string("never")) + "; ";
    }
    return {passed >= 2, std::to_string(passed) + "/3 seeds converge by step 8000 (" + detail + ")"};
}

Outcome table_ordering(const fs::path& out, const fs::path& checkpoint) {
    harness::DriverOptions o;
    o.config = harness::default_scenario();
    o.seed = 1;
    o.runs = 30;

    progress("evaluating the tendency policy over 30 episodes");
    o.out = out / "eval_proposed";
    o.checkpoint = checkpoint;
    const auto prop = harness::run_proposed(o).metrics["eval"];

    progress("evaluating the baseline MPC over 30 episodes");
    o.out = out / "eval_baseline_mpc";
    o.checkpoint.reset();
    const auto bmpc = harness::run_baseline_mpc(o).metrics["eval"];

    progress("training and evaluating the baseline RL agent");
    o.out = out / "eval_baseline_rl";
    const auto brl = harness::run_baseline_rl(o).metrics["eval"];

    const double pc = prop["collision_rate"], pv = prop["avg_speed_mean"];
    const int pdone = prop["completions"];
    const double mv = bmpc["avg_speed_mean"];
    const double rc = brl["collision_rate"];
    const bool pass = pc == 0.0 && pdone >= 29 && pv > mv && rc > pc;
    return {pass, "proposed: collisions " + fmt(100 * pc) + "%, completed " + std::to_string(pdone) +
                      "/30, speed " + fmt(pv) + " m/s; baseline MPC speed " + fmt(mv) +
                      " m/s; baseline RL collisions " + fmt(100 * rc) + "%"};
}

Outcome idm_oracle_match() {
    const interaction::IdmParams p;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> v(0.0, 15.0), dv(-10.0, 10.0), gap(0.5, 200.0);
    double worstAccel = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double a = v(rng), b = dv(rng), c = gap(rng);
        worstAccel = std::max(worstAccel, std::abs(interaction::idm_accel(a, b, c, p) - idm_oracle::accel(a, b, c)));
    }
    const sim::MapInfo map{3, 3.5};
    std::uniform_real_distribution<double> lon(-40, 170), sp(0, 12);
    std::uniform_int_distribution<int> lane(0, 2), count(0, 12);
    double worstRollout = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<sim::VehicleState> cars;
        const int n = count(rng);
        for (int i = 0; i < n; ++i) cars.push_back({lon(rng), 3.5 * lane(rng), 0, sp(rng)});
        const sim::VehicleState ego{0, 3.5 * lane(rng), 0, sp(rng)};
        const auto set = interaction::rollout_terminal_states(snapshot_of(cars, ego), map, p, 30, 0.1);
        for (int l = 0; l < 3; ++l) {
            double gl = 180.0, vlead = 12.0;
            for (const auto& c : cars) {
                if (c.lon >= 0 && map.lane_of(c.lat) == l && c.lon < gl) {
                    gl = c.lon;
                    vlead = c.speed;
                }
            }
            const double ref = idm_oracle::rollout(ego.speed, vlead, gl, 30, 0.1);
            worstRollout = std::max(worstRollout, std::abs(set.entries[static_cast<std::size_t>(l)].gapAhead - ref));
        }
    }
    const double hand = interaction::idm_accel(10.0, 2.0, 40.0, p);
    const bool pass = worstAccel <= 1e-9 && worstRollout <= 1e-9 && std::abs(hand - 0.293) <= 0.005;
    return {pass, "max |accel - ref| " + fmt(worstAccel) + ", max |gap - ref| " + fmt(worstRollout) +
                      ", hand case " + fmt(hand, 6) + " m/s^2"};
}

Outcome nlp_certificate() {
    const mpc::MpcConfig cfg;
    const sim::MapInfo map{3, 3.5};
    std::mt19937_64 rng(77);
    int feasible = 0, bad = 0;
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const auto sc = oracle::random_scenario(rng, map);
        const auto p = problem_for(sc.snapshot, sc.epsilon, cfg, map, sc.previous);
        const auto init = mpc::warm_start({}, mpc::tendency_to_weights(sc.epsilon, 3), std::nullopt,
                                          sc.snapshot.ego, map, cfg);
        const auto sol = mpc::solve(p, init, cfg);
        if (!sol.feasible) continue;
        ++feasible;
        const double v = oracle::max_violation(p, sol.actions);
        worst = std::max(worst, v);
        if (v > cfg.kktTolerance + 1e-9) ++bad;
    }
    const auto s = snapshot_of({}, {0, 3.5, 0, 12});
    const auto p = problem_for(s, 0.0, cfg, map, {12, 0});
    const auto sol = mpc::solve(
        p, mpc::warm_start({}, mpc::tendency_to_weights(0, 3), std::nullopt, s.ego, map, cfg), cfg);
    const double gap = std::abs(sol.cost - oracle::straight_line_optimum(p));
    const bool pass = bad == 0 && feasible > 0 && sol.feasible && gap <= 1e-6;
    return {pass, std::to_string(feasible) + "/200 feasible, " + std::to_string(bad) +
                      " fail re-verification (worst " + fmt(worst) + "); empty-road cost gap " + fmt(gap)};
}

Outcome gradient_checks() {
    std::mt19937_64 rc(101), rp(202);
    double worstCritic = 0.0, worstPolicy = 0.0;
    for (int i = 0; i < 100; ++i) {
        worstCritic = std::max(worstCritic, gradcheck::critic_gradient_error(gradcheck::random_case(rc)));
        worstPolicy = std::max(worstPolicy, gradcheck::policy_gradient_error(gradcheck::random_case(rp)));
    }
    return {worstCritic < 1e-4 && worstPolicy < 1e-4,
            "worst relative error: critic " + fmt(worstCritic) + ", policy " + fmt(worstPolicy)};
}

Outcome two_circle_conservative() {
    const double r2 = sim::two_circle_radius_sq(5.0, 2.0);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> pos(-6, 6), head(-std::numbers::pi, std::numbers::pi);
    int overlapping = 0, missed = 0;
    while (overlapping < 10000) {
        const sim::VehicleState a{pos(rng), pos(rng), head(rng), 0};
        const sim::VehicleState b{a.lon + pos(rng), a.lat + pos(rng), head(rng), 0};
        if (!rect_oracle::overlap(a, b, 5, 2)) continue;
        ++overlapping;
        if (!sim::check_collision(a, b, 5, 2)) ++missed;
    }
    return {missed == 0 && std::abs(r2 - 2.5625) < 1e-15,
            "R^2 = " + fmt(r2, 6) + ", " + std::to_string(missed) + " of 10000 overlapping pairs missed"};
}

Outcome reward_arithmetic() {
    const learner::RewardCoeffs c;
    const double rs = learner::speed_reward(c.vMax, c);
    const double rn = learner::proximity_reward(4.0, 3.0, c);
    const double rdt = learner::tendency_reward(learner::FreeSide::Left, -1.0, c);
    const bool pass = std::abs(rs - 1.3) <= 1e-12 && std::abs(rn + 0.0032) <= 1e-12 && std::abs(rdt - 30.0) <= 1e-12;
    return {pass, "r_s " + fmt(rs, 17) + ", r_n " + fmt(rn, 17) + ", r_dt " + fmt(rdt, 17)};
}

Outcome determinism(const fs::path& out) {
    harness::DriverOptions o;
    o.config = harness::default_scenario();
    o.seed = 7;
    o.runs = 2;
    o.steps = 1500;
    std::vector<fs::path> dirs{out / "determinism_a", out / "determinism_b"};
    for (const auto& d : dirs) {
        progress("determinism run into " + d.string());
        o.out = d;
        harness::run_proposed(o);
    }
    bool same = true;
    for (const char* f : {"metrics.json", "training_log.csv"}) {
        same = same && slurp(dirs[0] / f) == slurp(dirs[1] / f);
    }
    return {same, std::string("metrics.json and training_log.csv ") + (same ? "identical" : "differ") +
                      " across two seed-7 runs (1500 steps, 2 evaluation episodes)"};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
    fs::create_directories(out);
    std::vector<Row> rows;
    auto run = [&](int id, const std::string& name, const std::function<Outcome()>& f) {
        Outcome o;
        try {
            o = f();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        std::cout << (o.pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << o.detail << std::endl;
        rows.push_back({id, name, o});
    };

    run(4, "IDM oracle", idm_oracle_match);
    run(5, "NLP feasibility certificate", nlp_certificate);
    run(6, "gradient checks", gradient_checks);
    run(7, "two-circle conservativeness", two_circle_conservative);
    run(8, "reward arithmetic", reward_arithmetic);
    run(9, "determinism", [&] { return determinism(out); });

    Training training;
    bool trained = false;
    try {
        training = train_seeds(out, {1, 2, 3});
        trained = true;
        harness::run_curve({out / "proposed_seed1" / "training_log.csv", out / "proposed_seed2" / "training_log.csv",
                            out / "proposed_seed3" / "training_log.csv"},
                           out / "curve");
    } catch (const std::exception& e) {
        progress(std::string("training failed: ") + e.what());
    }
    run(1, "collision-free training", [&]() -> Outcome {
        if (!trained) return {false, "training did not finish"};
        return collision_free_training(training);
    });
    run(2, "convergence shape", [&]() -> Outcome {
        if (!trained) return {false, "training did not finish"};
        return convergence_shape(training);
    });
    run(3, "dynamic-flow ordering", [&]() -> Outcome {
        if (!trained || !training.results.front().ok) return {false, "no trained seed-1 agent"};
        return table_ordering(out, out / "proposed_seed1" / "agent.ckpt");
    });

    harness::Json report = harness::Json::array();
    int failed = 0;
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
    for (const auto& r : rows) {
        report.push_back({{"criterion", r.id}, {"name", r.name}, {"pass", r.outcome.pass}, {"detail", r.outcome.detail}});
        failed += r.outcome.pass ? 0 : 1;
    }
    harness::write_text(out / "acceptance.json", harness::to_text(report));
    std::cout << (rows.size() - failed) << "/" << rows.size() << " criteria pass" << std::endl;
    return failed == 0 ? 0 : 1;
}
