#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "td/harness/baseline_rl.hpp"
#include "td/harness/config_io.hpp"
#include "td/harness/scenarios.hpp"
#include "td/harness/evaluate.hpp"
#include "td/harness/learning_curve.hpp"

using namespace td::harness;
using td::learner::LogRow;
using td::sim::EpisodeResult;
using td::sim::MapInfo;
using td::sim::TrafficSnapshot;
using td::sim::VehicleState;

namespace {

TrafficSnapshot snap(VehicleState ego, std::vector<VehicleState> traffic) {
    TrafficSnapshot s;
    s.ego = ego;
    s.traffic = std::move(traffic);
    for (std::size_t i = 0; i < s.traffic.size(); ++i) s.ids.push_back(static_cast<int>(i) + 1);
    return s;
}

// Coefficients from the 6x6 boundary-condition system.
std::array<double, 6> quintic_oracle(double y0, double v0, double a0, double y1, double v1, double a1,
                                     double T) {
    Eigen::Matrix<double, 6, 6> A;
    Eigen::Matrix<double, 6, 1> b;
    A.setZero();
    for (int i = 0; i < 6; ++i) {
        A(0, i) = i == 0 ? 1 : 0;
        A(1, i) = i == 1 ? 1 : 0;
        A(2, i) = i == 2 ? 2 : 0;
        A(3, i) = std::pow(T, i);
        A(4, i) = i >= 1 ? i * std::pow(T, i - 1) : 0;
        A(5, i) = i >= 2 ? i * (i - 1) * std::pow(T, i - 2) : 0;
    }
    b << y0, v0, a0, y1, v1, a1;
    const Eigen::Matrix<double, 6, 1> c = A.colPivHouseholderQr().solve(b);
    return {c[0], c[1], c[2], c[3], c[4], c[5]};
}

std::vector<LogRow> log_from_episodes(const std::vector<std::pair<int, double>>& episodes) {
    std::vector<LogRow> log;
    int step = 0;
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const auto [len, ret] = episodes[e];
        for (int k = 1; k <= len; ++k) {
            LogRow r;
            r.step = ++step;
            r.episode = static_cast<int>(e);
            r.episodeReturn = ret * k / len;
            log.push_back(r);
        }
    }
    return log;
}

}  // namespace

TEST(Quintic, MatchesBoundaryConditionSolve) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0), t(0.5, 5.0);
    for (int n = 0; n < 200; ++n) {
        const double y0 = u(rng), v0 = u(rng), a0 = u(rng), y1 = u(rng), v1 = u(rng), a1 = u(rng);
        const double T = t(rng);
        const Quintic q = quintic_between(y0, v0, a0, y1, v1, a1, T);
        const auto ref = quintic_oracle(y0, v0, a0, y1, v1, a1, T);
        for (int i = 0; i < 6; ++i) EXPECT_NEAR(q.c[i], ref[i], 1e-9 * std::max(1.0, std::abs(ref[i])));
        EXPECT_NEAR(q.pos(0), y0, 1e-9);
        EXPECT_NEAR(q.vel(0), v0, 1e-9);
        EXPECT_NEAR(q.acc(0), a0, 1e-9);
        EXPECT_NEAR(q.pos(T), y1, 1e-9);
        EXPECT_NEAR(q.vel(T), v1, 1e-9);
        EXPECT_NEAR(q.acc(T), a1, 1e-9);
    }
}

TEST(Quintic, LaneChangeEndsAtRest) {
    const Quintic q = quintic_between(0.0, 0.0, 0.0, 3.5, 0.0, 0.0, 3.0);
    EXPECT_NEAR(q.pos(3.0), 3.5, 1e-12);
    EXPECT_NEAR(q.vel(3.0), 0.0, 1e-12);
    EXPECT_NEAR(q.acc(3.0), 0.0, 1e-12);
    EXPECT_NEAR(q.pos(1.5), 1.75, 1e-12);  // odd symmetry about the midpoint
    EXPECT_THROW(quintic_between(0, 0, 0, 1, 0, 0, 0.0), std::invalid_argument);
}

TEST(Tracker, ZeroActionDrivesStraightAtConstantSpeed) {
    const MapInfo map{3, 3.5};
    PolynomialTracker tracker(BaselineRlConfig{}, map, 0.1, 12.0);
    VehicleState ego{10.0, 3.5, 0.0, 8.0};
    for (int k = 0; k < 20; ++k) {
        const auto [ds, ax] = tracker.scale({0.0, 0.0});
        const auto a = tracker.control(ego, ds, ax);
        EXPECT_DOUBLE_EQ(a.speed, 8.0);
        EXPECT_DOUBLE_EQ(a.steer, 0.0);
        ego = td::sim::step_kinematics(ego, a, 0.1, 2.9);
    }
    EXPECT_DOUBLE_EQ(ego.lat, 3.5);
    EXPECT_DOUBLE_EQ(ego.heading, 0.0);
}

TEST(Tracker, EndpointIsClampedToOuterLaneCentres) {
    const MapInfo map{3, 3.5};
    PolynomialTracker tracker(BaselineRlConfig{}, map, 0.1, 12.0);
    EXPECT_DOUBLE_EQ(tracker.endpoint({0, 0.0, 0, 8}, -3.5), 0.0);
    EXPECT_DOUBLE_EQ(tracker.endpoint({0, 7.0, 0, 8}, 3.5), 7.0);
    EXPECT_DOUBLE_EQ(tracker.endpoint({0, 3.4, 0, 8}, 2.0), 5.5);
    const auto [ds, ax] = tracker.scale({1.0, -1.0});
    EXPECT_DOUBLE_EQ(ds, 3.5);
    EXPECT_DOUBLE_EQ(ax, -3.0);
    EXPECT_THROW(tracker.scale({0.5}), std::invalid_argument);
}

TEST(Tracker, SteersTowardEndpointAndSettles) {
    const MapInfo map{3, 3.5};
    PolynomialTracker tracker(BaselineRlConfig{}, map, 0.1, 12.0);
    VehicleState ego{0.0, 0.0, 0.0, 10.0};
    // Target fixed at the middle lane centre.
    for (int k = 0; k < 150; ++k) {
        const double ds = 3.5 - map.lane_center(map.lane_of(ego.lat));
        const auto a = tracker.control(ego, ds, 0.0);
        if (k == 0) {
            EXPECT_GT(a.steer, 0.0);
        }
        ego = td::sim::step_kinematics(ego, a, 0.1, 2.9);
    }
    EXPECT_NEAR(ego.lat, 3.5, 0.05);
    EXPECT_NEAR(ego.heading, 0.0, 0.01);
}

TEST(BaselineReward, Terms) {
    BaselineRlConfig c;
    const auto r = baseline_reward(7.5, {0.2, 0.5}, 0.175, false, c, 15.0);
    EXPECT_DOUBLE_EQ(r.speed, 0.5);
    EXPECT_DOUBLE_EQ(r.comfort, -0.1 * (0.25 + 0.25));
    EXPECT_DOUBLE_EQ(r.collision, 0.0);
    EXPECT_DOUBLE_EQ(baseline_reward(0.0, {0, 0}, 0, true, c, 15.0).total(), -50.0);
}

TEST(BaselineObserve, AppendsSpeedOffsetHeading) {
    const MapInfo map{3, 3.5};
    const td::learner::RewardCoeffs coeffs;
    const auto s = baseline_observe(snap({0, 3.5 + 0.875, 0.1, 7.5}, {}), map, coeffs);
    ASSERT_EQ(static_cast<int>(s.size()), baseline_state_dim(map));
    EXPECT_DOUBLE_EQ(s[6], 0.5);
    EXPECT_DOUBLE_EQ(s[7], 0.75);
    EXPECT_DOUBLE_EQ(s[8], 0.1);
}

TEST(BaselineRl, SmokeTrainingIsDeterministic) {
    td::learner::TrainConfig cfg;
    cfg.learner.warmupSteps = 20;
    cfg.learner.batchSize = 16;
    cfg.learner.replayCapacity = 500;
    cfg.learner.hidden = {8, 8};
    BaselineRlConfig rl;
    rl.totalSteps = 80;
    auto run = [&] {
        std::mt19937_64 init(3);
        td::learner::SacAgent agent(baseline_state_dim(cfg.sim.map()), cfg.learner, init, 2);
        return train_baseline_rl(cfg, rl, agent, 3);
    };
    const auto a = run();
    const auto b = run();
    ASSERT_EQ(a.log.size(), 80u);
    EXPECT_EQ(a.updates, 60);
    std::ostringstream sa, sb;
    td::learner::write_training_log(sa, a.log);
    td::learner::write_training_log(sb, b.log);
    EXPECT_EQ(sa.str(), sb.str());

    std::mt19937_64 init(3);
    td::learner::SacAgent wrong(6, cfg.learner, init, 1);
    EXPECT_THROW(train_baseline_rl(cfg, rl, wrong, 3), std::invalid_argument);
}

TEST(Summary, AllCollideStub) {
    std::vector<EpisodeResult> r(4);
    for (auto& e : r) {
        e.collided = true;
        e.avgSpeed = 5.0;
    }
    const auto s = summarise(r);
    EXPECT_EQ(s.runs, 4);
    EXPECT_DOUBLE_EQ(s.collisionRate, 1.0);
    EXPECT_DOUBLE_EQ(s.completionRate, 0.0);
    EXPECT_DOUBLE_EQ(s.avgSpeedStd, 0.0);
    EXPECT_THROW(summarise({}), std::invalid_argument);
}

TEST(Summary, RatesAndSampleStd) {
    std::vector<EpisodeResult> r(3);
    r[0].completed = true;
    r[0].avgSpeed = 8.0;
    r[1].completed = true;
    r[1].avgSpeed = 10.0;
    r[2].collided = true;
    r[2].avgSpeed = 12.0;
    const auto s = summarise(r);
    EXPECT_DOUBLE_EQ(s.avgSpeedMean, 10.0);
    EXPECT_DOUBLE_EQ(s.avgSpeedStd, 2.0);
    // Rates times runs are integers.
    EXPECT_DOUBLE_EQ(s.collisionRate * s.runs, 1.0);
    EXPECT_DOUBLE_EQ(s.completionRate * s.runs, 2.0);
    const auto j = to_json(s);
    EXPECT_EQ(j["runs"], 3);
    EXPECT_EQ(j["collisions"], 1);
}

TEST(EvalPolicy, SameSeedsGiveIdenticalSummaries) {
    td::sim::SimConfig sim;
    sim.episodeLimit = 3.0;
    PolicyFactory stub = [] {
        return td::sim::Policy([](const TrafficSnapshot& s) {
            return td::sim::Decision{{s.ego.speed, 0.0}, {}};
        });
    };
    const auto a = eval_policy(stub, sim, {}, 4, 7);
    const auto b = eval_policy(stub, sim, {}, 4, 7);
    EXPECT_EQ(a.summary, b.summary);
    EXPECT_EQ(a.episodes, b.episodes);
    EXPECT_EQ(a.summary.runs, 4);
    EXPECT_THROW(eval_policy(stub, sim, {}, 0, 7), std::invalid_argument);
}

TEST(EvalPolicy, ThrowingPolicyCountsAsAborted) {
    td::sim::SimConfig sim;
    sim.episodeLimit = 3.0;
    PolicyFactory bad = [] {
        return td::sim::Policy([](const TrafficSnapshot&) -> td::sim::Decision {
            throw std::runtime_error("boom");
        });
    };
    const auto r = eval_policy(bad, sim, {}, 2, 1);
    EXPECT_EQ(r.summary.aborted, 2);
    EXPECT_DOUBLE_EQ(r.summary.completionRate, 0.0);
}

TEST(BaselineMpc, EmptyRoadAcceleratesInMiddleLane) {
    const MapInfo map{3, 3.5};
    td::mpc::MpcConfig cfg;
    td::mpc::PlannerState state;
    const auto r = baseline_mpc_plan(snap({0.0, 3.5, 0.0, 8.0}, {}), state, cfg, {}, map);
    ASSERT_TRUE(r.solution.feasible);
    EXPECT_NEAR(r.applied.speed, 11.0, 1e-6);  // capped by the speed increment
    EXPECT_NEAR(r.applied.steer, 0.0, 1e-6);
    for (const auto& p : r.solution.predictedStates) EXPECT_NEAR(p.lat, 3.5, 1e-6);
}

TEST(BaselineMpc, EmptyRoadCruiseMatchesStraightLineOptimum) {
    const MapInfo map{3, 3.5};
    td::mpc::MpcConfig cfg;
    td::mpc::PlannerState state;
    const auto s = snap({0.0, 3.5, 0.0, 12.0}, {});
    const auto r = baseline_mpc_plan(s, state, cfg, {}, map);
    ASSERT_TRUE(r.solution.feasible);
    for (const auto& a : r.solution.actions) {
        EXPECT_NEAR(a.speed, 12.0, 1e-9);
        EXPECT_NEAR(a.steer, 0.0, 1e-9);
    }
    // Closed-form cost of holding (v_max, 0) against the single middle-lane target.
    const double lonN = 12.0 * cfg.predictionHorizon * cfg.dt;
    const double target = lonN + cfg.virtualLeadGap;
    const double expected = (lonN - target) * (lonN - target) + cfg.controlHorizon * cfg.controlWeight * 144.0;
    EXPECT_NEAR(r.solution.cost, expected, 1e-6);
}

TEST(BaselineMpc, BlockedMiddleLaneFollowsLead) {
    const MapInfo map{3, 3.5};
    td::mpc::MpcConfig cfg;
    td::mpc::PlannerState state;
    td::sim::SimConfig sim;
    sim.trafficCount = 0;
    sim.egoLane = 1;
    sim.egoSpeed = 10.0;
    sim.traffic = {{25.0, 1, 6.0}};
    td::sim::World world(sim);
    std::mt19937_64 rng(1);
    world.reset(rng);
    double minGap = 1e9;
    for (int k = 0; k < 60; ++k) {
        const auto r = baseline_mpc_plan(world.snapshot(), state, cfg, {}, map);
        ASSERT_NE(world.step(r.applied), td::sim::StepStatus::Collided);
        minGap = std::min(minGap, world.traffic()[0].state.lon - world.ego().lon);
    }
    EXPECT_NEAR(world.ego().lat, 3.5, 0.5);
    EXPECT_NEAR(world.ego().speed, 6.0, 1.0);
    EXPECT_GE(minGap, cfg.vehicleLength + cfg.followDistance - 1e-6);
}

TEST(BaselineMpc, SharesConstraintsWithProposedPlanner) {
    const MapInfo map{3, 3.5};
    td::mpc::MpcConfig cfg;
    const auto s = snap({0.0, 0.0, 0.0, 9.0}, {{30.0, 0.0, 0.0, 7.0}, {-20.0, 3.5, 0.0, 10.0}});
    const auto obstacles = td::mpc::predict_obstacles(s, cfg.predictionHorizon, cfg.dt);
    const auto terminal = td::interaction::rollout_terminal_states(s, map, {}, cfg.predictionHorizon, cfg.dt);
    const auto weights = td::mpc::tendency_to_weights(-1.0, 3);
    const td::sim::Action prev{9.0, 0.0};
    const auto proposed = td::mpc::build_problem(s, terminal, weights, obstacles, cfg, map, prev);
    const auto base = td::mpc::build_problem(s, baseline_mpc_targets(s, cfg, map).targets, obstacles, cfg, map, prev);
    EXPECT_EQ(proposed.config.clearance_sq(), base.config.clearance_sq());
    EXPECT_EQ(proposed.counts().scalar, base.counts().scalar);
    EXPECT_EQ(proposed.followObstacle, base.followObstacle);
    EXPECT_EQ(proposed.latMin, base.latMin);
    EXPECT_EQ(proposed.latMax, base.latMax);
    ASSERT_EQ(proposed.obstacles.size(), base.obstacles.size());
    EXPECT_NE(proposed.targets[1].weight, base.targets[1].weight);
    EXPECT_DOUBLE_EQ(base.targets[1].weight, 1.0);
}

TEST(LearningCurve, MovingAveragePrefix) {
    const auto ma = moving_average({1, 2, 3, 4, 5}, 3);
    EXPECT_DOUBLE_EQ(ma[0], 1.0);
    EXPECT_DOUBLE_EQ(ma[1], 1.5);
    EXPECT_DOUBLE_EQ(ma[2], 2.0);
    EXPECT_DOUBLE_EQ(ma[3], 3.0);
    EXPECT_DOUBLE_EQ(ma[4], 4.0);
    const auto big = moving_average({2, 4}, 20);
    EXPECT_DOUBLE_EQ(big[1], 3.0);
    EXPECT_THROW(moving_average({1}, 0), std::invalid_argument);
}

TEST(LearningCurve, SingleEpisodeGivesOneRow) {
    auto log = log_from_episodes({{5, 10.0}, {3, 0.0}});  // second episode unfinished
    const auto r = episode_returns(log);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_EQ(r[0].endStep, 5);
    EXPECT_DOUBLE_EQ(r[0].value, 10.0);
    std::ostringstream os;
    write_learning_curve(os, {log});
    std::istringstream is(os.str());
    std::string line;
    int lines = 0;
    while (std::getline(is, line)) ++lines;
    EXPECT_EQ(lines, 2);
    EXPECT_THROW(write_learning_curve(os, {log_from_episodes({{4, 1.0}})}), std::invalid_argument);
}

TEST(LearningCurve, MultiSeedMeanAndStd) {
    std::vector<std::vector<LogRow>> logs;
    for (int s = 0; s < 5; ++s) logs.push_back(log_from_episodes({{2, double(s)}, {2, 1.0}, {2, 0.0}}));
    std::ostringstream os;
    write_learning_curve(os, logs);
    std::istringstream is(os.str());
    std::string header, first;
    std::getline(is, header);
    std::getline(is, first);
    EXPECT_NE(header.find("ma_mean,ma_std"), std::string::npos);
    EXPECT_NE(header.find("return_4"), std::string::npos);
    // Episode 0 returns 0..4: mean 2, sample std sqrt(2.5).
    EXPECT_NE(first.find(",2," + [] {
        std::ostringstream o;
        o.precision(10);
        o << std::sqrt(2.5);
        return o.str();
    }() + ",5"), std::string::npos);
}

TEST(LearningCurve, ConvergenceCountsFullWindowsOnly) {
    // Rising then flat: reaches the plateau level well before the deadline.
    std::vector<std::pair<int, double>> eps;
    for (int i = 0; i < 50; ++i) eps.push_back({200, i < 10 ? 10.0 * i : 100.0});
    const auto ok = convergence(log_from_episodes(eps), 8000, 2000, 0.9, 5);
    EXPECT_TRUE(ok.passed);
    EXPECT_NEAR(ok.plateau, 100.0, 1e-12);
    EXPECT_LE(ok.reachedAt, 3000);

    // A lucky first episode followed by a late rise does not count.
    std::vector<std::pair<int, double>> late;
    for (int i = 0; i < 50; ++i) late.push_back({200, i == 0 ? 100.0 : (i < 38 ? 10.0 : 100.0)});
    EXPECT_FALSE(convergence(log_from_episodes(late), 8000, 1000, 0.9, 5).passed);

    // Too few episodes by the deadline to fill one window.
    std::vector<std::pair<int, double>> longEps;
    for (int i = 0; i < 12; ++i) longEps.push_back({1000, 100.0});
    EXPECT_FALSE(convergence(log_from_episodes(longEps), 8000, 2000, 0.9, 10).passed);

    // Negative plateau: the threshold lies below it.
    std::vector<std::pair<int, double>> neg;
    for (int i = 0; i < 50; ++i) neg.push_back({200, i < 10 ? -300.0 : -100.0});
    const auto n = convergence(log_from_episodes(neg), 8000, 2000, 0.9, 5);
    EXPECT_TRUE(n.passed);
    EXPECT_NEAR(n.plateau, -100.0, 1e-12);
    EXPECT_EQ(n.reachedAt, 200 * 15);
}

TEST(Config, NestedAndDottedKeysAgree) {
    const auto a = parse_config(Json::parse(R"({"lane_count": 2, "mpc": {"proximity_weight": 4.0},
                                                 "learner": {"hidden": [32, 32]}})"));
    const auto b = parse_config(Json::parse(R"({"lane_count": 2, "mpc.proximity_weight": 4.0,
                                                 "learner.hidden": [32, 32]})"));
    EXPECT_EQ(dump_config(a), dump_config(b));
    EXPECT_EQ(a.train.sim.laneCount, 2);
    EXPECT_DOUBLE_EQ(a.train.mpc.proximityWeight, 4.0);
    EXPECT_EQ(a.train.learner.hidden, (std::vector<int>{32, 32}));
}

TEST(Config, DumpRoundTrips) {
    ScenarioConfig c;
    c.train.sim.staticObstacles = {{40.0, 3.5}, {60.0, 0.0}};
    c.train.sim.scriptedEvents = {{2, 5.6, 1, 2.0}};
    c.train.sim.traffic = {{30.0, 0, 9.0}};
    c.baselineRl.kpLat = 0.7;
    const Json d = dump_config(c);
    EXPECT_EQ(dump_config(parse_config(d)), d);
    EXPECT_TRUE(config_diff(d, dump_config(parse_config(d))).empty());
}

TEST(Config, SharedSettingsFlowIntoPlanner) {
    const auto c = parse_config(Json::parse(R"({"dt": 0.05, "wheelbase": 2.5, "ego_max_speed": 14.0,
                                                 "episode_limit": 10.0})"));
    EXPECT_DOUBLE_EQ(c.train.mpc.dt, 0.05);
    EXPECT_DOUBLE_EQ(c.train.mpc.wheelbase, 2.5);
    EXPECT_DOUBLE_EQ(c.train.mpc.maxSpeed, 14.0);
}

TEST(Config, RejectsBadInput) {
    EXPECT_THROW(parse_config(Json::parse(R"({"lane_cnt": 3})")), std::invalid_argument);
    EXPECT_THROW(parse_config(Json::parse(R"({"lane_count": "three"})")), std::invalid_argument);
    EXPECT_THROW(parse_config(Json::parse(R"({"lane_count": 2.5})")), std::invalid_argument);
    EXPECT_THROW(parse_config(Json::parse(R"({"lane_count": 0})")), std::invalid_argument);
    EXPECT_THROW(parse_config(Json::parse(R"({"static_obstacles": [{"lon": 1, "y": 2}]})")),
                 std::invalid_argument);
    EXPECT_THROW(parse_config(Json::parse(R"({"mpc": {"proximity_weight": 1}, "mpc.proximity_weight": 2})")),
                 std::invalid_argument);
    EXPECT_THROW(parse_config(Json::parse("[1, 2]")), std::invalid_argument);
    EXPECT_THROW(load_config("/nonexistent/config.json"), std::runtime_error);
}

TEST(Config, DiffListsChangedKeys) {
    ScenarioConfig a, b;
    b.train.reward.tendencyFactor = 10.0;
    const auto d = config_diff(dump_config(a), dump_config(b));
    ASSERT_EQ(d.size(), 1u);
    EXPECT_EQ(d[0], "reward.tendency_factor");
}

TEST(Config, ShippedFilesMatchScenarioBuilders) {
    const std::string dir = TD_CONFIG_DIR;
    EXPECT_EQ(dump_config(load_config(dir + "/default.json")), dump_config(default_scenario()));
    EXPECT_EQ(dump_config(load_config(dir + "/static.json")), dump_config(static_scenario(false)));
    EXPECT_EQ(dump_config(load_config(dir + "/static_blocked.json")), dump_config(static_scenario(true)));
    EXPECT_EQ(dump_config(load_config(dir + "/dynamic.json")), dump_config(dynamic_scenario()));
}
