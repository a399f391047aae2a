#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "td/harness/baseline_rl.hpp"
#include "td/learner/trainer.hpp"

namespace td::harness {

using Json = nlohmann::ordered_json;

/// Every setting a CLI run needs. Vehicle geometry, dt and speed limit are owned by `train.sim`.
struct ScenarioConfig {
    learner::TrainConfig train;
    BaselineRlConfig baselineRl;

    /// Copy the shared simulator settings into the planner.
    void sync() {
        train.mpc.dt = train.sim.dt;
        train.mpc.wheelbase = train.sim.wheelbase;
        train.mpc.vehicleLength = train.sim.vehicleLength;
        train.mpc.vehicleWidth = train.sim.vehicleWidth;
        train.mpc.followDistance = train.sim.followDistance;
        train.mpc.maxSpeed = train.sim.egoMaxSpeed;
    }

    void validate() const {
        train.validate();
        baselineRl.validate();
    }
};

namespace detail {

struct Field {
    std::function<Json(const ScenarioConfig&)> get;
    std::function<void(ScenarioConfig&, const Json&)> set;
};

template <class T>
T as(const Json& j, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, double>) {
            if (!j.is_number()) throw std::invalid_argument("expected a number");
        } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
            if (!j.is_number_integer()) throw std::invalid_argument("expected an integer");
        } else if constexpr (std::is_same_v<T, bool>) {
            if (!j.is_boolean()) throw std::invalid_argument("expected a boolean");
        }
        return j.get<T>();
    } catch (const std::exception& e) {
        throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
}

template <class Owner, class T>
Field scalar(Owner& (*owner)(ScenarioConfig&), const Owner& (*cowner)(const ScenarioConfig&),
             T Owner::*member, std::string key) {
    return {[=](const ScenarioConfig& c) { return Json(cowner(c).*member); },
            [=](ScenarioConfig& c, const Json& j) { owner(c).*member = as<T>(j, key); }};
}

inline Json obstacles_to_json(const std::vector<sim::StaticObstacle>& v) {
    Json out = Json::array();
    for (const auto& o : v) out.push_back({{"lon", o.lon}, {"lat", o.lat}});
    return out;
}

inline Json traffic_to_json(const std::vector<sim::TrafficSpec>& v) {
    Json out = Json::array();
    for (const auto& t : v) out.push_back({{"lon", t.lon}, {"lane", t.lane}, {"speed", t.speed}});
    return out;
}

inline Json events_to_json(const std::vector<sim::ScriptedEvent>& v) {
    Json out = Json::array();
    for (const auto& e : v) {
        out.push_back({{"vehicle_id", e.vehicleId},
                       {"time", e.time},
                       {"target_lane", e.targetLane},
                       {"duration", e.duration}});
    }
    return out;
}

inline void expect_keys(const Json& item, const std::string& key, std::initializer_list<const char*> allowed) {
    if (!item.is_object()) throw std::invalid_argument("config key '" + key + "': entries must be objects");
    for (const auto& [k, _] : item.items()) {
        bool ok = false;
        for (const char* a : allowed) ok = ok || k == a;
        if (!ok) throw std::invalid_argument("config key '" + key + "': unknown field '" + k + "'");
    }
}

template <class T>
T member_or(const Json& item, const char* name, T fallback, const std::string& key) {
    return item.contains(name) ? as<T>(item.at(name), key + "." + name) : fallback;
}

inline void require_array(const Json& j, const std::string& key) {
    if (!j.is_array()) throw std::invalid_argument("config key '" + key + "': expected a list");
}

// clang-format off
inline sim::SimConfig& sim_of(ScenarioConfig& c) { return c.train.sim; }
inline const sim::SimConfig& csim_of(const ScenarioConfig& c) { return c.train.sim; }
inline mpc::MpcConfig& mpc_of(ScenarioConfig& c) { return c.train.mpc; }
inline const mpc::MpcConfig& cmpc_of(const ScenarioConfig& c) { return c.train.mpc; }
inline interaction::IdmParams& idm_of(ScenarioConfig& c) { return c.train.idm; }
inline const interaction::IdmParams& cidm_of(const ScenarioConfig& c) { return c.train.idm; }
inline learner::RewardCoeffs& reward_of(ScenarioConfig& c) { return c.train.reward; }
inline const learner::RewardCoeffs& creward_of(const ScenarioConfig& c) { return c.train.reward; }
inline learner::LearnerConfig& learner_of(ScenarioConfig& c) { return c.train.learner; }
inline const learner::LearnerConfig& clearner_of(const ScenarioConfig& c) { return c.train.learner; }
inline BaselineRlConfig& rl_of(ScenarioConfig& c) { return c.baselineRl; }
inline const BaselineRlConfig& crl_of(const ScenarioConfig& c) { return c.baselineRl; }
// clang-format on

inline const std::vector<std::pair<std::string, Field>>& fields() {
    static const std::vector<std::pair<std::string, Field>> table = [] {
        std::vector<std::pair<std::string, Field>> t;
        auto S = [&](const std::string& k, auto member) { t.emplace_back(k, scalar(sim_of, csim_of, member, k)); };
        auto M = [&](const std::string& k, auto member) { t.emplace_back(k, scalar(mpc_of, cmpc_of, member, k)); };
        auto I = [&](const std::string& k, auto member) { t.emplace_back(k, scalar(idm_of, cidm_of, member, k)); };
        auto R = [&](const std::string& k, auto member) { t.emplace_back(k, scalar(reward_of, creward_of, member, k)); };
        auto L = [&](const std::string& k, auto member) { t.emplace_back(k, scalar(learner_of, clearner_of, member, k)); };
        auto B = [&](const std::string& k, auto member) { t.emplace_back(k, scalar(rl_of, crl_of, member, k)); };
        using sim::SimConfig;
        S("lane_count", &SimConfig::laneCount);
        S("lane_width", &SimConfig::laneWidth);
        S("dt", &SimConfig::dt);
        S("episode_limit", &SimConfig::episodeLimit);
        S("spawn_range", &SimConfig::spawnRange);
        S("speed_min", &SimConfig::speedMin);
        S("speed_max", &SimConfig::speedMax);
        S("wheelbase", &SimConfig::wheelbase);
        S("vehicle_length", &SimConfig::vehicleLength);
        S("vehicle_width", &SimConfig::vehicleWidth);
        S("seed", &SimConfig::seed);
        S("route_length", &SimConfig::routeLength);
        S("traffic_count", &SimConfig::trafficCount);
        S("spawn_min_gap", &SimConfig::spawnMinGap);
        S("ego_lane", &SimConfig::egoLane);
        S("ego_speed", &SimConfig::egoSpeed);
        S("ego_max_speed", &SimConfig::egoMaxSpeed);
        S("follow_distance", &SimConfig::followDistance);
        S("blocked_margin", &SimConfig::blockedMargin);
        S("reactive_traffic", &SimConfig::reactiveTraffic);
        S("traffic_max_brake", &SimConfig::trafficMaxBrake);
        t.emplace_back("static_obstacles",
                       Field{[](const ScenarioConfig& c) { return obstacles_to_json(c.train.sim.staticObstacles); },
                             [](ScenarioConfig& c, const Json& j) {
                                 require_array(j, "static_obstacles");
                                 c.train.sim.staticObstacles.clear();
                                 for (const auto& o : j) {
                                     expect_keys(o, "static_obstacles", {"lon", "lat"});
                                     c.train.sim.staticObstacles.push_back(
                                         {member_or(o, "lon", 0.0, "static_obstacles"),
                                          member_or(o, "lat", 0.0, "static_obstacles")});
                                 }
                             }});
        t.emplace_back("traffic",
                       Field{[](const ScenarioConfig& c) { return traffic_to_json(c.train.sim.traffic); },
                             [](ScenarioConfig& c, const Json& j) {
                                 require_array(j, "traffic");
                                 c.train.sim.traffic.clear();
                                 for (const auto& o : j) {
                                     expect_keys(o, "traffic", {"lon", "lane", "speed"});
                                     c.train.sim.traffic.push_back({member_or(o, "lon", 0.0, "traffic"),
                                                                    member_or(o, "lane", 0, "traffic"),
                                                                    member_or(o, "speed", 0.0, "traffic")});
                                 }
                             }});
        t.emplace_back("scripted_events",
                       Field{[](const ScenarioConfig& c) { return events_to_json(c.train.sim.scriptedEvents); },
                             [](ScenarioConfig& c, const Json& j) {
                                 require_array(j, "scripted_events");
                                 c.train.sim.scriptedEvents.clear();
                                 for (const auto& o : j) {
                                     expect_keys(o, "scripted_events", {"vehicle_id", "time", "target_lane", "duration"});
                                     sim::ScriptedEvent e;
                                     e.vehicleId = member_or(o, "vehicle_id", e.vehicleId, "scripted_events");
                                     e.time = member_or(o, "time", e.time, "scripted_events");
                                     e.targetLane = member_or(o, "target_lane", e.targetLane, "scripted_events");
                                     e.duration = member_or(o, "duration", e.duration, "scripted_events");
                                     c.train.sim.scriptedEvents.push_back(e);
                                 }
                             }});

        using mpc::MpcConfig;
        M("mpc.prediction_horizon", &MpcConfig::predictionHorizon);
        M("mpc.control_horizon", &MpcConfig::controlHorizon);
        M("mpc.control_weight", &MpcConfig::controlWeight);
        M("mpc.increment_weight", &MpcConfig::incrementWeight);
        M("mpc.proximity_weight", &MpcConfig::proximityWeight);
        M("mpc.speed_increment_limit", &MpcConfig::speedIncrementLimit);
        M("mpc.steer_increment_limit", &MpcConfig::steerIncrementLimit);
        M("mpc.max_steer", &MpcConfig::maxSteer);
        M("mpc.collision_margin", &MpcConfig::collisionMargin);
        M("mpc.safety_buffer", &MpcConfig::safetyBuffer);
        M("mpc.kkt_tolerance", &MpcConfig::kktTolerance);
        M("mpc.constraint_backoff", &MpcConfig::constraintBackoff);
        M("mpc.max_iterations", &MpcConfig::maxIterations);
        M("mpc.inner_iterations", &MpcConfig::innerIterations);
        M("mpc.virtual_lead_gap", &MpcConfig::virtualLeadGap);
        M("mpc.obstacle_range", &MpcConfig::obstacleRange);

        using interaction::IdmParams;
        I("idm.safe_time_headway", &IdmParams::safeTimeHeadway);
        I("idm.max_accel", &IdmParams::maxAccel);
        I("idm.accel_exponent", &IdmParams::accelExponent);
        I("idm.desired_decel", &IdmParams::desiredDecel);
        I("idm.min_gap", &IdmParams::minGap);
        I("idm.desired_speed", &IdmParams::desiredSpeed);

        using learner::RewardCoeffs;
        R("reward.speed_factor", &RewardCoeffs::speedFactor);
        R("reward.proximity_factor", &RewardCoeffs::proximityFactor);
        R("reward.tendency_factor", &RewardCoeffs::tendencyFactor);
        R("reward.tendency_offset", &RewardCoeffs::tendencyOffset);
        R("reward.v_max", &RewardCoeffs::vMax);
        R("reward.d_max", &RewardCoeffs::dMax);
        R("reward.min_separation", &RewardCoeffs::minSeparation);
        R("reward.lateral_clamp", &RewardCoeffs::lateralClamp);

        using learner::LearnerConfig;
        L("learner.gamma", &LearnerConfig::gamma);
        L("learner.batch_size", &LearnerConfig::batchSize);
        L("learner.total_steps", &LearnerConfig::totalSteps);
        L("learner.critic_learning_rate", &LearnerConfig::criticLearningRate);
        L("learner.policy_learning_rate", &LearnerConfig::policyLearningRate);
        L("learner.temperature_learning_rate", &LearnerConfig::temperatureLearningRate);
        L("learner.target_smoothing", &LearnerConfig::targetSmoothing);
        L("learner.target_entropy", &LearnerConfig::targetEntropy);
        L("learner.initial_alpha", &LearnerConfig::initialAlpha);
        L("learner.warmup_steps", &LearnerConfig::warmupSteps);
        L("learner.update_every", &LearnerConfig::updateEvery);
        L("learner.replay_capacity", &LearnerConfig::replayCapacity);
        t.emplace_back("learner.hidden",
                       Field{[](const ScenarioConfig& c) { return Json(c.train.learner.hidden); },
                             [](ScenarioConfig& c, const Json& j) {
                                 require_array(j, "learner.hidden");
                                 std::vector<int> h;
                                 for (const auto& w : j) h.push_back(as<int>(w, "learner.hidden"));
                                 c.train.learner.hidden = h;
                             }});

        B("baseline_rl.horizon", &BaselineRlConfig::horizon);
        B("baseline_rl.lateral_range", &BaselineRlConfig::lateralRange);
        B("baseline_rl.max_accel", &BaselineRlConfig::maxAccel);
        B("baseline_rl.max_steer", &BaselineRlConfig::maxSteer);
        B("baseline_rl.kp_lat", &BaselineRlConfig::kpLat);
        B("baseline_rl.ki_lat", &BaselineRlConfig::kiLat);
        B("baseline_rl.kd_lat", &BaselineRlConfig::kdLat);
        B("baseline_rl.kp_lon", &BaselineRlConfig::kpLon);
        B("baseline_rl.speed_weight", &BaselineRlConfig::speedWeight);
        B("baseline_rl.comfort_weight", &BaselineRlConfig::comfortWeight);
        B("baseline_rl.collision_penalty", &BaselineRlConfig::collisionPenalty);
        B("baseline_rl.total_steps", &BaselineRlConfig::totalSteps);
        return t;
    }();
    return table;
}

inline void flatten(const Json& j, const std::string& prefix, std::map<std::string, Json>& out) {
    for (const auto& [k, v] : j.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (v.is_object()) {
            flatten(v, key, out);
        } else if (!out.emplace(key, v).second) {
            throw std::invalid_argument("config key '" + key + "' given twice");
        }
    }
}

}  // namespace detail

/// Apply a JSON document on top of `base`. Nested objects and dotted keys are equivalent.
inline ScenarioConfig parse_config(const Json& doc, ScenarioConfig base = {}) {
    if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
    std::map<std::string, Json> flat;
    detail::flatten(doc, "", flat);
    const auto& table = detail::fields();
    for (const auto& [key, value] : flat) {
        auto it = std::find_if(table.begin(), table.end(), [&](const auto& f) { return f.first == key; });
        if (it == table.end()) throw std::invalid_argument("config: unknown key '" + key + "'");
        it->second.set(base, value);
    }
    base.sync();
    base.validate();
    return base;
}

inline ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config: " + path + ": " + e.what());
    }
    return parse_config(doc);
}

/// Flat key -> value dump of every setting, in a fixed order.
inline Json dump_config(const ScenarioConfig& c) {
    Json out = Json::object();
    for (const auto& [key, field] : detail::fields()) out[key] = field.get(c);
    return out;
}

/// Keys whose values differ between two dumps.
inline std::vector<std::string> config_diff(const Json& a, const Json& b) {
    std::vector<std::string> out;
    for (const auto& [k, v] : a.items()) {
        if (!b.contains(k) || b.at(k) != v) out.push_back(k);
    }
    for (const auto& [k, _] : b.items()) {
        if (!a.contains(k)) out.push_back(k);
    }
    return out;
}

}  // namespace td::harness
