#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "td/interaction/impact.hpp"
#include "td/interaction/rollout.hpp"
#include "td/mpc/config.hpp"
#include "td/mpc/weights.hpp"
#include "td/sim/config.hpp"
#include "td/sim/vehicle.hpp"
#include "td/sim/world.hpp"

namespace td::mpc {

struct Pose {
    double lon = 0.0;
    double lat = 0.0;
    double heading = 0.0;

    friend bool operator==(const Pose&, const Pose&) = default;
};

/// Poses at prediction steps 1..N_p.
using PoseSequence = std::vector<Pose>;

/// Constant-velocity, constant-heading extrapolation of every observed vehicle.
inline std::vector<PoseSequence> predict_obstacles(const sim::TrafficSnapshot& snapshot,
                                                   int horizon, double dt) {
    if (horizon < 1) {
        throw std::invalid_argument("predict_obstacles: horizon must be >= 1");
    }
    std::vector<PoseSequence> out;
    out.reserve(snapshot.traffic.size());
    for (const auto& v : snapshot.traffic) {
        const double vl = v.speed * std::cos(v.heading);
        const double vt = v.speed * std::sin(v.heading);
        PoseSequence seq(static_cast<std::size_t>(horizon));
        for (int i = 1; i <= horizon; ++i) {
            seq[static_cast<std::size_t>(i - 1)] = Pose{v.lon + vl * i * dt, v.lat + vt * i * dt,
                                                        v.heading};
        }
        out.push_back(std::move(seq));
    }
    return out;
}

struct TargetPose {
    double lon = 0.0;
    double lat = 0.0;
    double heading = 0.0;
    double weight = 0.0;
};

/// Sizes of the constraint families. Units: one per predicted step (and obstacle).
struct ConstraintCounts {
    int dynamics = 0;    // N_c - 1, satisfied by construction (single shooting)
    int increments = 0;  // N_p boxes on (dv, d delta)
    int collision = 0;   // N_p * N_obj, four circle pairs each
    int following = 0;   // N_p when a current-lane lead exists
    int road = 0;        // N_p lateral boxes
    int scalar = 0;      // scalar inequalities actually evaluated
};

struct NlpProblem {
    MpcConfig config;
    sim::VehicleState ego;
    sim::Action previousAction;
    std::vector<TargetPose> targets;
    std::vector<PoseSequence> obstacles;
    int followObstacle = -1;  // index into obstacles, -1 if none
    double latMin = 0.0;      // bounds on the ego centre lat
    double latMax = 0.0;

    int variable_count() const { return 2 * config.controlHorizon; }

    ConstraintCounts counts() const {
        const int np = config.predictionHorizon;
        const int nc = config.controlHorizon;
        const int nobj = static_cast<int>(obstacles.size());
        ConstraintCounts c;
        c.dynamics = nc - 1;
        c.increments = np;
        c.collision = np * nobj;
        c.following = followObstacle >= 0 ? np : 0;
        c.road = np;
        c.scalar = 4 * nc + 4 * np * nobj + c.following + 2 * np;
        return c;
    }
};

/// Current-lane lead: nearest vehicle ahead in the lane nearest the ego lat.
inline int current_lane_lead(const sim::TrafficSnapshot& snapshot, const sim::MapInfo& map) {
    const int lane = map.lane_of(snapshot.ego.lat);
    int best = -1;
    for (std::size_t i = 0; i < snapshot.traffic.size(); ++i) {
        const auto& v = snapshot.traffic[i];
        if (v.lon < snapshot.ego.lon || map.lane_of(v.lat) != lane) continue;
        if (best < 0 || v.lon < snapshot.traffic[static_cast<std::size_t>(best)].lon) {
            best = static_cast<int>(i);
        }
    }
    return best;
}

/// Absolute terminal targets from the IDM terminal set.
inline std::vector<TargetPose> targets_from_terminal_set(const interaction::TerminalSet& terminal,
                                                         const LaneTargetWeights& weights,
                                                         const sim::VehicleState& ego,
                                                         const sim::MapInfo& map,
                                                         const MpcConfig& config) {
    if (terminal.entries.size() != weights.weights.size()) {
        throw std::invalid_argument("build_problem: terminal set and weights differ in length");
    }
    std::vector<TargetPose> out;
    const double horizonTime = config.predictionHorizon * config.dt;
    for (std::size_t j = 0; j < terminal.entries.size(); ++j) {
        const auto& tau = terminal.entries[j];
        const double advance =
            std::max(0.0, tau.leadSpeed * horizonTime + tau.gapAhead - config.followDistance);
        out.push_back(TargetPose{ego.lon + advance, map.lane_center(static_cast<int>(j)), 0.0,
                                 weights.weights[j]});
    }
    return out;
}

/**
 * Assemble the receding-horizon program. `obstacles` runs parallel to
 * snapshot.traffic; vehicles beyond config.obstacleRange are dropped.
 */
inline NlpProblem build_problem(const sim::TrafficSnapshot& snapshot,
                                std::vector<TargetPose> targets,
                                const std::vector<PoseSequence>& obstacles,
                                const MpcConfig& config, const sim::MapInfo& map,
                                const sim::Action& previousAction) {
    config.validate();
    if (obstacles.size() != snapshot.traffic.size()) {
        throw std::invalid_argument("build_problem: obstacle list does not match the snapshot");
    }
    if (static_cast<int>(targets.size()) != map.laneCount) {
        throw std::invalid_argument("build_problem: need one target per lane");
    }
    for (const auto& seq : obstacles) {
        if (static_cast<int>(seq.size()) != config.predictionHorizon) {
            throw std::invalid_argument("build_problem: obstacle horizon does not match N_p");
        }
    }
    NlpProblem p;
    p.config = config;
    p.ego = snapshot.ego;
    p.previousAction = previousAction;
    p.targets = std::move(targets);
    // An ego already past an edge may stay where it is.
    p.latMin = std::min(map.lat_min() + config.vehicleWidth / 2.0, snapshot.ego.lat);
    p.latMax = std::max(map.lat_max() - config.vehicleWidth / 2.0, snapshot.ego.lat);
    const int lead = current_lane_lead(snapshot, map);
    for (std::size_t i = 0; i < obstacles.size(); ++i) {
        if (std::abs(snapshot.traffic[i].lon - snapshot.ego.lon) > config.obstacleRange) continue;
        if (static_cast<int>(i) == lead) p.followObstacle = static_cast<int>(p.obstacles.size());
        p.obstacles.push_back(obstacles[i]);
    }
    return p;
}

inline NlpProblem build_problem(const sim::TrafficSnapshot& snapshot,
                                const interaction::TerminalSet& terminal,
                                const LaneTargetWeights& weights,
                                const std::vector<PoseSequence>& obstacles,
                                const MpcConfig& config, const sim::MapInfo& map,
                                const sim::Action& previousAction) {
    return build_problem(snapshot,
                         targets_from_terminal_set(terminal, weights, snapshot.ego, map, config),
                         obstacles, config, map, previousAction);
}

/// One scalar inequality g <= 0 with its first derivatives: dg/ds at `step`
/// plus up to two direct terms in the decision vector.
struct ConstraintTerm {
    double g = 0.0;
    int step = -1;
    double ds[3] = {0.0, 0.0, 0.0};
    int xa = -1;
    double ca = 0.0;
    int xb = -1;
    double cb = 0.0;
};

/**
 * Cost, constraints and derivatives of an NlpProblem.
 *
 * Decision vector x = (v_0, delta_0, ..., v_{Nc-1}, delta_{Nc-1}); action i of
 * the prediction is x[min(i, Nc-1)]. Constraints are scalar g(x) <= 0 in the
 * order: increments, collision, following, road.
 */
class ProblemEvaluator {
public:
    /// `tightening` is added to every constraint value (g + tightening <= 0).
    explicit ProblemEvaluator(const NlpProblem& problem, double tightening = 0.0)
        : p_(problem),
          tightening_(tightening),
          np_(problem.config.predictionHorizon),
          nc_(problem.config.controlHorizon),
          states_(static_cast<std::size_t>(np_ + 1)),
          adj_(static_cast<std::size_t>(np_ + 1)) {
        clearance_ = problem.config.clearance_sq();
        quarter_ = problem.config.vehicleLength / 4.0;
        followOffset_ = problem.config.followDistance + problem.config.vehicleLength;
        for (const auto& obs : p_.obstacles) {
            std::vector<double> c, sn;
            for (const auto& o : obs) {
                c.push_back(std::cos(o.heading));
                sn.push_back(std::sin(o.heading));
            }
            obsCos_.push_back(std::move(c));
            obsSin_.push_back(std::move(sn));
        }
    }

    const NlpProblem& problem() const { return p_; }
    int variable_count() const { return 2 * nc_; }
    int constraint_count() const { return p_.counts().scalar; }

    sim::Action action_at(std::span<const double> x, int i) const {
        const int k = std::min(i, nc_ - 1);
        return {x[static_cast<std::size_t>(2 * k)], x[static_cast<std::size_t>(2 * k + 1)]};
    }

    /// States s_0..s_Np by forward Euler through the bicycle model.
    std::vector<Pose> rollout(std::span<const double> x) const {
        forward(x);
        return states_;
    }

    double cost(std::span<const double> x) const { return evaluate(x, {}, 0.0, {}, nullptr); }

    std::vector<double> constraints(std::span<const double> x) const {
        std::vector<double> g;
        evaluate(x, {}, 0.0, {}, &g);
        return g;
    }

    double max_violation(std::span<const double> x) const {
        double v = 0.0;
        for (double gi : constraints(x)) v = std::max(v, gi);
        return v;
    }

    /**
     * Augmented Lagrangian f + sum (max(0, lam + mu g)^2 - lam^2) / (2 mu).
     * With an empty `lambda` this is the plain cost; with multipliers and
     * mu = 0 it is the Lagrangian f + lam'g. `grad`, when
     * non-empty, receives the gradient; `gOut` the constraint values.
     */
    double evaluate(std::span<const double> x, std::span<const double> lambda, double mu,
                    std::span<double> grad, std::vector<double>* gOut,
                    double* costOut = nullptr) const {
        const auto& cfg = p_.config;
        const bool wantGrad = !grad.empty();
        const bool withMultipliers = !lambda.empty();
        const bool augmented = withMultipliers && mu > 0.0;

        forward(x);
        if (wantGrad) {
            std::fill(grad.begin(), grad.end(), 0.0);
            std::fill(adj_.begin(), adj_.end(), Pose{});
        }

        double f = 0.0;
        {
            const Pose& sN = states_[static_cast<std::size_t>(np_)];
            for (const auto& t : p_.targets) {
                if (t.weight == 0.0) continue;
                const double el = sN.lon - t.lon;
                const double et = sN.lat - t.lat;
                const double eh = sN.heading - t.heading;
                f += t.weight * (el * el + et * et + eh * eh);
                if (wantGrad) {
                    auto& a = adj_[static_cast<std::size_t>(np_)];
                    a.lon += 2.0 * t.weight * el;
                    a.lat += 2.0 * t.weight * et;
                    a.heading += 2.0 * t.weight * eh;
                }
            }
        }
        if (cfg.proximityWeight > 0.0) {
            for (int i = 1; i <= np_; ++i) {
                const Pose& s = states_[static_cast<std::size_t>(i)];
                for (const auto& obs : p_.obstacles) {
                    const Pose& o = obs[static_cast<std::size_t>(i - 1)];
                    const double dx = s.lon - o.lon;
                    const double dy = s.lat - o.lat;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 > kProximityFloor) {
                        f += cfg.proximityWeight / d2;
                        if (wantGrad) {
                            const double k = -2.0 * cfg.proximityWeight / (d2 * d2);
                            adj_[static_cast<std::size_t>(i)].lon += k * dx;
                            adj_[static_cast<std::size_t>(i)].lat += k * dy;
                        }
                    } else {
                        f += cfg.proximityWeight / kProximityFloor;
                    }
                }
            }
        }
        f += control_terms(x, grad);
        if (costOut) *costOut = f;

        double value = f;
        std::size_t ci = 0;
        if (gOut) gOut->clear();
        for_each_constraint(x, [&](const ConstraintTerm& c) {
            if (gOut) gOut->push_back(c.g);
            if (withMultipliers) {
                const double lam = lambda[ci];
                double w = lam;
                if (augmented) {
                    w = std::max(0.0, lam + mu * c.g);
                    value += (w * w - lam * lam) / (2.0 * mu);
                } else {
                    value += lam * c.g;
                }
                if (wantGrad && w != 0.0) {
                    if (c.xa >= 0) grad[static_cast<std::size_t>(c.xa)] += w * c.ca;
                    if (c.xb >= 0) grad[static_cast<std::size_t>(c.xb)] += w * c.cb;
                    if (c.step >= 0) {
                        auto& a = adj_[static_cast<std::size_t>(c.step)];
                        a.lon += w * c.ds[0];
                        a.lat += w * c.ds[1];
                        a.heading += w * c.ds[2];
                    }
                }
            }
            ++ci;
        });

        if (wantGrad) backward(x, grad);
        return withMultipliers ? value : f;
    }

    /**
     * Second-order model of the augmented Lagrangian (mu > 0): value, exact
     * gradient and Hessian. The Hessian is the finite-difference Hessian of
     * f + w'g with w = max(0, lam + mu g) frozen, plus mu * sum grad g grad g'
     * over the constraints with w > 0.
     */
    double linearise(std::span<const double> x, std::span<const double> lambda, double mu,
                     Eigen::VectorXd& grad, Eigen::MatrixXd& hess) const {
        const int n = variable_count();
        forward(x);
        sensitivities(x);
        hess.setZero(n, n);
        Eigen::RowVectorXd row(n);
        std::vector<double> w(lambda.size(), 0.0);
        std::size_t ci = 0;
        for_each_constraint(x, [&](const ConstraintTerm& c) {
            const double wc = std::max(0.0, lambda[ci] + mu * c.g);
            w[ci++] = wc;
            if (wc == 0.0) return;
            row.setZero();
            if (c.step >= 0) {
                const auto& J = sens_[static_cast<std::size_t>(c.step)];
                row = c.ds[0] * J.row(0) + c.ds[1] * J.row(1) + c.ds[2] * J.row(2);
            }
            if (c.xa >= 0) row[c.xa] += c.ca;
            if (c.xb >= 0) row[c.xb] += c.cb;
            hess.noalias() += mu * row.transpose() * row;
        });

        std::vector<double> g0(static_cast<std::size_t>(n)), g1(static_cast<std::size_t>(n));
        evaluate(x, w, 0.0, g0, nullptr);
        std::vector<double> xp(x.begin(), x.end());
        Eigen::MatrixXd lag(n, n);
        for (int j = 0; j < n; ++j) {
            const auto u = static_cast<std::size_t>(j);
            const double h = 1e-6 * std::max(1.0, std::abs(x[u]));
            xp[u] = x[u] + h;
            evaluate(xp, w, 0.0, g1, nullptr);
            xp[u] = x[u];
            for (int i = 0; i < n; ++i) {
                lag(i, j) = (g1[static_cast<std::size_t>(i)] - g0[static_cast<std::size_t>(i)]) / h;
            }
        }
        hess += 0.5 * (lag + lag.transpose());

        grad.resize(n);
        for (int i = 0; i < n; ++i) grad[i] = g0[static_cast<std::size_t>(i)];
        return evaluate(x, lambda, mu, {}, nullptr);
    }

private:
    static constexpr double kProximityFloor = 1e-2;

    void forward(std::span<const double> x) const {
        const double dt = p_.config.dt;
        const double L = p_.config.wheelbase;
        states_[0] = Pose{p_.ego.lon, p_.ego.lat, p_.ego.heading};
        for (int i = 0; i < np_; ++i) {
            const sim::Action a = action_at(x, i);
            const Pose& c = states_[static_cast<std::size_t>(i)];
            states_[static_cast<std::size_t>(i + 1)] =
                Pose{c.lon + dt * a.speed * std::cos(c.heading),
                     c.lat + dt * a.speed * std::sin(c.heading),
                     c.heading + dt * a.speed * std::tan(a.steer) / L};
        }
    }

    /// sens_[i] = d s_i / d x (3 x n), after forward().
    void sensitivities(std::span<const double> x) const {
        const double dt = p_.config.dt;
        const double L = p_.config.wheelbase;
        const int n = variable_count();
        sens_.resize(static_cast<std::size_t>(np_ + 1));
        sens_[0].setZero(3, n);
        for (int i = 0; i < np_; ++i) {
            const sim::Action a = action_at(x, i);
            const Pose& s = states_[static_cast<std::size_t>(i)];
            const auto& J = sens_[static_cast<std::size_t>(i)];
            auto& Jn = sens_[static_cast<std::size_t>(i + 1)];
            const double c = std::cos(s.heading);
            const double sn = std::sin(s.heading);
            const double tn = std::tan(a.steer);
            Jn = J;
            Jn.row(0) -= dt * a.speed * sn * J.row(2);
            Jn.row(1) += dt * a.speed * c * J.row(2);
            const int k = std::min(i, nc_ - 1);
            Jn(0, 2 * k) += dt * c;
            Jn(1, 2 * k) += dt * sn;
            Jn(2, 2 * k) += dt * tn / L;
            Jn(2, 2 * k + 1) += dt * a.speed * (1.0 + tn * tn) / L;
        }
    }

    /// R_u |a|^2 + R_du |da|^2 over the N_c decision actions; adds its gradient to `grad`.
    double control_terms(std::span<const double> x, std::span<double> grad) const {
        const auto& cfg = p_.config;
        double f = 0.0;
        for (int k = 0; k < nc_; ++k) {
            const double v = x[static_cast<std::size_t>(2 * k)];
            const double d = x[static_cast<std::size_t>(2 * k + 1)];
            const double vPrev = k == 0 ? p_.previousAction.speed
                                        : x[static_cast<std::size_t>(2 * k - 2)];
            const double dPrev = k == 0 ? p_.previousAction.steer
                                        : x[static_cast<std::size_t>(2 * k - 1)];
            const double dv = v - vPrev;
            const double dd = d - dPrev;
            f += cfg.controlWeight * (v * v + d * d) + cfg.incrementWeight * (dv * dv + dd * dd);
            if (!grad.empty()) {
                grad[static_cast<std::size_t>(2 * k)] +=
                    2.0 * cfg.controlWeight * v + 2.0 * cfg.incrementWeight * dv;
                grad[static_cast<std::size_t>(2 * k + 1)] +=
                    2.0 * cfg.controlWeight * d + 2.0 * cfg.incrementWeight * dd;
                if (k > 0) {
                    grad[static_cast<std::size_t>(2 * k - 2)] -= 2.0 * cfg.incrementWeight * dv;
                    grad[static_cast<std::size_t>(2 * k - 1)] -= 2.0 * cfg.incrementWeight * dd;
                }
            }
        }
        return f;
    }

    /// Visits every constraint in order; needs forward() first.
    template <class Visit>
    void for_each_constraint(std::span<const double> x, Visit&& visit) const {
        const auto& cfg = p_.config;
        const double dvMax = cfg.speedIncrementLimit;
        const double ddMax = cfg.steerIncrementLimit;
        ConstraintTerm c;
        auto emit = [&](double g) {
            c.g = g + tightening_;
            visit(c);
        };
        for (int k = 0; k < nc_; ++k) {
            const int iv = 2 * k;
            const int id = iv + 1;
            const double vPrev = k == 0 ? p_.previousAction.speed
                                        : x[static_cast<std::size_t>(iv - 2)];
            const double dPrev = k == 0 ? p_.previousAction.steer
                                        : x[static_cast<std::size_t>(id - 2)];
            const double dv = x[static_cast<std::size_t>(iv)] - vPrev;
            const double dd = x[static_cast<std::size_t>(id)] - dPrev;
            c = ConstraintTerm{};
            c.xa = iv;
            c.ca = 1.0;
            c.xb = k > 0 ? iv - 2 : -1;
            c.cb = -1.0;
            emit(dv - dvMax);
            c.ca = -1.0;
            c.cb = 1.0;
            emit(-dvMax - dv);
            c.xa = id;
            c.ca = 1.0;
            c.xb = k > 0 ? id - 2 : -1;
            c.cb = -1.0;
            emit(dd - ddMax);
            c.ca = -1.0;
            c.cb = 1.0;
            emit(-ddMax - dd);
        }

        c = ConstraintTerm{};
        for (int i = 1; i <= np_; ++i) {
            const Pose& s = states_[static_cast<std::size_t>(i)];
            const double cs = std::cos(s.heading);
            const double sn = std::sin(s.heading);
            c.step = i;
            for (std::size_t j = 0; j < p_.obstacles.size(); ++j) {
                const Pose& o = p_.obstacles[j][static_cast<std::size_t>(i - 1)];
                const double oc = obsCos_[j][static_cast<std::size_t>(i - 1)];
                const double os = obsSin_[j][static_cast<std::size_t>(i - 1)];
                for (int se = 1; se >= -1; se -= 2) {
                    const double el = s.lon + se * quarter_ * cs;
                    const double et = s.lat + se * quarter_ * sn;
                    for (int so = 1; so >= -1; so -= 2) {
                        const double dx = el - (o.lon + so * quarter_ * oc);
                        const double dy = et - (o.lat + so * quarter_ * os);
                        c.ds[0] = -2.0 * dx;
                        c.ds[1] = -2.0 * dy;
                        c.ds[2] = -2.0 * (dx * (-se * quarter_ * sn) + dy * (se * quarter_ * cs));
                        emit(clearance_ - (dx * dx + dy * dy));
                    }
                }
            }
        }

        if (p_.followObstacle >= 0) {
            const auto& lead = p_.obstacles[static_cast<std::size_t>(p_.followObstacle)];
            c = ConstraintTerm{};
            c.ds[0] = 1.0;
            for (int i = 1; i <= np_; ++i) {
                c.step = i;
                emit(states_[static_cast<std::size_t>(i)].lon -
                     (lead[static_cast<std::size_t>(i - 1)].lon - followOffset_));
            }
        }

        c = ConstraintTerm{};
        for (int i = 1; i <= np_; ++i) {
            const double lat = states_[static_cast<std::size_t>(i)].lat;
            c.step = i;
            c.ds[1] = 1.0;
            emit(lat - p_.latMax);
            c.ds[1] = -1.0;
            emit(p_.latMin - lat);
        }
    }

    /// Reverse sweep: adj_[i] holds dJ/ds_i on entry.
    void backward(std::span<const double> x, std::span<double> grad) const {
        const double dt = p_.config.dt;
        const double L = p_.config.wheelbase;
        Pose p = adj_[static_cast<std::size_t>(np_)];
        for (int i = np_ - 1; i >= 0; --i) {
            const sim::Action a = action_at(x, i);
            const Pose& s = states_[static_cast<std::size_t>(i)];
            const double c = std::cos(s.heading);
            const double sn = std::sin(s.heading);
            const double tn = std::tan(a.steer);
            const int k = std::min(i, nc_ - 1);
            grad[static_cast<std::size_t>(2 * k)] +=
                dt * (p.lon * c + p.lat * sn + p.heading * tn / L);
            grad[static_cast<std::size_t>(2 * k + 1)] +=
                p.heading * dt * a.speed * (1.0 + tn * tn) / L;
            if (i == 0) break;
            const Pose& own = adj_[static_cast<std::size_t>(i)];
            Pose prev;
            prev.lon = own.lon + p.lon;
            prev.lat = own.lat + p.lat;
            prev.heading = own.heading + p.heading + p.lon * (-dt * a.speed * sn) +
                           p.lat * (dt * a.speed * c);
            p = prev;
        }
    }

    NlpProblem p_;
    double tightening_ = 0.0;
    int np_;
    int nc_;
    double clearance_ = 0.0;
    double quarter_ = 0.0;
    double followOffset_ = 0.0;
    std::vector<std::vector<double>> obsCos_;
    std::vector<std::vector<double>> obsSin_;
    mutable std::vector<Pose> states_;
    mutable std::vector<Pose> adj_;
    mutable std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> sens_;
};

}  // namespace td::mpc
