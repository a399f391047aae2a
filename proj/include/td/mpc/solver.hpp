#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "td/mpc/problem.hpp"

namespace td::mpc {

struct NlpSolution {
    std::vector<sim::Action> actions;  // N_c
    std::vector<Pose> predictedStates; // steps 1..N_p
    double cost = 0.0;
    bool feasible = false;
    int iterations = 0;       // outer augmented-Lagrangian iterations
    int innerIterations = 0;  // Newton iterations summed over outer ones
    double kktResidual = std::numeric_limits<double>::infinity();
    double maxViolation = std::numeric_limits<double>::infinity();
    bool fallbackUsed = false;
};

inline std::vector<double> to_decision_vector(const std::vector<sim::Action>& actions) {
    std::vector<double> x;
    x.reserve(2 * actions.size());
    for (const auto& a : actions) {
        x.push_back(a.speed);
        x.push_back(a.steer);
    }
    return x;
}

inline std::vector<sim::Action> to_actions(std::span<const double> x) {
    std::vector<sim::Action> out;
    out.reserve(x.size() / 2);
    for (std::size_t k = 0; k + 1 < x.size(); k += 2) out.push_back({x[k], x[k + 1]});
    return out;
}

namespace detail {

/// Box bounds of the decision vector.
struct Bounds {
    std::vector<double> lo;
    std::vector<double> hi;

    void project(std::span<double> x) const {
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = std::clamp(x[i], lo[i], hi[i]);
    }

    /// Infinity norm of P(x - g) - x.
    double projected_gradient_norm(std::span<const double> x, std::span<const double> g) const {
        double n = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double step = std::clamp(x[i] - g[i], lo[i], hi[i]) - x[i];
            n = std::max(n, std::abs(step));
        }
        return n;
    }
};

/// Actuator boxes; the first action also carries its increment limits, which are plain bounds.
inline Bounds make_bounds(const NlpProblem& p) {
    const MpcConfig& c = p.config;
    Bounds b;
    for (int k = 0; k < c.controlHorizon; ++k) {
        b.lo.push_back(0.0);
        b.hi.push_back(c.maxSpeed);
        b.lo.push_back(-c.maxSteer);
        b.hi.push_back(c.maxSteer);
    }
    auto narrow = [&](std::size_t i, double centre, double limit) {
        const double lo = std::max(b.lo[i], centre - limit);
        const double hi = std::min(b.hi[i], centre + limit);
        if (lo <= hi) {
            b.lo[i] = lo;
            b.hi[i] = hi;
        } else {
            b.lo[i] = b.hi[i] = lo > b.hi[i] ? b.hi[i] : b.lo[i];
        }
    };
    narrow(0, p.previousAction.speed, c.speedIncrementLimit);
    narrow(1, p.previousAction.steer, c.steerIncrementLimit);
    return b;
}

struct InnerResult {
    int iterations = 0;
    double projectedGradient = 0.0;
    bool finite = true;
};

/**
 * Bound-constrained minimisation of the augmented Lagrangian: modified
 * Newton steps on the free variables, projected Armijo
 * backtracking.
 */
inline InnerResult minimise_bounded(const ProblemEvaluator& ev, std::vector<double>& x,
                                    std::span<const double> lambda, double mu,
                                    const Bounds& bounds, double tolerance, int maxIter) {
    const int n = static_cast<int>(x.size());
    Eigen::VectorXd g(n);
    Eigen::MatrixXd H(n, n);
    std::vector<double> xNew(x.size());
    InnerResult res;
    for (int it = 0; it < maxIter; ++it) {
        const double fx = ev.linearise(x, lambda, mu, g, H);
        if (!std::isfinite(fx) || !g.allFinite()) {
            res.finite = false;
            return res;
        }
        res.projectedGradient =
            bounds.projected_gradient_norm(x, std::span<const double>(g.data(), x.size()));
        if (res.projectedGradient <= tolerance) return res;

        // Variables at a bound with the gradient pushing outward stay fixed.
        std::vector<int> freeIdx;
        for (int i = 0; i < n; ++i) {
            const auto u = static_cast<std::size_t>(i);
            const bool atLo = x[u] <= bounds.lo[u] + 1e-12 && g[i] > 0.0;
            const bool atHi = x[u] >= bounds.hi[u] - 1e-12 && g[i] < 0.0;
            if (!atLo && !atHi) freeIdx.push_back(i);
        }
        Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
        if (!freeIdx.empty()) {
            const int m = static_cast<int>(freeIdx.size());
            Eigen::MatrixXd Hf(m, m);
            Eigen::VectorXd gf(m);
            for (int a = 0; a < m; ++a) {
                gf[a] = g[freeIdx[static_cast<std::size_t>(a)]];
                for (int b = 0; b < m; ++b) {
                    Hf(a, b) = H(freeIdx[static_cast<std::size_t>(a)], freeIdx[static_cast<std::size_t>(b)]);
                }
            }
            // Modified Newton: eigenvalues reflected and floored to keep the model convex.
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Hf);
            Eigen::VectorXd ev2 = eig.eigenvalues().cwiseAbs();
            const double floor = std::max(1e-8 * ev2.maxCoeff(), 1e-10);
            ev2 = ev2.cwiseMax(floor);
            Eigen::VectorXd df = -eig.eigenvectors() *
                                 ((eig.eigenvectors().transpose() * gf).cwiseQuotient(ev2));
            if (!df.allFinite() || df.dot(gf) >= 0.0) {
                df = -gf / std::max(1.0, gf.cwiseAbs().maxCoeff());
            }
            for (int a = 0; a < m; ++a) d[freeIdx[static_cast<std::size_t>(a)]] = df[a];
        }

        double t = 1.0;
        bool accepted = false;
        double fNew = fx;
        for (int ls = 0; ls < 30; ++ls) {
            double decrease = 0.0;
            for (int i = 0; i < n; ++i) {
                const auto u = static_cast<std::size_t>(i);
                xNew[u] = std::clamp(x[u] + t * d[i], bounds.lo[u], bounds.hi[u]);
                decrease += g[i] * (xNew[u] - x[u]);
            }
            fNew = ev.evaluate(xNew, lambda, mu, {}, nullptr);
            if (std::isfinite(fNew) && fNew <= fx + 1e-4 * decrease) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        ++res.iterations;
        if (!accepted) return res;
        const bool stalled = std::abs(fNew - fx) <= 1e-15 * std::max(1.0, std::abs(fx));
        x.swap(xNew);
        if (stalled) break;
    }
    return res;
}

}  // namespace detail

/**
 * Augmented-Lagrangian outer loop around the bounded Newton inner
 * solver. Stops when the worst constraint violation and the scaled projected
 * gradient of the Lagrangian are both within kktTolerance, when
 * maxIterations outer iterations are spent, or when the penalty is saturated
 * without progress. Never throws on numerical trouble; feasible reports the
 * final violation.
 */
inline NlpSolution solve(const NlpProblem& problem, const std::vector<sim::Action>& init,
                         const MpcConfig& config) {
    if (static_cast<int>(init.size()) != problem.config.controlHorizon) {
        throw std::invalid_argument("solve: initial sequence must have N_c actions");
    }
    const ProblemEvaluator ev(problem, problem.config.constraintBackoff);
    const ProblemEvaluator plain(problem);
    const detail::Bounds bounds = detail::make_bounds(problem);
    std::vector<double> x = to_decision_vector(init);
    bounds.project(x);

    const std::size_t nCon = static_cast<std::size_t>(ev.constraint_count());
    std::vector<double> lambda(nCon, 0.0);
    std::vector<double> g;
    std::vector<double> grad(x.size());
    const double tol = config.kktTolerance;
    double mu = 10.0;
    constexpr double kMuMax = 1e10;
    double prevViolation = std::numeric_limits<double>::infinity();
    double omega = 1e-2;
    int stagnant = 0;

    NlpSolution sol;
    sol.iterations = 0;
    bool numericFailure = false;
    double violation = plain.max_violation(x);
    double stationarity = std::numeric_limits<double>::infinity();

    for (int outer = 0; outer < config.maxIterations; ++outer) {
        const double scale = std::max(1.0, std::abs(ev.cost(x)));
        const auto inner = detail::minimise_bounded(ev, x, lambda, mu, bounds,
                                                    std::max(omega, tol) * scale,
                                                    config.innerIterations);
        ++sol.iterations;
        sol.innerIterations += inner.iterations;
        if (!inner.finite) {
            numericFailure = true;
            break;
        }
        double f = 0.0;
        ev.evaluate(x, {}, 0.0, {}, &g, &f);
        double tightViolation = 0.0;
        for (double gi : g) tightViolation = std::max(tightViolation, gi);
        violation = plain.max_violation(x);
        for (std::size_t c = 0; c < nCon; ++c) lambda[c] = std::max(0.0, lambda[c] + mu * g[c]);

        // Stationarity of the Lagrangian at the updated multipliers.
        ev.evaluate(x, lambda, 0.0, grad, nullptr);
        stationarity = bounds.projected_gradient_norm(x, grad) / std::max(1.0, std::abs(f));
        if (!std::isfinite(violation) || !std::isfinite(stationarity)) {
            numericFailure = true;
            break;
        }
        if (violation <= tol && stationarity <= tol) break;

        if (violation > 0.25 * prevViolation && violation > tol) {
            if (mu >= kMuMax) {
                if (++stagnant >= 3) break;
            }
            mu = std::min(mu * 10.0, kMuMax);
        } else {
            stagnant = 0;
        }
        prevViolation = violation;
        omega = std::max(omega * 0.1, tol);
    }

    sol.actions = to_actions(x);
    const auto states = ev.rollout(x);
    sol.predictedStates.assign(states.begin() + 1, states.end());
    sol.cost = ev.cost(x);
    sol.maxViolation = numericFailure ? std::numeric_limits<double>::infinity() : violation;
    sol.kktResidual = std::max(sol.maxViolation, stationarity);
    sol.feasible = sol.iterations > 0 && !numericFailure && std::isfinite(sol.cost) &&
                   sol.maxViolation <= tol;
    return sol;
}

}  // namespace td::mpc
