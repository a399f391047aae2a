#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "td/nn/mlp.hpp"

namespace td::nn {

struct AdamConfig {
    double learningRate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (!(learningRate > 0.0)) throw std::invalid_argument("AdamConfig: learningRate must be > 0");
        if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("AdamConfig: beta1 in [0,1)");
        if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("AdamConfig: beta2 in [0,1)");
        if (!(epsilon > 0.0)) throw std::invalid_argument("AdamConfig: epsilon must be > 0");
    }
};

/// First and second moments for a block of parameters plus the step count.
template <class P>
struct AdamState {
    P m;
    P v;
    std::int64_t step = 0;
};

namespace detail {

template <class S>
void adam_block(S* p, const S* g, S* m, S* v, Eigen::Index n, const AdamConfig& c, S lrHat,
                S epsHat) {
    const S b1 = S(c.beta1), b2 = S(c.beta2);
    for (Eigen::Index i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (S(1) - b1) * g[i];
        v[i] = b2 * v[i] + (S(1) - b2) * g[i] * g[i];
        p[i] -= lrHat * m[i] / (std::sqrt(v[i]) + epsHat);
    }
}

/// Bias corrections folded into the step size and epsilon.
inline void corrected(const AdamConfig& c, std::int64_t t, double& lrHat, double& epsHat) {
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));
    lrHat = c.learningRate * std::sqrt(bc2) / bc1;
    epsHat = c.epsilon * std::sqrt(bc2);
}

}  // namespace detail

template <class S>
AdamState<MlpParams<S>> make_adam_state(const MlpSpec& spec) {
    return {MlpParams<S>::zeros(spec), MlpParams<S>::zeros(spec), 0};
}

/// One Adam step on network parameters. Rejects non-finite gradients.
template <class S>
void adaptive_update(MlpParams<S>& params, const MlpParams<S>& grads,
                     AdamState<MlpParams<S>>& state, const AdamConfig& config) {
    if (!grads.all_finite()) throw std::invalid_argument("adaptive_update: non-finite gradient");
    state.step += 1;
    double lrHat = 0, epsHat = 0;
    detail::corrected(config, state.step, lrHat, epsHat);
    for (std::size_t l = 0; l < params.weights.size(); ++l) {
        detail::adam_block(params.weights[l].data(), grads.weights[l].data(),
                           state.m.weights[l].data(), state.v.weights[l].data(),
                           params.weights[l].size(), config, S(lrHat), S(epsHat));
        detail::adam_block(params.biases[l].data(), grads.biases[l].data(),
                           state.m.biases[l].data(), state.v.biases[l].data(),
                           params.biases[l].size(), config, S(lrHat), S(epsHat));
    }
}

/// One Adam step on a scalar parameter.
inline void adaptive_update(double& param, double grad, AdamState<double>& state,
                            const AdamConfig& config) {
    if (!std::isfinite(grad)) throw std::invalid_argument("adaptive_update: non-finite gradient");
    state.step += 1;
    double lrHat = 0, epsHat = 0;
    detail::corrected(config, state.step, lrHat, epsHat);
    detail::adam_block(&param, &grad, &state.m, &state.v, 1, config, lrHat, epsHat);
}

}  // namespace td::nn
