#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "td/learner/replay.hpp"
#include "td/nn/adam.hpp"
#include "td/nn/gaussian.hpp"
#include "td/nn/mlp.hpp"

namespace td::learner {

using nn::Mat;
using nn::Vec;

/// Columns are transitions.
template <class S>
struct SacBatch {
    Mat<S> state;      // 2m x B
    Mat<S> action;     // k x B
    Vec<S> reward;     // B
    Mat<S> nextState;  // 2m x B
    Vec<S> done;       // B, 1 for terminal

    Eigen::Index size() const { return state.cols(); }
};

template <class S>
SacBatch<S> gather_batch(const ReplayBuffer& buffer, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw std::invalid_argument("gather_batch: empty batch");
    const auto dim = static_cast<Eigen::Index>(buffer[indices.front()].state.size());
    const auto k = static_cast<Eigen::Index>(buffer[indices.front()].action.size());
    const auto B = static_cast<Eigen::Index>(indices.size());
    SacBatch<S> b{Mat<S>(dim, B), Mat<S>(k, B), Vec<S>(B), Mat<S>(dim, B), Vec<S>(B)};
    for (Eigen::Index c = 0; c < B; ++c) {
        const Transition& t = buffer[indices[static_cast<std::size_t>(c)]];
        if (static_cast<Eigen::Index>(t.state.size()) != dim ||
            static_cast<Eigen::Index>(t.nextState.size()) != dim ||
            static_cast<Eigen::Index>(t.action.size()) != k) {
            throw std::invalid_argument("gather_batch: inconsistent transition sizes");
        }
        for (Eigen::Index r = 0; r < dim; ++r) {
            b.state(r, c) = S(t.state[static_cast<std::size_t>(r)]);
            b.nextState(r, c) = S(t.nextState[static_cast<std::size_t>(r)]);
        }
        for (Eigen::Index r = 0; r < k; ++r) b.action(r, c) = S(t.action[static_cast<std::size_t>(r)]);
        b.reward[c] = S(t.reward);
        b.done[c] = t.done ? S(1) : S(0);
    }
    return b;
}

/// Twin critics with smoothed targets plus the Gaussian tendency policy.
template <class S>
struct SacNetworks {
    nn::MlpSpec criticSpec;
    nn::MlpSpec policySpec;
    nn::MlpParams<S> q1, q2, q1Target, q2Target, policy;

    int state_dim() const { return policySpec.input_size(); }
    int action_dim() const { return policySpec.output_size() / 2; }
};

/// Critic input state + action, policy input state, output (means, log stds).
template <class S>
SacNetworks<S> make_networks(int stateDim, const std::vector<int>& hidden, std::mt19937_64& rng,
                             int actionDim = 1) {
    if (stateDim < 1 || actionDim < 1) {
        throw std::invalid_argument("make_networks: state and action dims must be >= 1");
    }
    SacNetworks<S> n;
    n.criticSpec.layerSizes.push_back(stateDim + actionDim);
    n.policySpec.layerSizes.push_back(stateDim);
    for (int h : hidden) {
        n.criticSpec.layerSizes.push_back(h);
        n.policySpec.layerSizes.push_back(h);
    }
    n.criticSpec.layerSizes.push_back(1);
    n.policySpec.layerSizes.push_back(2 * actionDim);
    n.policySpec.head = nn::Head::Gaussian;
    n.q1 = nn::init_params<S>(n.criticSpec, rng);
    n.q2 = nn::init_params<S>(n.criticSpec, rng);
    n.policy = nn::init_params<S>(n.policySpec, rng);
    n.q1Target = n.q1;
    n.q2Target = n.q2;
    return n;
}

template <class S>
Mat<S> critic_input(const Mat<S>& state, const Mat<S>& action) {
    Mat<S> x(state.rows() + action.rows(), state.cols());
    x.topRows(state.rows()) = state;
    x.bottomRows(action.rows()) = action;
    return x;
}

/// Reparameterised squashed samples for every column of `state`.
template <class S>
struct PolicySample {
    Mat<S> value;     // k x B
    Mat<S> logProb;   // 1 x B, summed over action dimensions
    std::vector<nn::SquashedSample<S>> parts;  // column-major, k per sample
    nn::ForwardCache<S> cache;
};

template <class S>
PolicySample<S> sample_policy(const nn::MlpSpec& spec, const nn::MlpParams<S>& params,
                              const Mat<S>& state, const Mat<S>& noise) {
    const Eigen::Index k = spec.output_size() / 2;
    if (noise.rows() != k || noise.cols() != state.cols()) {
        throw std::invalid_argument("sample_policy: noise must be action dim x batch");
    }
    PolicySample<S> out;
    const Mat<S> head = nn::forward(spec, params, state, &out.cache);
    const Eigen::Index B = state.cols();
    out.value.resize(k, B);
    out.logProb.setZero(1, B);
    out.parts.reserve(static_cast<std::size_t>(k * B));
    for (Eigen::Index c = 0; c < B; ++c) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto s = nn::gaussian_head_sample(head(i, c), head(k + i, c), noise(i, c));
            out.value(i, c) = s.value;
            out.logProb(0, c) += s.logDensity;
            out.parts.push_back(s);
        }
    }
    return out;
}

/// Deterministic action tanh(mean) used at evaluation.
template <class S>
std::vector<double> policy_mean_action(const nn::MlpSpec& spec, const nn::MlpParams<S>& params,
                                       const std::vector<double>& state) {
    Mat<S> x(static_cast<Eigen::Index>(state.size()), 1);
    for (std::size_t i = 0; i < state.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = S(state[i]);
    const Mat<S> head = nn::forward(spec, params, x);
    std::vector<double> out(static_cast<std::size_t>(spec.output_size() / 2));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = double(std::tanh(head(static_cast<Eigen::Index>(i), 0)));
    return out;
}

template <class S>
struct CriticLoss {
    S loss1 = 0;
    S loss2 = 0;
    nn::MlpParams<S> grad1;
    nn::MlpParams<S> grad2;
    Vec<S> target;

    S loss() const { return loss1 + loss2; }
};

template <class S>
void require_finite(const SacBatch<S>& b) {
    if (!b.state.allFinite() || !b.action.allFinite() || !b.reward.allFinite() ||
        !b.nextState.allFinite() || !b.done.allFinite()) {
        throw std::invalid_argument("sac: non-finite batch entry");
    }
}

/**
 * y = r + gamma (1 - done) [min(Q1', Q2')(s', e') - alpha log pi(e'|s')],
 * e' drawn from the current policy with `nextNoise`. Each critic's loss is
 * 0.5 mean (Q_i - y)^2; y is treated as a constant.
 */
template <class S>
CriticLoss<S> critic_loss(const SacBatch<S>& batch, const SacNetworks<S>& nets, S alpha, S gamma,
                          const Mat<S>& nextNoise) {
    require_finite(batch);
    const Eigen::Index B = batch.size();
    if (B == 0) throw std::invalid_argument("critic_loss: empty batch");
    const auto next = sample_policy(nets.policySpec, nets.policy, batch.nextState, nextNoise);
    const Mat<S> nextIn = critic_input(batch.nextState, next.value);
    const Mat<S> t1 = nn::forward(nets.criticSpec, nets.q1Target, nextIn);
    const Mat<S> t2 = nn::forward(nets.criticSpec, nets.q2Target, nextIn);

    CriticLoss<S> out;
    out.target.resize(B);
    for (Eigen::Index c = 0; c < B; ++c) {
        const S soft = std::min(t1(0, c), t2(0, c)) - alpha * next.logProb(0, c);
        out.target[c] = batch.reward[c] + gamma * (S(1) - batch.done[c]) * soft;
    }

    const Mat<S> in = critic_input(batch.state, batch.action);
    auto one = [&](const nn::MlpParams<S>& q, S& loss, nn::MlpParams<S>& grad) {
        nn::ForwardCache<S> cache;
        const Mat<S> pred = nn::forward(nets.criticSpec, q, in, &cache);
        const Mat<S> err = pred - out.target.transpose();
        loss = S(0.5) * err.squaredNorm() / S(B);
        nn::backward(nets.criticSpec, q, cache, Mat<S>(err / S(B)), grad);
    };
    one(nets.q1, out.loss1, out.grad1);
    one(nets.q2, out.loss2, out.grad2);
    if (!std::isfinite(out.loss1) || !std::isfinite(out.loss2)) {
        throw std::runtime_error("critic_loss: non-finite loss");
    }
    return out;
}

template <class S>
struct PolicyLoss {
    S loss = 0;
    nn::MlpParams<S> grad;
    Mat<S> logProb;  // 1 x B, reused by the temperature step
};

/**
 * mean[alpha log pi(e|s) - min(Q1, Q2)(s, e)] with e = tanh(mu + noise sigma)
 * per action dimension.
 * Gradients pass through the sampled action into the critics' action input.
 */
template <class S>
PolicyLoss<S> policy_loss(const Mat<S>& state, const SacNetworks<S>& nets, S alpha,
                          const Mat<S>& noise) {
    if (!state.allFinite() || !noise.allFinite()) {
        throw std::invalid_argument("policy_loss: non-finite input");
    }
    const Eigen::Index B = state.cols();
    if (B == 0) throw std::invalid_argument("policy_loss: empty batch");
    auto sample = sample_policy(nets.policySpec, nets.policy, state, noise);
    const Mat<S> in = critic_input(state, sample.value);
    nn::ForwardCache<S> c1, c2;
    const Mat<S> q1 = nn::forward(nets.criticSpec, nets.q1, in, &c1);
    const Mat<S> q2 = nn::forward(nets.criticSpec, nets.q2, in, &c2);

    PolicyLoss<S> out;
    Mat<S> g1 = Mat<S>::Zero(1, B), g2 = Mat<S>::Zero(1, B);
    S total = 0;
    for (Eigen::Index c = 0; c < B; ++c) {
        const bool first = q1(0, c) <= q2(0, c);
        total += alpha * sample.logProb(0, c) - (first ? q1(0, c) : q2(0, c));
        (first ? g1 : g2)(0, c) = S(-1) / S(B);
    }
    out.loss = total / S(B);
    if (!std::isfinite(out.loss)) throw std::runtime_error("policy_loss: non-finite loss");

    nn::MlpParams<S> scratch;
    const Mat<S> d1 = nn::backward(nets.criticSpec, nets.q1, c1, g1, scratch);
    const Mat<S> d2 = nn::backward(nets.criticSpec, nets.q2, c2, g2, scratch);
    const Eigen::Index k = sample.value.rows();
    const Eigen::Index firstActionRow = in.rows() - k;

    Mat<S> headGrad(2 * k, B);
    const S dLog = alpha / S(B);
    for (Eigen::Index c = 0; c < B; ++c) {
        for (Eigen::Index i = 0; i < k; ++i) {
            const auto& p = sample.parts[static_cast<std::size_t>(c * k + i)];
            const S dValue = d1(firstActionRow + i, c) + d2(firstActionRow + i, c);
            headGrad(i, c) = dValue * p.dValueDMean + dLog * p.dLogDensityDMean;
            headGrad(k + i, c) = dValue * p.dValueDLogStd + dLog * p.dLogDensityDLogStd;
        }
    }
    nn::backward(nets.policySpec, nets.policy, sample.cache, headGrad, out.grad);
    out.logProb = std::move(sample.logProb);
    return out;
}

/// d/d(log alpha) of mean[-log alpha (log pi + targetEntropy)].
template <class S>
double temperature_gradient(const Mat<S>& logProb, double targetEntropy) {
    if (logProb.size() == 0) throw std::invalid_argument("temperature_gradient: empty batch");
    double acc = 0.0;
    for (Eigen::Index i = 0; i < logProb.size(); ++i) acc += double(logProb.data()[i]) + targetEntropy;
    return -acc / static_cast<double>(logProb.size());
}

template <class S>
void temperature_update(double& logAlpha, nn::AdamState<double>& state, const Mat<S>& logProb,
                        double targetEntropy, const nn::AdamConfig& config) {
    nn::adaptive_update(logAlpha, temperature_gradient(logProb, targetEntropy), state, config);
}

}  // namespace td::learner
