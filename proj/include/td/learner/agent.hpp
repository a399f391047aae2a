#pragma once

#include <cmath>
#include <istream>
#include <ostream>
#include <random>
#include <stdexcept>
#include <vector>

#include "td/learner/replay.hpp"
#include "td/learner/sac.hpp"
#include "td/nn/adam.hpp"
#include "td/nn/checkpoint.hpp"

namespace td::learner {

struct LearnerConfig {
    double gamma = 0.99;
    int batchSize = 256;
    int totalSteps = 10000;
    double criticLearningRate = 3e-4;
    double policyLearningRate = 3e-4;
    double temperatureLearningRate = 3e-4;
    double targetSmoothing = 0.005;
    double targetEntropy = -1.0;
    double initialAlpha = 1.0;
    int warmupSteps = 500;
    int updateEvery = 1;
    int replayCapacity = 100000;
    std::vector<int> hidden{256, 256};

    void validate() const {
        if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("LearnerConfig: gamma in (0,1)");
        if (batchSize < 1) throw std::invalid_argument("LearnerConfig: batch_size must be >= 1");
        if (totalSteps < 0) throw std::invalid_argument("LearnerConfig: total_steps must be >= 0");
        if (!(criticLearningRate > 0.0 && policyLearningRate > 0.0 && temperatureLearningRate > 0.0)) {
            throw std::invalid_argument("LearnerConfig: learning rates must be > 0");
        }
        if (!(targetSmoothing > 0.0 && targetSmoothing <= 1.0)) {
            throw std::invalid_argument("LearnerConfig: target smoothing in (0,1]");
        }
        if (!(initialAlpha > 0.0)) throw std::invalid_argument("LearnerConfig: initial alpha must be > 0");
        if (warmupSteps < 0 || updateEvery < 1) {
            throw std::invalid_argument("LearnerConfig: bad warm-up or update period");
        }
        if (replayCapacity < batchSize) {
            throw std::invalid_argument("LearnerConfig: replay capacity must be >= batch size");
        }
        if (hidden.empty()) throw std::invalid_argument("LearnerConfig: need at least one hidden layer");
        for (int h : hidden) {
            if (h < 1) throw std::invalid_argument("LearnerConfig: hidden sizes must be >= 1");
        }
    }
};

struct UpdateStats {
    double criticLoss = 0.0;
    double policyLoss = 0.0;
};

/**
 * Soft actor-critic agent over a one-dimensional squashed action, trained in
 * single precision. Owns the networks, optimizer state and temperature.
 */
class SacAgent {
public:
    using Scalar = float;

    SacAgent(int stateDim, LearnerConfig config, std::mt19937_64& rng, int actionDim = 1)
        : config_(std::move(config)),
          nets_(make_networks<Scalar>(stateDim, config_.hidden, rng, actionDim)),
          q1Adam_(nn::make_adam_state<Scalar>(nets_.criticSpec)),
          q2Adam_(nn::make_adam_state<Scalar>(nets_.criticSpec)),
          policyAdam_(nn::make_adam_state<Scalar>(nets_.policySpec)),
          logAlpha_(std::log(config_.initialAlpha)) {
        config_.validate();
    }

    const LearnerConfig& config() const { return config_; }
    const SacNetworks<Scalar>& networks() const { return nets_; }
    SacNetworks<Scalar>& networks() { return nets_; }
    double alpha() const { return std::exp(logAlpha_); }
    double log_alpha() const { return logAlpha_; }
    int state_dim() const { return nets_.state_dim(); }
    int action_dim() const { return nets_.action_dim(); }

    /// Stochastic action for exploration, each entry in (-1, 1).
    std::vector<double> sample_action(const std::vector<double>& state, std::mt19937_64& rng) const {
        const Mat<Scalar> x = column(state);
        const Mat<Scalar> z = noise(rng, action_dim(), 1);
        const Mat<Scalar> v = sample_policy(nets_.policySpec, nets_.policy, x, z).value;
        std::vector<double> out(static_cast<std::size_t>(v.rows()));
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = double(v(static_cast<Eigen::Index>(i), 0));
        return out;
    }

    /// tanh(mean), used for evaluation.
    std::vector<double> mean_action(const std::vector<double>& state) const {
        return policy_mean_action(nets_.policySpec, nets_.policy, state);
    }

    /// Critic, policy and temperature steps on one sampled batch, then target smoothing.
    UpdateStats update(const ReplayBuffer& buffer, std::mt19937_64& rng) {
        const auto B = static_cast<std::size_t>(config_.batchSize);
        const auto batch = gather_batch<Scalar>(buffer, buffer.sample_indices(rng, B));
        const Scalar alpha = Scalar(this->alpha());
        const nn::AdamConfig criticOpt{config_.criticLearningRate};
        const nn::AdamConfig policyOpt{config_.policyLearningRate};
        const nn::AdamConfig alphaOpt{config_.temperatureLearningRate};

        const Mat<Scalar> nextNoise = noise(rng, action_dim(), batch.size());
        const auto cl = critic_loss(batch, nets_, alpha, Scalar(config_.gamma), nextNoise);
        nn::adaptive_update(nets_.q1, cl.grad1, q1Adam_, criticOpt);
        nn::adaptive_update(nets_.q2, cl.grad2, q2Adam_, criticOpt);

        const Mat<Scalar> z = noise(rng, action_dim(), batch.size());
        const auto pl = policy_loss(batch.state, nets_, alpha, z);
        nn::adaptive_update(nets_.policy, pl.grad, policyAdam_, policyOpt);
        temperature_update(logAlpha_, alphaAdam_, pl.logProb, config_.targetEntropy, alphaOpt);

        const auto tau = Scalar(config_.targetSmoothing);
        nets_.q1Target.blend(nets_.q1, tau);
        nets_.q2Target.blend(nets_.q2, tau);
        return {double(cl.loss()), double(pl.loss)};
    }

    void save(std::ostream& os) const {
        nn::BinaryWriter w(os);
        w.header();
        w.tag("sac");
        for (const auto* p : {&nets_.q1, &nets_.q2, &nets_.q1Target, &nets_.q2Target}) {
            nn::write_network(w, nets_.criticSpec, *p);
        }
        nn::write_network(w, nets_.policySpec, nets_.policy);
        nn::write_adam(w, nets_.criticSpec, q1Adam_);
        nn::write_adam(w, nets_.criticSpec, q2Adam_);
        nn::write_adam(w, nets_.policySpec, policyAdam_);
        w.put(logAlpha_);
        nn::write_adam(w, alphaAdam_);
    }

    /// Restores parameters, optimizer state and temperature; shapes must match.
    void load(std::istream& is) {
        nn::BinaryReader r(is);
        r.header();
        r.expect_tag("sac");
        auto readNet = [&](const nn::MlpSpec& expected) {
            nn::MlpSpec spec;
            auto p = nn::read_network<Scalar>(r, spec);
            if (!(spec == expected)) throw std::runtime_error("checkpoint: network shape mismatch");
            return p;
        };
        SacNetworks<Scalar> n = nets_;
        n.q1 = readNet(nets_.criticSpec);
        n.q2 = readNet(nets_.criticSpec);
        n.q1Target = readNet(nets_.criticSpec);
        n.q2Target = readNet(nets_.criticSpec);
        n.policy = readNet(nets_.policySpec);
        auto a1 = nn::read_adam<Scalar>(r, nets_.criticSpec);
        auto a2 = nn::read_adam<Scalar>(r, nets_.criticSpec);
        auto ap = nn::read_adam<Scalar>(r, nets_.policySpec);
        const double logAlpha = r.get<double>();
        const auto aa = nn::read_adam(r);
        nets_ = std::move(n);
        q1Adam_ = std::move(a1);
        q2Adam_ = std::move(a2);
        policyAdam_ = std::move(ap);
        logAlpha_ = logAlpha;
        alphaAdam_ = aa;
    }

    bool operator==(const SacAgent& o) const {
        return nets_.q1 == o.nets_.q1 && nets_.q2 == o.nets_.q2 && nets_.q1Target == o.nets_.q1Target &&
               nets_.q2Target == o.nets_.q2Target && nets_.policy == o.nets_.policy &&
               q1Adam_.m == o.q1Adam_.m && q1Adam_.v == o.q1Adam_.v && q1Adam_.step == o.q1Adam_.step &&
               q2Adam_.m == o.q2Adam_.m && q2Adam_.v == o.q2Adam_.v &&
               policyAdam_.m == o.policyAdam_.m && policyAdam_.v == o.policyAdam_.v &&
               logAlpha_ == o.logAlpha_ && alphaAdam_.m == o.alphaAdam_.m &&
               alphaAdam_.v == o.alphaAdam_.v && alphaAdam_.step == o.alphaAdam_.step;
    }

private:
    static Mat<Scalar> column(const std::vector<double>& v) {
        Mat<Scalar> x(static_cast<Eigen::Index>(v.size()), 1);
        for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = Scalar(v[i]);
        return x;
    }

    static Mat<Scalar> noise(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
        std::normal_distribution<double> normal(0.0, 1.0);
        Mat<Scalar> z(rows, cols);
        for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = Scalar(normal(rng));
        return z;
    }

    LearnerConfig config_;
    SacNetworks<Scalar> nets_;
    nn::AdamState<nn::MlpParams<Scalar>> q1Adam_, q2Adam_, policyAdam_;
    double logAlpha_;
    nn::AdamState<double> alphaAdam_{0.0, 0.0, 0};
};

}  // namespace td::learner
