#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace td::nn {

enum class Head { Identity, Gaussian };

/// Layer widths from input to output; ReLU between hidden layers.
struct MlpSpec {
    std::vector<int> layerSizes;
    Head head = Head::Identity;

    void validate() const {
        if (layerSizes.size() < 2) throw std::invalid_argument("MlpSpec: need at least 2 layers");
        for (int s : layerSizes) {
            if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be >= 1");
        }
        if (head == Head::Gaussian && layerSizes.back() % 2 != 0) {
            throw std::invalid_argument("MlpSpec: Gaussian head needs an even output width");
        }
    }

    int input_size() const { return layerSizes.front(); }
    int output_size() const { return layerSizes.back(); }
    std::size_t layer_count() const { return layerSizes.size() - 1; }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l + 1 < layerSizes.size(); ++l) {
            n += static_cast<std::size_t>(layerSizes[l + 1]) * (layerSizes[l] + 1);
        }
        return n;
    }

    friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

/// Weights (out x in) and biases per layer. Also used for gradients.
template <class S>
struct MlpParams {
    std::vector<Mat<S>> weights;
    std::vector<Vec<S>> biases;

    static MlpParams zeros(const MlpSpec& spec) {
        MlpParams p;
        for (std::size_t l = 0; l < spec.layer_count(); ++l) {
            p.weights.push_back(Mat<S>::Zero(spec.layerSizes[l + 1], spec.layerSizes[l]));
            p.biases.push_back(Vec<S>::Zero(spec.layerSizes[l + 1]));
        }
        return p;
    }

    std::size_t size() const {
        std::size_t n = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
        }
        return n;
    }

    /// Flat order per layer: weights row-major, then biases.
    std::vector<S> flat() const {
        std::vector<S> out;
        out.reserve(size());
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
                for (Eigen::Index c = 0; c < weights[l].cols(); ++c) out.push_back(weights[l](r, c));
            }
            for (Eigen::Index r = 0; r < biases[l].size(); ++r) out.push_back(biases[l][r]);
        }
        return out;
    }

    void set_flat(const std::vector<S>& v) {
        if (v.size() != size()) throw std::invalid_argument("MlpParams: flat size mismatch");
        std::size_t i = 0;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            for (Eigen::Index r = 0; r < weights[l].rows(); ++r) {
                for (Eigen::Index c = 0; c < weights[l].cols(); ++c) weights[l](r, c) = v[i++];
            }
            for (Eigen::Index r = 0; r < biases[l].size(); ++r) biases[l][r] = v[i++];
        }
    }

    bool all_finite() const {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            if (!weights[l].allFinite() || !biases[l].allFinite()) return false;
        }
        return true;
    }

    void set_zero() {
        for (auto& w : weights) w.setZero();
        for (auto& b : biases) b.setZero();
    }

    /// this = (1 - tau) * this + tau * other
    void blend(const MlpParams& other, S tau) {
        for (std::size_t l = 0; l < weights.size(); ++l) {
            weights[l] = (S(1) - tau) * weights[l] + tau * other.weights[l];
            biases[l] = (S(1) - tau) * biases[l] + tau * other.biases[l];
        }
    }

    template <class T>
    MlpParams<T> cast() const {
        MlpParams<T> out;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            out.weights.push_back(weights[l].template cast<T>());
            out.biases.push_back(biases[l].template cast<T>());
        }
        return out;
    }

    friend bool operator==(const MlpParams& a, const MlpParams& b) {
        if (a.weights.size() != b.weights.size()) return false;
        for (std::size_t l = 0; l < a.weights.size(); ++l) {
            if (a.weights[l] != b.weights[l] || a.biases[l] != b.biases[l]) return false;
        }
        return true;
    }
};

/// Uniform Glorot init in +-sqrt(6 / (fanIn + fanOut)); zero biases.
template <class S>
MlpParams<S> init_params(const MlpSpec& spec, std::mt19937_64& rng) {
    spec.validate();
    MlpParams<S> p = MlpParams<S>::zeros(spec);
    for (std::size_t l = 0; l < spec.layer_count(); ++l) {
        const double bound = std::sqrt(6.0 / (spec.layerSizes[l] + spec.layerSizes[l + 1]));
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index r = 0; r < p.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < p.weights[l].cols(); ++c) p.weights[l](r, c) = S(u(rng));
        }
    }
    return p;
}

/// Post-activation of every layer; activations[0] is the input batch.
template <class S>
struct ForwardCache {
    std::vector<Mat<S>> activations;
};

/**
 * Batched forward pass. Columns of `input` are samples. The raw output layer
 * is returned for both heads; Gaussian heads are interpreted by the caller.
 */
template <class S>
Mat<S> forward(const MlpSpec& spec, const MlpParams<S>& params, const Mat<S>& input,
               ForwardCache<S>* cache = nullptr) {
    if (input.rows() != spec.input_size()) {
        throw std::invalid_argument("forward: input size does not match the spec");
    }
    if (!input.allFinite()) throw std::invalid_argument("forward: non-finite input");
    const std::size_t L = spec.layer_count();
    if (cache) {
        cache->activations.resize(L);
        cache->activations[0] = input;
    }
    Mat<S> a = input;
    for (std::size_t l = 0; l < L; ++l) {
        Mat<S> z = params.weights[l] * a;
        z.colwise() += params.biases[l];
        if (l + 1 < L) {
            a = z.cwiseMax(S(0));
            if (cache) cache->activations[l + 1] = a;
        } else {
            a = std::move(z);
        }
    }
    return a;
}

/**
 * Reverse pass for the cached batch. Gradients are summed over the batch
 * into `grads` (overwritten); returns the gradient with respect to the input.
 */
template <class S>
Mat<S> backward(const MlpSpec& spec, const MlpParams<S>& params, const ForwardCache<S>& cache,
                const Mat<S>& outputGrad, MlpParams<S>& grads) {
    const std::size_t L = spec.layer_count();
    if (grads.weights.size() != L) grads = MlpParams<S>::zeros(spec);
    Mat<S> delta = outputGrad;
    for (std::size_t l = L; l-- > 0;) {
        const Mat<S>& aPrev = cache.activations[l];
        grads.weights[l].noalias() = delta * aPrev.transpose();
        grads.biases[l] = delta.rowwise().sum();
        Mat<S> dPrev = params.weights[l].transpose() * delta;
        if (l > 0) {
            dPrev.array() *= (aPrev.array() > S(0)).template cast<S>();
        }
        delta = std::move(dPrev);
    }
    return delta;
}

}  // namespace td::nn
