#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>

namespace td::nn {

inline constexpr double kLogStdMin = -20.0;
inline constexpr double kLogStdMax = 2.0;
inline constexpr double kSquashEps = 1e-6;

/// Squashed sample with partials for reparameterised gradients.
template <class S>
struct SquashedSample {
    S value;          ///< tanh(mean + noise * std)
    S logDensity;     ///< density of `value` under the squashed Gaussian
    S raw;            ///< pre-squash sample
    S dValueDMean;
    S dValueDLogStd;
    S dLogDensityDMean;
    S dLogDensityDLogStd;
};

/**
 * value = tanh(mean + noise * exp(clamp(logStd))). The density is the
 * Gaussian density of the raw sample minus log(1 - value^2 + 1e-6).
 * Partials hold the noise fixed; the clamp has zero slope outside its range.
 */
template <class S>
SquashedSample<S> gaussian_head_sample(S mean, S logStd, S noise) {
    const bool clamped = logStd < S(kLogStdMin) || logStd > S(kLogStdMax);
    const S ls = std::clamp(logStd, S(kLogStdMin), S(kLogStdMax));
    const S sd = std::exp(ls);
    const S raw = mean + noise * sd;
    const S value = std::tanh(raw);
    const S ch = std::cosh(raw);
    const S oneMinus = S(1) / (ch * ch);
    const S squash = oneMinus + S(kSquashEps);
    const S logGauss = S(-0.5) * noise * noise - ls - S(0.5 * std::log(2.0 * std::numbers::pi));
    const S logDensity = logGauss - std::log(squash);

    // d(-log squash)/d raw = 2 value (1 - value^2) / squash
    const S dLogDRaw = S(2) * value * oneMinus / squash;
    const S dRawDLogStd = clamped ? S(0) : noise * sd;
    SquashedSample<S> out;
    out.value = value;
    out.logDensity = logDensity;
    out.raw = raw;
    out.dValueDMean = oneMinus;
    out.dValueDLogStd = oneMinus * dRawDLogStd;
    out.dLogDensityDMean = dLogDRaw;
    out.dLogDensityDLogStd = dLogDRaw * dRawDLogStd - (clamped ? S(0) : S(1));
    return out;
}

/// Density of a squashed value given the head outputs.
template <class S>
S squashed_log_density(S value, S mean, S logStd) {
    const S ls = std::clamp(logStd, S(kLogStdMin), S(kLogStdMax));
    const S sd = std::exp(ls);
    const S raw = std::atanh(value);
    const S z = (raw - mean) / sd;
    return S(-0.5) * z * z - ls - S(0.5 * std::log(2.0 * std::numbers::pi)) -
           std::log(S(1) - value * value + S(kSquashEps));
}

}  // namespace td::nn
