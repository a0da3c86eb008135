// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "rawdn/plane.hpp"

namespace rawdn {

/// Poisson-Gaussian parameters, Var(y) = alpha * x + sigma^2. Units follow the data they
/// describe; the pipeline uses black-to-white normalized units throughout.
struct NoiseParams {
    double alpha = 1.0;
    double sigma = 0.0;

    NoiseParams() = default;
    NoiseParams(double alpha, double sigma);

    /// Read noise in electrons.
    double sigma_hat() const { return sigma / alpha; }
    /// Same parameters expressed in a data scale multiplied by `scale`.
    NoiseParams scaled(double scale) const { return {alpha * scale, sigma * scale}; }
};

/// Smallest gain an estimator reports; fits that come out non-positive are clamped here.
inline constexpr double kMinAlpha = 1e-9;

/// Counter-based generator: draw n of stream s under seed k depends only on (k, s, n),
/// so rows or tiles can be generated in any order with identical results.
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint64_t next_u64();
    /// Uniform in the open interval (0, 1).
    double uniform();
    double normal();
    std::int64_t poisson(double lambda);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// y = alpha * Poisson(x / alpha) + N(0, sigma^2) per pixel; row r uses stream r.
/// Output is not clipped.
Plane sample_noisy(const Plane& clean, const NoiseParams& params, std::uint64_t seed);

enum class SampleStage { Coarse, Fine, Pooled };
std::string_view to_string(SampleStage stage);

struct MVSample {
    double mean = 0.0;
    double variance = 0.0;
    double weight = 1.0;
};

struct MVSamples {
    std::vector<MVSample> samples;
    SampleStage stage = SampleStage::Coarse;

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }
};

MVSamples pool_samples(const std::vector<MVSamples>& sets);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t used = 0;       // samples kept after the robust pass
    std::size_t discarded = 0;
    bool intercept_clamped = false;
    std::vector<std::uint8_t> inliers;  // per input sample, 1 if used by the final fit
};

/// Weighted least squares of V = alpha*I + sigma^2, one pass discarding residuals more than
/// 3 MAD from the median residual, then a refit; a negative intercept is replaced by a fit
/// through the origin.
LineFit fit_line_robust(const MVSamples& samples);

/// fit_line_robust mapped to NoiseParams (sigma = sqrt(intercept), alpha >= kMinAlpha).
NoiseParams fit_least_squares(const MVSamples& samples);

struct ResidualStats {
    double rmse = 0.0;
    double outlier_fraction = 0.0;
};
ResidualStats residual_stats(const MVSamples& samples, const NoiseParams& params);

/// CSV with header `mean,variance,weight,stage`.
void write_samples_csv(const MVSamples& samples, const std::filesystem::path& path);
MVSamples read_samples_csv(const std::filesystem::path& path);

}  // namespace rawdn
