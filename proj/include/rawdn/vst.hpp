// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "rawdn/noisemodel.hpp"
#include "rawdn/rawmodel.hpp"

namespace rawdn {

/// Signal level (electrons) below which the bias is integrated numerically.
inline constexpr double kLowSignalThreshold = 50.0;

/// Generalized Anscombe transform of a normalized value z: 2 sqrt(z + 3/8 + s^2), 0 at and
/// below the domain edge.
double gat(double z, double sigma_hat);
Plane gat(const Plane& z, double sigma_hat);

/// Algebraic inverse (w/2)^2 - 3/8 - s^2. Throws DomainError for w < 0.
double iat(double w, double sigma_hat);

/// E[gat(z) | chi] under z ~ Poisson(chi) + N(0, s^2), by truncated Poisson mixture and
/// quadrature over each Gaussian component.
double expected_gat(double chi, double sigma_hat);

/// Quadrature bias E[gat(z)|chi] - gat(chi), valid for any chi >= 0.
double bias_quadrature(double chi, double sigma_hat);
/// Second-order delta-method bias -(chi + s^2) / (4 (chi + 3/8 + s^2)^(3/2)).
double bias_closed_form(double chi, double sigma_hat);
/// Quadrature below kLowSignalThreshold, closed form at and above it.
double bias_function(double chi, double sigma_hat);

/// Log10-uniform grid descriptor.
struct LutGrid {
    std::uint32_t count = 0;
    double log10_min = 0.0;
    double log10_max = 0.0;

    double node(std::size_t i) const;
    friend bool operator==(const LutGrid&, const LutGrid&) = default;
};

inline constexpr LutGrid kDefaultSignalGrid{512, -2.0, 4.0};
inline constexpr LutGrid kDefaultReadNoiseGrid{64, -2.0, 2.0};

/// Bias table over (read noise, signal); values are row-major with one row per read-noise node.
class BiasLut {
public:
    static constexpr std::uint32_t kVersion = 1;

    BiasLut(LutGrid signal, LutGrid read_noise, std::vector<double> values);

    const LutGrid& signal_grid() const { return signal_; }
    const LutGrid& read_noise_grid() const { return read_noise_; }
    std::span<const double> values() const { return values_; }
    double value(std::size_t noise_index, std::size_t signal_index) const {
        return values_[noise_index * signal_.count + signal_index];
    }

    /// Bilinear in (log chi, log s); queries outside the grid clamp to its boundary.
    double lookup(double chi, double sigma_hat) const;

    /// Row at a fixed read noise (interpolated between rows), for the per-pixel kernels.
    std::vector<double> slice(double sigma_hat) const;

private:
    LutGrid signal_;
    LutGrid read_noise_;
    std::vector<double> values_;
};

BiasLut build_lut(const LutGrid& signal = kDefaultSignalGrid, const LutGrid& read_noise = kDefaultReadNoiseGrid);
double lut_bias(const BiasLut& lut, double chi, double sigma_hat);

/// Binary cache: "YLUT", u32 version, per grid {u32 count, f64 log10-min, f64 log10-max}
/// (signal first), then f64 values row-major; little-endian.
void save_lut(const BiasLut& lut, const std::filesystem::path& path);
BiasLut load_lut(const std::filesystem::path& path);

/// Process-wide memoized table for the given grids. With a cache path, a matching file is
/// loaded; a missing file or a version/grid mismatch triggers a rebuild and rewrite.
std::shared_ptr<const BiasLut> shared_lut(const LutGrid& signal = kDefaultSignalGrid,
                                          const LutGrid& read_noise = kDefaultReadNoiseGrid,
                                          const std::filesystem::path& cache = {});

/// Everything the forward and inverse transforms need for one parameter set.
struct TransformContext {
    NoiseParams params;  // normalized units (black..white spans 1)
    double black_level = 0.0;
    double white_level = 1.0;
    double alpha_dn = 1.0;  // DN per electron
    double sigma_dn = 0.0;
    double sigma_hat = 0.0;
    double peak = 1.0;       // gat of the white level
    double sigma_snr = 1.0;  // 1 / peak
    double low_signal_threshold = kLowSignalThreshold;
};

TransformContext make_context(const NoiseParams& params, double black_level, double white_level);

/// Expectation-matched forward transform: (gat(chi) - bias(max(chi, 0))) / peak per pixel.
NormalizedImage em_vst_forward(const BayerImage& img, const TransformContext& ctx, const BiasLut& lut);

/// Plain algebraic inverse back to DN, clipped to [black - 4 sigma, white].
BayerImage inverse_after_denoise(const NormalizedImage& den, const TransformContext& ctx);

/// GAT + unbiased-inverse comparison path: the bias is estimated from the denoised value
/// and removed during inversion instead of before denoising.
BayerImage uiat_baseline(const NormalizedImage& den, const TransformContext& ctx, const BiasLut& lut);

/// Plain GAT forward scaled by 1/peak with no bias correction (input to uiat_baseline).
NormalizedImage gat_forward(const BayerImage& img, const TransformContext& ctx);

}  // namespace rawdn
