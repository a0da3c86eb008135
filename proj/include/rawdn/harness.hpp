// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rawdn/noisemodel.hpp"
#include "rawdn/pipeline.hpp"
#include "rawdn/rawmodel.hpp"
#include "rawdn/vst.hpp"

namespace rawdn {

/// Reference noise levels in normalized units (black 0, white 1).
struct CameraPreset {
    std::string_view camera;
    int iso;
    double alpha;
    double sigma;

    NoiseParams params() const { return {alpha, sigma}; }
};

inline constexpr std::array<CameraPreset, 8> kCameraPresets{{
    {"phone", 800, 1.10e-3, 2.20e-3},
    {"phone", 1600, 2.30e-3, 4.00e-3},
    {"phone", 3200, 4.60e-3, 7.20e-3},
    {"phone", 6400, 9.10e-3, 1.30e-2},
    {"dslr", 3200, 1.90e-3, 2.50e-3},
    {"dslr", 6400, 3.85e-3, 4.50e-3},
    {"dslr", 12800, 7.70e-3, 9.00e-3},
    {"dslr", 25600, 1.55e-2, 1.63e-2},
}};

const CameraPreset& find_preset(std::string_view camera, int iso);

/// Poisson-Gaussian noise with normalized parameters applied to a clean frame; unrounded.
BayerImage add_noise(const BayerImage& clean, const NoiseParams& params, std::uint64_t seed);
/// Rounds to integer DN and clamps to the 16-bit range, as stored on disk.
BayerImage quantize(const BayerImage& img);

struct SuiteEntry {
    std::string image;
    CameraPreset preset;
    std::uint64_t seed = 0;
    BayerImage clean;
    BayerImage noisy;
};

/// One noisy copy of every clean image for every preset; seeds derive from `seed`.
std::vector<SuiteEntry> synthesize_suite(const std::vector<BayerImage>& cleans, std::span<const CameraPreset> rows,
                                         std::uint64_t seed);

/// Clean sources: `.raw16` pairs (used as is) and `.png` files (decoded to linear gray,
/// replicated over the mosaic). Sorted by file name.
std::vector<BayerImage> load_clean_dir(const std::filesystem::path& dir);

/// Writes `<camera>_iso<iso>/<image>_{clean,noisy}.raw16` pairs and `manifest.csv` with
/// columns image,camera,iso,alpha,sigma,seed,clean,noisy. Returns the manifest path.
std::filesystem::path make_synthetic_suite(const std::filesystem::path& clean_dir, std::span<const CameraPreset> rows,
                                           std::uint64_t seed, const std::filesystem::path& out_dir);
std::vector<SuiteEntry> load_suite(const std::filesystem::path& manifest);

// ---------------------------------------------------------------------------------------

/// Monte Carlo check of the expectation-matched transform at one signal level, in the
/// stabilized domain (unit noise std). The residual is estimated paired: the exact
/// E[f(z)] - f(chi) is the quadrature bias, so only the mean of the looked-up correction
/// is sampled.
struct VstRecord {
    double chi = 0.0;
    double sigma_hat = 0.0;
    std::size_t n = 0;
    double exact_bias = 0.0;         // e(chi)
    double mean_correction = 0.0;    // mean of lut(max(z, 0))
    double residual = 0.0;           // |mean_correction - e(chi)| / |e(chi)|
    double residual_se = 0.0;        // standard error of residual
    double residual_direct = 0.0;    // |mean(output) - f(chi)| / |e(chi)|, unpaired
    double residual_direct_se = 0.0;
    double residual_signal = 0.0;    // |mean_correction - e(chi)| / f(chi)
    double added_std = 0.0;          // std of the correction term
    double std_ratio = 0.0;          // std(output) / std(f(z))
    bool low_confidence = false;
    bool pass = false;
};

inline constexpr double kAddedStdBound = 0.03;
inline constexpr double kResidualBound = 0.08;

std::vector<VstRecord> validate_vst(double sigma_hat, std::span<const double> chis, std::size_t n, std::uint64_t seed,
                                    const BiasLut& lut);
void write_vst_csv(const std::vector<VstRecord>& records, const std::filesystem::path& path);

/// Default signal grid of the validation: 1 .. 500 electrons.
std::vector<double> default_vst_grid();

struct EstimationTrial {
    std::string image;
    CameraPreset preset;
    std::size_t trial = 0;
    NoiseParams coarse;
    NoiseParams fine;
    double coarse_alpha_dev = 0.0;  // |est - true| / true
    double coarse_sigma_dev = 0.0;
    double fine_alpha_dev = 0.0;
    double fine_sigma_dev = 0.0;
    double fine_rmse = 0.0;  // fit residual of the fine samples
    std::size_t warnings = 0;
};

struct EstimationRow {
    CameraPreset preset;
    std::size_t trials = 0;
    NoiseParams mean_coarse;
    NoiseParams mean_fine;
    double coarse_alpha_dev = 0.0;  // mean of per-trial deviations
    double coarse_sigma_dev = 0.0;
    double fine_alpha_dev = 0.0;
    double fine_sigma_dev = 0.0;
    double refined_fraction = 0.0;  // trials with fine alpha deviation <= coarse
};

struct EstimationTable {
    std::vector<EstimationTrial> trials;
    std::vector<EstimationRow> rows;  // preset order of first appearance
};

/// Runs coarse and fine estimation on every entry `trials` times; trial 0 uses the stored
/// noisy frame, later trials redraw noise from the clean frame.
EstimationTable validate_estimation(const std::vector<SuiteEntry>& suite, std::size_t trials,
                                    const PipelineConfig& cfg);
void write_estimation_csv(const EstimationTable& table, const std::filesystem::path& path);
void write_estimation_trials_csv(const EstimationTable& table, const std::filesystem::path& path);

struct GapRecord {
    std::string image;
    CameraPreset preset;
    double psnr_noisy = 0.0;
    double psnr_blind = 0.0;
    double psnr_oracle = 0.0;
};

/// Blind pipeline against the same pipeline given the generating parameters.
std::vector<GapRecord> compare_blind_oracle(const std::vector<SuiteEntry>& suite, const PipelineConfig& cfg);

}  // namespace rawdn
