// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "rawdn/cne.hpp"
#include "rawdn/denoisers.hpp"
#include "rawdn/noisemodel.hpp"
#include "rawdn/rawmodel.hpp"
#include "rawdn/vst.hpp"

namespace rawdn {

/// Every adjustable knob of a run. Each field has a `key = value` name (see apply()).
struct PipelineConfig {
    std::size_t p = 29;                  // p
    std::size_t p_blur = 19;             // p_blur
    std::optional<double> ats_quantile;  // ats_quantile
    double sigma_multiplier = 1.03;      // sigma_mult
    std::optional<double> override_alpha;  // alpha, normalized units
    std::optional<double> override_sigma;  // sigma, normalized units
    bool fine_residual = true;           // fine_residual: compensate leftover coarse noise

    std::string denoiser = "dct";        // denoiser
    std::string external_command;        // external_command
    DctOptions dct;                      // dct_threshold, dct_stride, dct_wiener
    double gaussian_scale = 16.0;        // gaussian_scale

    bool iterative = false;              // iterative
    IterConfig iter;                     // iter_steps, iter_eta, iter_gamma, iter_target_ratio

    LutGrid signal_grid = kDefaultSignalGrid;        // lut_signal_count, lut_signal_log10_min/max
    LutGrid read_noise_grid = kDefaultReadNoiseGrid; // lut_noise_count, lut_noise_log10_min/max
    std::filesystem::path lut_cache;     // lut_cache

    std::uint64_t seed = 0;              // seed

    /// Test hook applied to the coarse result before fine estimation.
    std::function<void(BayerImage&)> perturb_coarse;

    /// Parameters that replace estimation, when both alpha and sigma are given.
    std::optional<NoiseParams> noise_override() const;
    void set_noise_override(const NoiseParams& np);

    void validate() const;
    /// Sets one key; unknown keys and malformed values throw ConfigError.
    void apply(const std::string& key, const std::string& value);
    /// Reads `key = value` lines; `#` starts a comment.
    void load(const std::filesystem::path& path);

    std::unique_ptr<Denoiser> make_denoiser() const;
    CneOptions cne_options() const;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct PipelineResult {
    BayerImage denoised;
    std::optional<BayerImage> coarse_denoised;
    EstimationReport report;
    std::vector<TransformContext> contexts;  // one per denoising stage, in order
    DenoiserGuidance guidance;               // final stage
    std::optional<IterTrace> trace;
    std::vector<StageTiming> timings;
    std::uint64_t noisy_hash = 0;
    std::uint64_t final_input_hash = 0;  // image the final forward transform consumed

    nlohmann::json to_json() const;
};

/// One EM-VST denoise with known normalized parameters; iterative when cfg.iterative.
struct SingleDenoise {
    BayerImage image;
    TransformContext context;
    DenoiserGuidance guidance;
    std::optional<IterTrace> trace;
    std::uint64_t input_hash = 0;
};
SingleDenoise denoise_known(const BayerImage& noisy, const NoiseParams& params, const Denoiser& d,
                            const PipelineConfig& cfg, bool iterative);

/// Coarse estimate, one coarse denoise, fine estimate.
EstimationReport run_cne(const BayerImage& noisy, const Denoiser& d, const PipelineConfig& cfg);

/// Blind two-stage denoising; the final stage is iterative when cfg.iterative is set.
PipelineResult run_pipeline(const BayerImage& noisy, const PipelineConfig& cfg);

}  // namespace rawdn
