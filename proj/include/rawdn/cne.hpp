// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rawdn/noisemodel.hpp"
#include "rawdn/plane.hpp"

namespace rawdn {

/// One candidate threshold considered by adaptive threshold selection.
struct AtsCandidate {
    double level = 0.0;      // nominal quantile, 0.05 .. 1.00
    double threshold = 0.0;  // guide std at that quantile
    double fraction = 0.0;   // q: selected fraction of pixels
    std::size_t bins = 0;    // n: non-empty histogram bins of the selected means
    double score = 0.0;      // threshold^2 / (q n)
};

struct FlatMask {
    std::size_t width = 0;   // per-plane extent
    std::size_t height = 0;
    std::vector<std::vector<std::uint8_t>> planes;  // 1 = flat
    double threshold = 0.0;
    double fraction = 0.0;
    std::size_t bins = 0;
    std::size_t selected = 0;  // index into candidates
    std::vector<AtsCandidate> candidates;
    bool degenerate = false;   // all-zero guide: full mask

    bool at(std::size_t plane, std::size_t r, std::size_t c) const { return planes[plane][r * width + c] != 0; }
    std::size_t count() const;
};

struct AtsOptions {
    std::size_t candidates = 20;
    std::size_t histogram_bins = 100;
    double histogram_max = 1.0;  // white level in the units of the means
    /// Use the candidate nearest this quantile instead of the argmin.
    std::optional<double> quantile_override;
};

/// Adaptive threshold selection over planes pooled together. guide and means must have
/// matching shapes; guide values must be non-negative.
FlatMask ats(std::span<const Plane> guide_std, std::span<const Plane> means_for_bins, const AtsOptions& opt = {});

/// Coarse threshold, relative to the noise-only guide level, above which the image is
/// reported as texture-dominated.
inline constexpr double kTextureRatio = 10.0;

struct CneOptions {
    std::size_t p = 29;
    std::size_t p_blur = 19;
    AtsOptions ats;
    // Share of the noise variance the coarse denoiser leaves behind on flat ground. The fine
    // variance map is divided by (1 - residual_ratio); 0 keeps the plain difference.
    double residual_ratio = 0.0;
};

/// One estimation stage: fitted parameters plus the evidence behind them.
struct StageEstimate {
    NoiseParams params;
    FlatMask mask;
    MVSamples samples;
    LineFit fit;
    std::vector<std::string> warnings;
};

/// Planes are in normalized units (black 0, white 1).
StageEstimate estimate_coarse(std::span<const Plane> noisy, const CneOptions& opt = {});
StageEstimate estimate_fine(std::span<const Plane> noisy, std::span<const Plane> coarse_denoised,
                            const CneOptions& opt = {});

struct EstimationReport {
    std::optional<StageEstimate> coarse;
    std::optional<StageEstimate> fine;
    bool skipped = false;  // parameters supplied by the caller
    double residual_ratio = 0.0;
    NoiseParams final_params;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
};

nlohmann::json to_json(const NoiseParams& p);
nlohmann::json to_json(const FlatMask& m);

/// Fraction of flat planes per pixel, as an 8-bit plane-resolution image.
void write_mask_png(const FlatMask& mask, const std::filesystem::path& path);

}  // namespace rawdn
