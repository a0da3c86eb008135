// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "rawdn/plane.hpp"
#include "rawdn/rawmodel.hpp"

namespace rawdn {

/// Identical inputs give +infinity.
double psnr(const Plane& a, const Plane& b, double peak);
/// Peak is white - black of `ref`; black/white/cfa of `a` must match.
double psnr(const BayerImage& a, const BayerImage& ref);

/// Gaussian-window SSIM (11 taps, sigma 1.5, K1 0.01, K2 0.03) over the valid region.
/// `range` is the dynamic range L of the data.
double ssim(const Plane& a, const Plane& b, double range);
/// Mean of per-plane SSIM over the packed R, G1, G2, B planes.
double ssim(const BayerImage& a, const BayerImage& ref);

struct QualityScore {
    double psnr = 0.0;
    double ssim = 0.0;
};
QualityScore quality(const BayerImage& a, const BayerImage& ref);

}  // namespace rawdn
