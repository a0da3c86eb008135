// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "rawdn/simd/kernels.hpp"

namespace rawdn::simd {

namespace {

void box_sum_row(const double* upper, const double* lower, std::size_t span, std::size_t n, double scale,
                 double* out, bool accumulate) {
    for (std::size_t c = 0; c < n; ++c) {
        const double s = scale * (lower[c + span] - lower[c] - upper[c + span] + upper[c]);
        out[c] = accumulate ? out[c] + s : s;
    }
}

void std_from_moments(const double* m1, const double* m2, std::size_t n, double* out) {
    for (std::size_t c = 0; c < n; ++c) {
        out[c] = std::sqrt(std::max(0.0, m2[c] - m1[c] * m1[c]));
    }
}

void emvst_forward_row(const double* in, std::size_t n, const EmVstRowParams& p, double* out) {
    const double last = static_cast<double>(p.bias_count - 1);
    const double min_signal = std::exp(p.log_min);
    for (std::size_t i = 0; i < n; ++i) {
        const double chi = (in[i] - p.black) * p.inv_alpha;
        const double v = chi + p.offset;
        const double g = v > 0.0 ? 2.0 * std::sqrt(v) : 0.0;
        const double clamped = std::max(chi, min_signal);
        const double t = std::clamp((std::log(clamped) - p.log_min) * p.inv_log_step, 0.0, last);
        const std::size_t k = std::min(static_cast<std::size_t>(t), p.bias_count - 2);
        const double w = t - static_cast<double>(k);
        const double bias = p.bias[k] + w * (p.bias[k + 1] - p.bias[k]);
        out[i] = (g - bias) * p.inv_peak;
    }
}

void inverse_row(const double* in, std::size_t n, const InverseRowParams& p, double* out) {
    for (std::size_t i = 0; i < n; ++i) {
        const double h = std::max(0.0, in[i] * p.half_peak);
        const double chi = h * h - p.offset;
        out[i] = std::clamp(p.alpha * chi + p.black, p.lo, p.hi);
    }
}

constexpr KernelTable kScalar{"scalar", &box_sum_row, &std_from_moments, &emvst_forward_row, &inverse_row};

}  // namespace

const KernelTable& scalar_kernels() { return kScalar; }

}  // namespace rawdn::simd
