// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

// Row kernels for the data-parallel inner loops. Every kernel has a scalar reference
// implementation; vector variants must agree with it (see tests/test_simd.cpp).

namespace rawdn::simd {

/// Forward EM-VST for one row. The bias table is a 1D slice of the LUT at a fixed
/// read-noise level, sampled uniformly in natural-log signal.
struct EmVstRowParams {
    double black = 0.0;
    double inv_alpha = 1.0;   // 1 / alpha in DN per electron
    double offset = 0.375;    // 3/8 + sigma_hat^2
    double inv_peak = 1.0;
    const double* bias = nullptr;
    std::size_t bias_count = 0;
    double log_min = 0.0;     // ln of the first signal node
    double inv_log_step = 1.0;
};

/// Algebraic inverse back to DN with clipping.
struct InverseRowParams {
    double half_peak = 0.5;  // peak / 2: the transform is 2 sqrt(.)
    double offset = 0.375;
    double alpha = 1.0;   // DN per electron
    double black = 0.0;
    double lo = 0.0;
    double hi = 65535.0;
};

struct KernelTable {
    std::string_view name;
    // out[c] = scale * (lower[c+span] - lower[c] - upper[c+span] + upper[c]); adds into out when accumulate.
    void (*box_sum_row)(const double* upper, const double* lower, std::size_t span, std::size_t n, double scale,
                        double* out, bool accumulate);
    // out = sqrt(max(0, m2 - m1^2))
    void (*std_from_moments)(const double* m1, const double* m2, std::size_t n, double* out);
    void (*emvst_forward_row)(const double* in, std::size_t n, const EmVstRowParams& p, double* out);
    void (*inverse_row)(const double* in, std::size_t n, const InverseRowParams& p, double* out);
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_kernels();
bool cpu_has_avx2();

/// Kernels selected for this process: AVX2 when compiled and supported by the CPU,
/// scalar otherwise. RAWDN_KERNELS=scalar forces the reference path.
const KernelTable& active_kernels();

}  // namespace rawdn::simd
