// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "rawdn/simd/kernels.hpp"

namespace rawdn::simd {

namespace {

// Natural log for positive normal doubles. Mantissa folded into [sqrt(1/2), sqrt(2)),
// then log(m) = 2 atanh((m-1)/(m+1)) by odd series; error below 2 ulp over that range.
inline __m256d log_pd(__m256d x) {
    const __m256i bits = _mm256_castpd_si256(x);
    const __m256i mant_mask = _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL);
    const __m256i one_bits = _mm256_set1_epi64x(0x3FF0000000000000LL);
    __m256d m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, mant_mask), one_bits));

    // Biased exponent as double via the 2^52 magic-number trick.
    const __m256i exp_bits = _mm256_srli_epi64(bits, 52);
    const __m256i magic = _mm256_set1_epi64x(0x4330000000000000LL);
    __m256d e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(exp_bits, magic)), _mm256_set1_pd(4503599627370496.0));
    e = _mm256_sub_pd(e, _mm256_set1_pd(1023.0));

    const __m256d fold = _mm256_cmp_pd(m, _mm256_set1_pd(1.4142135623730951), _CMP_GT_OQ);
    m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), fold);
    e = _mm256_add_pd(e, _mm256_and_pd(fold, _mm256_set1_pd(1.0)));

    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
    const __m256d s2 = _mm256_mul_pd(s, s);
    __m256d poly = _mm256_set1_pd(1.0 / 19.0);
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 17.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 15.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 13.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 11.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 9.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 7.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 5.0));
    poly = _mm256_fmadd_pd(poly, s2, _mm256_set1_pd(1.0 / 3.0));
    poly = _mm256_fmadd_pd(poly, s2, one);
    const __m256d log_m = _mm256_mul_pd(_mm256_add_pd(s, s), poly);
    return _mm256_fmadd_pd(e, _mm256_set1_pd(0.69314718055994530942), log_m);
}

void box_sum_row(const double* upper, const double* lower, std::size_t span, std::size_t n, double scale,
                 double* out, bool accumulate) {
    const __m256d vs = _mm256_set1_pd(scale);
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
        // Same association as the scalar kernel so results are bit-identical.
        const __m256d d = _mm256_add_pd(
            _mm256_sub_pd(_mm256_sub_pd(_mm256_loadu_pd(lower + c + span), _mm256_loadu_pd(lower + c)),
                          _mm256_loadu_pd(upper + c + span)),
            _mm256_loadu_pd(upper + c));
        __m256d s = _mm256_mul_pd(vs, d);
        if (accumulate) s = _mm256_add_pd(_mm256_loadu_pd(out + c), s);
        _mm256_storeu_pd(out + c, s);
    }
    for (; c < n; ++c) {
        const double s = scale * (lower[c + span] - lower[c] - upper[c + span] + upper[c]);
        out[c] = accumulate ? out[c] + s : s;
    }
}

void std_from_moments(const double* m1, const double* m2, std::size_t n, double* out) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
        const __m256d a = _mm256_loadu_pd(m1 + c);
        const __m256d var = _mm256_sub_pd(_mm256_loadu_pd(m2 + c), _mm256_mul_pd(a, a));
        _mm256_storeu_pd(out + c, _mm256_sqrt_pd(_mm256_max_pd(var, zero)));
    }
    for (; c < n; ++c) out[c] = std::sqrt(std::max(0.0, m2[c] - m1[c] * m1[c]));
}

void emvst_forward_row(const double* in, std::size_t n, const EmVstRowParams& p, double* out) {
    const double last = static_cast<double>(p.bias_count - 1);
    const double min_signal = std::exp(p.log_min);
    const __m256d black = _mm256_set1_pd(p.black);
    const __m256d inv_alpha = _mm256_set1_pd(p.inv_alpha);
    const __m256d offset = _mm256_set1_pd(p.offset);
    const __m256d inv_peak = _mm256_set1_pd(p.inv_peak);
    const __m256d vmin = _mm256_set1_pd(min_signal);
    const __m256d log_min = _mm256_set1_pd(p.log_min);
    const __m256d inv_step = _mm256_set1_pd(p.inv_log_step);
    const __m256d vlast = _mm256_set1_pd(last);
    const __m256d max_index = _mm256_set1_pd(static_cast<double>(p.bias_count - 2));
    const __m256d zero = _mm256_setzero_pd();
    const __m256d two = _mm256_set1_pd(2.0);

    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d chi = _mm256_mul_pd(_mm256_sub_pd(_mm256_loadu_pd(in + i), black), inv_alpha);
        const __m256d v = _mm256_add_pd(chi, offset);
        const __m256d positive = _mm256_cmp_pd(v, zero, _CMP_GT_OQ);
        const __m256d g = _mm256_and_pd(positive, _mm256_mul_pd(two, _mm256_sqrt_pd(_mm256_max_pd(v, zero))));

        const __m256d clamped = _mm256_max_pd(chi, vmin);
        __m256d t = _mm256_mul_pd(_mm256_sub_pd(log_pd(clamped), log_min), inv_step);
        t = _mm256_min_pd(_mm256_max_pd(t, zero), vlast);
        const __m256d k = _mm256_min_pd(_mm256_floor_pd(t), max_index);
        const __m256d w = _mm256_sub_pd(t, k);
        const __m128i idx = _mm256_cvttpd_epi32(k);
        const __m256d b0 = _mm256_i32gather_pd(p.bias, idx, 8);
        const __m256d b1 = _mm256_i32gather_pd(p.bias + 1, idx, 8);
        const __m256d bias = _mm256_fmadd_pd(w, _mm256_sub_pd(b1, b0), b0);
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_sub_pd(g, bias), inv_peak));
    }
    for (; i < n; ++i) {
        const double chi = (in[i] - p.black) * p.inv_alpha;
        const double v = chi + p.offset;
        const double g = v > 0.0 ? 2.0 * std::sqrt(v) : 0.0;
        const double t = std::clamp((std::log(std::max(chi, min_signal)) - p.log_min) * p.inv_log_step, 0.0, last);
        const std::size_t k = std::min(static_cast<std::size_t>(t), p.bias_count - 2);
        const double w = t - static_cast<double>(k);
        out[i] = (g - (p.bias[k] + w * (p.bias[k + 1] - p.bias[k]))) * p.inv_peak;
    }
}

void inverse_row(const double* in, std::size_t n, const InverseRowParams& p, double* out) {
    const __m256d half_peak = _mm256_set1_pd(p.half_peak);
    const __m256d offset = _mm256_set1_pd(p.offset);
    const __m256d alpha = _mm256_set1_pd(p.alpha);
    const __m256d black = _mm256_set1_pd(p.black);
    const __m256d lo = _mm256_set1_pd(p.lo);
    const __m256d hi = _mm256_set1_pd(p.hi);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d h = _mm256_max_pd(_mm256_mul_pd(_mm256_loadu_pd(in + i), half_peak), zero);
        const __m256d chi = _mm256_sub_pd(_mm256_mul_pd(h, h), offset);
        const __m256d y = _mm256_add_pd(_mm256_mul_pd(alpha, chi), black);
        _mm256_storeu_pd(out + i, _mm256_min_pd(_mm256_max_pd(y, lo), hi));
    }
    for (; i < n; ++i) {
        const double h = std::max(0.0, in[i] * p.half_peak);
        out[i] = std::clamp(p.alpha * (h * h - p.offset) + p.black, p.lo, p.hi);
    }
}

constexpr KernelTable kAvx2{"avx2", &box_sum_row, &std_from_moments, &emvst_forward_row, &inverse_row};

}  // namespace

const KernelTable* avx2_kernels_impl() { return &kAvx2; }

}  // namespace rawdn::simd
