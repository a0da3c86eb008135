// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/filters.hpp"

#include <algorithm>
#include <string>

#include "rawdn/simd/kernels.hpp"

namespace rawdn {

namespace {

void check_kernel(const Plane& img, std::size_t p) {
    if (p == 0 || p % 2 == 0) throw DimensionError("window size must be odd and positive, got " + std::to_string(p));
    if (p > std::min(img.width(), img.height())) {
        throw DimensionError("window size " + std::to_string(p) + " exceeds image extent");
    }
}

// Knuth two-sum: a + b == s + err exactly.
inline void two_sum(double a, double b, double& s, double& err) {
    s = a + b;
    const double bb = s - a;
    err = (a - (s - bb)) + (b - bb);
}

}  // namespace

std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * n - 2 - i;
    }
    return i;
}

IntegralImage::IntegralImage(const Plane& src, std::size_t pad, bool squared)
    : src_w_(src.width()), src_h_(src.height()), pad_(pad), pw_(src.width() + 2 * pad), ph_(src.height() + 2 * pad) {
    const std::size_t s = stride();
    hi_.assign((ph_ + 1) * s, 0.0);
    const bool comp = src.size() > kCompensatedPixels;
    if (comp) lo_.assign((ph_ + 1) * s, 0.0);

    std::vector<double> line(pw_);
    const auto w = static_cast<std::ptrdiff_t>(src_w_);
    const auto h = static_cast<std::ptrdiff_t>(src_h_);
    const auto off = static_cast<std::ptrdiff_t>(pad_);
    for (std::size_t i = 0; i < ph_; ++i) {
        const auto sr = static_cast<std::size_t>(reflect101(static_cast<std::ptrdiff_t>(i) - off, h));
        const double* row = src.row(sr).data();
        for (std::size_t j = 0; j < pw_; ++j) {
            const double v = row[reflect101(static_cast<std::ptrdiff_t>(j) - off, w)];
            line[j] = squared ? v * v : v;
        }
        double* above = &hi_[i * s];
        double* cur = &hi_[(i + 1) * s];
        if (!comp) {
            double run = 0.0;
            for (std::size_t j = 0; j < pw_; ++j) {
                run += line[j];
                cur[j + 1] = above[j + 1] + run;
            }
        } else {
            const double* above_lo = &lo_[i * s];
            double* cur_lo = &lo_[(i + 1) * s];
            double run = 0.0, run_lo = 0.0;
            for (std::size_t j = 0; j < pw_; ++j) {
                double t, e;
                two_sum(run, line[j], t, e);
                run = t;
                run_lo += e;
                two_sum(above[j + 1], run, t, e);
                const double lo = above_lo[j + 1] + run_lo + e;
                two_sum(t, lo, cur[j + 1], cur_lo[j + 1]);
            }
        }
    }
}

double IntegralImage::at(std::size_t r, std::size_t c) const {
    const std::size_t idx = (r + 1) * stride() + (c + 1);
    return compensated() ? hi_[idx] + lo_[idx] : hi_[idx];
}

double IntegralImage::window_sum(std::size_t r, std::size_t c, std::size_t size) const {
    const std::size_t s = stride();
    const std::size_t a = r * s + c, b = r * s + c + size, d = (r + size) * s + c, e = (r + size) * s + c + size;
    if (!compensated()) return hi_[e] - hi_[d] - hi_[b] + hi_[a];
    // Double-double combination so large table magnitudes do not swamp the window sum.
    double sum = 0.0, lo = 0.0;
    const double terms[4] = {hi_[e], -hi_[d], -hi_[b], hi_[a]};
    for (double t : terms) {
        double ns, err;
        two_sum(sum, t, ns, err);
        sum = ns;
        lo += err;
    }
    lo += lo_[e] - lo_[d] - lo_[b] + lo_[a];
    return sum + lo;
}

void IntegralImage::window_means(std::size_t size, Plane& out) const {
    if (size != 2 * pad_ + 1) throw DimensionError("window size must equal 2*pad+1");
    out = Plane(src_w_, src_h_);
    const double scale = 1.0 / static_cast<double>(size * size);
    if (!compensated()) {
        const auto& k = simd::active_kernels();
        for (std::size_t r = 0; r < src_h_; ++r) {
            k.box_sum_row(&hi_[r * stride()], &hi_[(r + size) * stride()], size, src_w_, scale, out.row(r).data(),
                          false);
        }
        return;
    }
    for (std::size_t r = 0; r < src_h_; ++r) {
        double* dst = out.row(r).data();
        for (std::size_t c = 0; c < src_w_; ++c) dst[c] = window_sum(r, c, size) * scale;
    }
}

Plane box_mean(const Plane& img, std::size_t p) {
    check_kernel(img, p);
    Plane out;
    IntegralImage(img, p / 2).window_means(p, out);
    return out;
}

BoxStats box_stats(const Plane& img, std::size_t p) {
    check_kernel(img, p);
    BoxStats s;
    IntegralImage(img, p / 2).window_means(p, s.mean);
    // Second moments are taken about the image mean so a large common offset does not
    // cancel catastrophically in E[x^2] - E[x]^2.
    double shift = 0.0;
    for (double v : img.values()) shift += v;
    shift /= static_cast<double>(img.size());
    Plane centred(img.width(), img.height()), centred_mean(img.width(), img.height()), sq;
    {
        auto src = img.values();
        auto dst = centred.values();
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] - shift;
        auto m = s.mean.values();
        auto cm = centred_mean.values();
        for (std::size_t i = 0; i < m.size(); ++i) cm[i] = m[i] - shift;
    }
    IntegralImage(centred, p / 2, true).window_means(p, sq);
    s.std = Plane(img.width(), img.height());
    simd::active_kernels().std_from_moments(centred_mean.data(), sq.data(), img.size(), s.std.data());
    return s;
}

Plane box_std(const Plane& img, std::size_t p) { return box_stats(img, p).std; }

}  // namespace rawdn
