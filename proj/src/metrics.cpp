// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/metrics.hpp"

#include <array>
#include <cmath>

namespace rawdn {

double psnr(const Plane& a, const Plane& b, double peak) {
    if (!a.same_shape(b) || a.empty()) throw DimensionError("psnr needs two non-empty planes of equal shape");
    if (!(peak > 0.0)) throw DomainError("psnr peak must be positive");
    auto x = a.values();
    auto y = b.values();
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    if (acc == 0.0) return std::numeric_limits<double>::infinity();
    const double mse = acc / static_cast<double>(x.size());
    return 10.0 * std::log10(peak * peak / mse);
}

namespace {

void check_pair(const BayerImage& a, const BayerImage& ref) {
    if (a.width() != ref.width() || a.height() != ref.height()) throw DimensionError("image sizes differ");
    if (a.cfa != ref.cfa) throw DimensionError("CFA patterns differ");
}

constexpr std::size_t kTaps = 11;

const std::array<double, kTaps>& window() {
    static const std::array<double, kTaps> w = [] {
        std::array<double, kTaps> k{};
        double s = 0.0;
        for (std::size_t i = 0; i < kTaps; ++i) {
            const double d = static_cast<double>(i) - 5.0;
            k[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
            s += k[i];
        }
        for (double& v : k) v /= s;
        return k;
    }();
    return w;
}

// Valid-region separable filtering: output is (w - 10) x (h - 10).
Plane filter_valid(const Plane& src) {
    const auto& k = window();
    const std::size_t ow = src.width() - (kTaps - 1), oh = src.height() - (kTaps - 1);
    Plane tmp(ow, src.height());
    for (std::size_t r = 0; r < src.height(); ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < kTaps; ++j) acc += k[j] * src(r, c + j);
            tmp(r, c) = acc;
        }
    }
    Plane out(ow, oh);
    for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
            double acc = 0.0;
            for (std::size_t j = 0; j < kTaps; ++j) acc += k[j] * tmp(r + j, c);
            out(r, c) = acc;
        }
    }
    return out;
}

Plane product(const Plane& a, const Plane& b) {
    Plane out(a.width(), a.height());
    auto x = a.values();
    auto y = b.values();
    auto o = out.values();
    for (std::size_t i = 0; i < o.size(); ++i) o[i] = x[i] * y[i];
    return out;
}

}  // namespace

double ssim(const Plane& a, const Plane& b, double range) {
    if (!a.same_shape(b)) throw DimensionError("ssim needs planes of equal shape");
    if (a.width() < kTaps || a.height() < kTaps) throw DimensionError("ssim needs planes of at least 11x11");
    if (!(range > 0.0)) throw DomainError("ssim range must be positive");
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    const Plane mu_a = filter_valid(a), mu_b = filter_valid(b);
    const Plane aa = filter_valid(product(a, a)), bb = filter_valid(product(b, b)), ab = filter_valid(product(a, b));
    double acc = 0.0;
    const std::size_t n = mu_a.size();
    for (std::size_t i = 0; i < n; ++i) {
        const double ma = mu_a.data()[i], mb = mu_b.data()[i];
        const double va = aa.data()[i] - ma * ma;
        const double vb = bb.data()[i] - mb * mb;
        const double cov = ab.data()[i] - ma * mb;
        acc += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    return acc / static_cast<double>(n);
}

double psnr(const BayerImage& a, const BayerImage& ref) {
    check_pair(a, ref);
    return psnr(a.data, ref.data, ref.range());
}

double ssim(const BayerImage& a, const BayerImage& ref) {
    check_pair(a, ref);
    const auto pa = pack_plane(a.data, a.cfa);
    const auto pr = pack_plane(ref.data, ref.cfa);
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) acc += ssim(pa[i], pr[i], ref.range());
    return acc / 4.0;
}

QualityScore quality(const BayerImage& a, const BayerImage& ref) { return {psnr(a, ref), ssim(a, ref)}; }

}  // namespace rawdn
