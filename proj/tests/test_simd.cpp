// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"
#include "rawdn/simd/kernels.hpp"
#include "rawdn/vst.hpp"

using namespace rawdn;
using namespace rawdn::simd;

namespace {

std::vector<double> uniform(std::size_t n, std::uint64_t seed, double lo, double hi) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = u(gen);
    return v;
}

double max_rel(const std::vector<double>& a, const std::vector<double>& b, double floor) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]) / std::max(std::abs(b[i]), floor));
    }
    return worst;
}

// Odd lengths exercise the scalar tail after the 4-wide body.
constexpr std::size_t kN = 1027;

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("kernel selection") {
    const KernelTable& active = active_kernels();
    CHECK((active.name == "scalar" || active.name == "avx2"));
    CHECK(scalar_kernels().name == "scalar");
    if (avx2_kernels() == nullptr || !cpu_has_avx2()) CHECK(active.name == "scalar");
}

TEST_CASE("vector kernels agree with the scalar reference") {
    const KernelTable* vec = avx2_kernels();
    if (vec == nullptr || !cpu_has_avx2()) {
        MESSAGE("AVX2 kernels unavailable; only the scalar path is exercised");
        return;
    }
    const KernelTable& ref = scalar_kernels();

    SUBCASE("box sums") {
        const std::size_t span = 29;
        const auto up = uniform(kN + span, 1, 0.0, 1e4), lo = uniform(kN + span, 2, 0.0, 1e4);
        for (bool acc : {false, true}) {
            std::vector<double> a(kN, 1.5), b(kN, 1.5);
            ref.box_sum_row(up.data(), lo.data(), span, kN, 1.0 / 841.0, a.data(), acc);
            vec->box_sum_row(up.data(), lo.data(), span, kN, 1.0 / 841.0, b.data(), acc);
            CHECK(max_rel(b, a, 1e-12) <= 1e-14);
        }
    }

    SUBCASE("std from moments") {
        const auto m1 = uniform(kN, 3, 0.0, 1.0);
        auto m2 = uniform(kN, 4, 0.0, 0.01);
        for (std::size_t i = 0; i < kN; ++i) m2[i] += m1[i] * m1[i] * (i % 7 == 0 ? 0.999 : 1.0);
        std::vector<double> a(kN), b(kN);
        ref.std_from_moments(m1.data(), m2.data(), kN, a.data());
        vec->std_from_moments(m1.data(), m2.data(), kN, b.data());
        CHECK(max_rel(b, a, 1e-12) <= 1e-14);
    }

    SUBCASE("forward transform row") {
        const auto lut = shared_lut();
        const double s = 1.565;
        const std::vector<double> slice = lut->slice(s);
        const auto& g = lut->signal_grid();
        EmVstRowParams p;
        p.black = 512.0;
        p.inv_alpha = 1.0 / 72.9;
        p.offset = 0.375 + s * s;
        p.inv_peak = 1.0 / 30.0;
        p.bias = slice.data();
        p.bias_count = slice.size();
        p.log_min = g.log10_min * std::log(10.0);
        p.inv_log_step = static_cast<double>(g.count - 1) / ((g.log10_max - g.log10_min) * std::log(10.0));
        auto in = uniform(kN, 5, 300.0, 16383.0);
        in[0] = 512.0;  // chi = 0
        in[1] = 0.0;    // below the transform's domain
        std::vector<double> a(kN), b(kN);
        ref.emvst_forward_row(in.data(), kN, p, a.data());
        vec->emvst_forward_row(in.data(), kN, p, b.data());
        CHECK(max_rel(b, a, 1e-6) <= 1e-12);
    }

    SUBCASE("inverse row") {
        InverseRowParams p;
        p.half_peak = 15.0;
        p.offset = 0.375 + 2.45;
        p.alpha = 72.9;
        p.black = 512.0;
        p.lo = 480.0;
        p.hi = 16383.0;
        const auto in = uniform(kN, 6, -0.1, 1.2);
        std::vector<double> a(kN), b(kN);
        ref.inverse_row(in.data(), kN, p, a.data());
        vec->inverse_row(in.data(), kN, p, b.data());
        CHECK(max_rel(b, a, 1.0) <= 1e-12);
    }
}

}  // TEST_SUITE
