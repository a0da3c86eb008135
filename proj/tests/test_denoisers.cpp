// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <string>

#include "doctest.h"
#include "rawdn/denoisers.hpp"
#include "rawdn/error.hpp"
#include "rawdn/metrics.hpp"
#include "support.hpp"

using namespace rawdn;

namespace {

// Piecewise smooth test content in [0.1, 0.9].
Plane smooth_scene(std::size_t n, std::size_t k) {
    Plane p(n, n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            double v = 0.2 + 0.5 * static_cast<double>(c) / static_cast<double>(n);
            const double dr = static_cast<double>(r) - 0.5 * n, dc = static_cast<double>(c) - 0.4 * n;
            if (dr * dr + dc * dc < 0.06 * n * n) v = 0.75 - 0.05 * static_cast<double>(k);
            if (r > 0.7 * n && c < 0.3 * n) v = 0.15;
            p(r, c) = v;
        }
    }
    return p;
}

PlaneStack scene_stack(std::size_t n) {
    PlaneStack s;
    for (std::size_t k = 0; k < 4; ++k) s.push_back(smooth_scene(n, k));
    return s;
}

PlaneStack noisy_stack(const PlaneStack& clean, double sd, std::uint64_t seed) {
    PlaneStack out;
    for (std::size_t k = 0; k < clean.size(); ++k) {
        Plane p = clean[k];
        const Plane z = test::noise_plane(p.width(), p.height(), seed + k, 0.0, sd);
        for (std::size_t i = 0; i < p.size(); ++i) p.values()[i] += z.values()[i];
        out.push_back(std::move(p));
    }
    return out;
}

double stack_psnr(const PlaneStack& a, const PlaneStack& b) {
    double se = 0.0, n = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        for (std::size_t i = 0; i < a[k].size(); ++i) {
            const double d = a[k].values()[i] - b[k].values()[i];
            se += d * d;
            n += 1.0;
        }
    }
    return 10.0 * std::log10(n / se);
}

// Std of the output over interior pixels of a flat noisy stack.
double interior_std(const PlaneStack& s, std::size_t margin) {
    double sum = 0.0, sq = 0.0, n = 0.0;
    for (const auto& p : s) {
        for (std::size_t r = margin; r + margin < p.height(); ++r) {
            for (std::size_t c = margin; c + margin < p.width(); ++c) {
                sum += p(r, c);
                sq += p(r, c) * p(r, c);
                n += 1.0;
            }
        }
    }
    const double m = sum / n;
    return std::sqrt(sq / n - m * m);
}

std::string fake(const std::string& mode) { return std::string(RAWDN_FAKE_DENOISER) + " " + mode; }

}  // namespace

TEST_SUITE("denoisers") {

TEST_CASE("guidance") {
    const DenoiserGuidance g(0.02, 1.5);
    CHECK(g.effective() == doctest::Approx(0.03));
    CHECK(DenoiserGuidance(0.02).multiplier == 1.03);
    CHECK_THROWS_AS(DenoiserGuidance(0.0), DomainError);
    CHECK_THROWS_AS(DenoiserGuidance(0.1, -1.0), DomainError);
}

TEST_CASE("pass-through below the noise floor and for the identity") {
    const PlaneStack x = noisy_stack(scene_stack(32), 0.01, 1);
    for (const auto& name : {"identity", "gaussian", "dct"}) {
        CAPTURE(name);
        const auto d = make_denoiser(name);
        const PlaneStack y = d->denoise(x, 0.5 * kPassThroughSigma);
        for (std::size_t k = 0; k < 4; ++k) CHECK(y[k] == x[k]);
    }
    const PlaneStack y = IdentityDenoiser().denoise(x, 0.3);
    for (std::size_t k = 0; k < 4; ++k) CHECK(y[k] == x[k]);
}

TEST_CASE("constant planes stay constant") {
    const PlaneStack x(4, Plane(40, 40, 0.37));
    for (const auto& name : {"gaussian", "dct"}) {
        CAPTURE(name);
        const PlaneStack y = make_denoiser(name)->denoise(x, 0.05);
        for (const auto& p : y)
            for (double v : p.values()) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("shape and argument errors") {
    const PlaneStack x(4, Plane(16, 16, 0.5));
    CHECK_THROWS_AS(GaussianDenoiser().denoise(x, -1.0), DomainError);
    CHECK_THROWS_AS(GaussianDenoiser(0.0), DomainError);
    CHECK_THROWS_AS(DctDenoiser().denoise(PlaneStack(4, Plane(6, 6)), 0.1), DimensionError);
    CHECK_THROWS_AS(DctDenoiser().denoise(PlaneStack{Plane(16, 16), Plane(16, 8)}, 0.1), DimensionError);
    DctOptions bad;
    bad.stride = 9;
    CHECK_THROWS_AS(DctDenoiser{bad}, DomainError);
    CHECK_THROWS_AS(make_denoiser("nope"), ConfigError);
    CHECK_THROWS_AS(make_denoiser("external"), ConfigError);
}

TEST_CASE("PSNR gains on a piecewise smooth scene") {
    const PlaneStack clean = scene_stack(128);
    const double sd = 0.05;
    const PlaneStack noisy = noisy_stack(clean, sd, 2);
    const double base = stack_psnr(noisy, clean);
    const double g = stack_psnr(GaussianDenoiser().denoise(noisy, sd), clean);
    const double d = stack_psnr(DctDenoiser().denoise(noisy, sd), clean);
    MESSAGE("noisy " << base << " dB, gaussian " << g << " dB, dct " << d << " dB");
    CHECK(g - base >= 3.0);
    CHECK(d - base >= 6.0);
}

TEST_CASE("Gaussian flat-field std matches the kernel energy") {
    // iid noise through a separable kernel k keeps std sd * sum(k_i^2).
    const double sd = 0.05, scale = 16.0;
    const PlaneStack noisy = noisy_stack(PlaneStack(4, Plane(128, 128, 0.5)), sd, 3);
    const double ks = scale * sd;
    const int radius = static_cast<int>(std::ceil(3.0 * ks));
    double sum = 0.0, sum2 = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += std::exp(-0.5 * i * i / (ks * ks));
    for (int i = -radius; i <= radius; ++i) sum2 += std::pow(std::exp(-0.5 * i * i / (ks * ks)) / sum, 2);
    const double expect = sd * sum2;
    const double got = interior_std(GaussianDenoiser(scale).denoise(noisy, sd), 8);
    CHECK(got == doctest::Approx(expect).epsilon(0.10));
}

TEST_CASE("DCT flat-field residual and the Wiener pass") {
    const double sd = 0.05;
    const PlaneStack noisy = noisy_stack(PlaneStack(4, Plane(128, 128, 0.5)), sd, 4);
    DctOptions hard;
    hard.wiener = false;
    const double s1 = interior_std(DctDenoiser(hard).denoise(noisy, sd), 8);
    const double s2 = interior_std(DctDenoiser().denoise(noisy, sd), 8);
    MESSAGE("hard threshold " << s1 / sd << ", with Wiener " << s2 / sd);
    CHECK(s1 <= 0.5 * sd);
    CHECK(s2 <= s1);
}

TEST_CASE("translation consistency away from borders") {
    const PlaneStack noisy = noisy_stack(scene_stack(96), 0.03, 5);
    PlaneStack shifted;
    for (const auto& p : noisy) {
        Plane s(p.width(), p.height());
        for (std::size_t r = 0; r < p.height(); ++r)
            for (std::size_t c = 0; c < p.width(); ++c) s(r, c) = p(r, (c + 8) % p.width());
        shifted.push_back(std::move(s));
    }
    for (const auto& name : {"gaussian", "dct"}) {
        CAPTURE(name);
        const auto d = make_denoiser(name);
        const PlaneStack a = d->denoise(noisy, 0.03), b = d->denoise(shifted, 0.03);
        double worst = 0.0;
        for (std::size_t k = 0; k < 4; ++k)
            for (std::size_t r = 16; r < 80; ++r)
                for (std::size_t c = 16; c < 64; ++c) worst = std::max(worst, std::abs(b[k](r, c) - a[k](r, c + 8)));
        CHECK(worst <= 1e-9);
    }
}

TEST_CASE("external bridge round trips through a child process") {
    const PlaneStack x = noisy_stack(scene_stack(16), 0.02, 6);
    const PlaneStack echo = ExternalDenoiser(fake("echo")).denoise(x, 0.02);
    const PlaneStack half = ExternalDenoiser(fake("halve")).denoise(x, 0.02);
    REQUIRE(echo.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
        for (std::size_t i = 0; i < x[k].size(); ++i) {
            const double v = x[k].values()[i];
            CHECK(echo[k].values()[i] == static_cast<double>(static_cast<float>(v)));
            CHECK(half[k].values()[i] == static_cast<double>(0.5f * static_cast<float>(v)));
        }
    }
}

TEST_CASE("external bridge failures") {
    const PlaneStack x(4, Plane(8, 8, 0.5));
    try {
        ExternalDenoiser(fake("fail")).denoise(x, 0.02);
        FAIL("expected a bridge error");
    } catch (const BridgeError& e) {
        CHECK(std::string(e.what()).find("deliberate failure") != std::string::npos);
        CHECK(std::string(e.what()).find("status 3") != std::string::npos);
    }
    for (const auto& mode : {"badshape", "badsigma", "short", "silent"}) {
        CAPTURE(mode);
        CHECK_THROWS_AS(ExternalDenoiser(fake(mode)).denoise(x, 0.02), BridgeError);
    }
    CHECK_THROWS_AS(ExternalDenoiser(""), ConfigError);
}

TEST_CASE("iteration config") {
    IterConfig c;
    CHECK(c.resolve_gamma(0.02) == doctest::Approx(std::pow(5.0 / 32.87, 1.0 / 9.0)).epsilon(1e-14));
    c.steps = 1;
    CHECK(c.resolve_gamma(0.02) == 1.0);
    c.steps = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = IterConfig{};
    c.eta = 1.5;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = IterConfig{};
    c.gamma = 1.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = IterConfig{};
    c.target_sigma = 0.05;
    CHECK_THROWS_AS(c.resolve_gamma(0.02), ConfigError);
}

TEST_CASE("one iteration is a single denoiser call") {
    const PlaneStack x = noisy_stack(scene_stack(32), 0.03, 7);
    const DctDenoiser d;
    const DenoiserGuidance g(0.03);
    IterConfig c;
    c.steps = 1;
    IterTrace tr;
    const PlaneStack it = iterative_denoise(x, d, g, c, &tr);
    const PlaneStack one = d.denoise(x, g);
    for (std::size_t k = 0; k < 4; ++k) CHECK(it[k] == one[k]);
    CHECK(tr.sigmas.size() == 1);
    CHECK(tr.sigmas[0] == g.effective());
}

TEST_CASE("geometric schedule ends at the target level") {
    const PlaneStack x = noisy_stack(scene_stack(32), 0.03, 8);
    const DenoiserGuidance g(0.03);
    IterConfig c;
    IterTrace tr;
    iterative_denoise(x, GaussianDenoiser(), g, c, &tr);
    REQUIRE(tr.sigmas.size() == 10);
    for (std::size_t k = 0; k < 10; ++k) {
        CHECK(tr.sigmas[k] == doctest::Approx(g.effective() * std::pow(tr.gamma, static_cast<double>(k))).epsilon(1e-12));
    }
    CHECK(tr.sigmas.back() == doctest::Approx(g.effective() * 5.0 / 32.87).epsilon(1e-12));
}

TEST_CASE("deterministic refinement ignores the seed; the identity is a fixed point") {
    const PlaneStack x = noisy_stack(scene_stack(32), 0.03, 9);
    const DenoiserGuidance g(0.03);
    IterConfig a;
    a.eta = 1.0;
    a.seed = 1;
    IterConfig b = a;
    b.seed = 2;
    const PlaneStack ya = iterative_denoise(x, GaussianDenoiser(), g, a);
    const PlaneStack yb = iterative_denoise(x, GaussianDenoiser(), g, b);
    for (std::size_t k = 0; k < 4; ++k) CHECK(ya[k] == yb[k]);

    const PlaneStack id = iterative_denoise(x, IdentityDenoiser(), g, a);
    for (std::size_t k = 0; k < 4; ++k) CHECK(id[k] == x[k]);

    // With eta < 1 fresh noise enters and the seed matters.
    IterConfig s1, s2;
    s2.seed = 5;
    const PlaneStack za = iterative_denoise(x, GaussianDenoiser(), g, s1);
    const PlaneStack zb = iterative_denoise(x, GaussianDenoiser(), g, s2);
    CHECK_FALSE(za[0] == zb[0]);
    CHECK(iterative_denoise(x, GaussianDenoiser(), g, s1)[0] == za[0]);
}

TEST_CASE("residual noise ratio") {
    const DenoiserGuidance g(0.1, 1.0);
    CHECK(residual_noise_ratio(IdentityDenoiser(), g, 29) == doctest::Approx(1.0).epsilon(1e-12));
    // Gaussian of std 1.6 px: output variance is sd^2 (sum k_i^2)^2 of the input's.
    const double ks = 16.0 * 0.1;
    const int radius = static_cast<int>(std::ceil(3.0 * ks));
    double sum = 0.0, sum2 = 0.0;
    for (int i = -radius; i <= radius; ++i) sum += std::exp(-0.5 * i * i / (ks * ks));
    for (int i = -radius; i <= radius; ++i) sum2 += std::pow(std::exp(-0.5 * i * i / (ks * ks)) / sum, 2);
    CHECK(residual_noise_ratio(GaussianDenoiser(), g, 29) == doctest::Approx(sum2 * sum2).epsilon(0.15));
    const double dct = residual_noise_ratio(DctDenoiser(), DenoiserGuidance(0.02), 29);
    CHECK(dct > 0.0);
    CHECK(dct < 0.25);
}

}  // TEST_SUITE
