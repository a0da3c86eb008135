// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "rawdn/cne.hpp"
#include "rawdn/error.hpp"
#include "rawdn/noisemodel.hpp"
#include "support.hpp"

using namespace rawdn;

namespace {

// Chart of 64x64 uniform tiles at levels spread over (0.03, 0.9), one layout per plane.
std::vector<Plane> tile_chart(std::size_t size, std::uint64_t seed) {
    std::vector<Plane> planes;
    for (std::size_t k = 0; k < 4; ++k) {
        Plane p(size, size);
        const std::size_t tiles = size / 64;
        for (std::size_t r = 0; r < size; ++r) {
            for (std::size_t c = 0; c < size; ++c) {
                const std::size_t t = (r / 64) * tiles + c / 64;
                const std::size_t idx = (t * 7 + k * 3 + seed) % (tiles * tiles);
                p(r, c) = 0.03 + 0.87 * static_cast<double>(idx) / static_cast<double>(tiles * tiles - 1);
            }
        }
        planes.push_back(std::move(p));
    }
    return planes;
}

std::vector<Plane> add_noise(const std::vector<Plane>& clean, const NoiseParams& np, std::uint64_t seed) {
    std::vector<Plane> out;
    for (std::size_t k = 0; k < clean.size(); ++k) out.push_back(sample_noisy(clean[k], np, seed * 16 + k));
    return out;
}

bool has_warning(const StageEstimate& e, const std::string& needle) {
    return std::any_of(e.warnings.begin(), e.warnings.end(),
                       [&](const std::string& w) { return w.find(needle) != std::string::npos; });
}

double rel(double a, double b) { return std::abs(a - b) / b; }

}  // namespace

TEST_SUITE("cne") {

TEST_CASE("ATS keeps the low-variance half of two separated populations") {
    Plane guide(64, 64), means(64, 64);
    for (std::size_t r = 0; r < 64; ++r) {
        for (std::size_t c = 0; c < 64; ++c) {
            guide(r, c) = c < 32 ? 0.01 + 1e-4 * static_cast<double>(r) : 1.0 + 1e-3 * static_cast<double>(r);
            means(r, c) = static_cast<double>(r) / 64.0;
        }
    }
    const std::vector<Plane> g{guide}, m{means};
    const FlatMask mask = ats(g, m);
    CHECK(mask.fraction == doctest::Approx(0.5));
    CHECK(mask.count() == 64 * 32);
    for (std::size_t r = 0; r < 64; ++r) {
        CHECK(mask.at(0, r, 0));
        CHECK_FALSE(mask.at(0, r, 63));
    }
    CHECK(mask.candidates.size() == 20);
    CHECK(mask.candidates[mask.selected].level == doctest::Approx(0.5));
}

TEST_CASE("ATS on a half flat, half textured guide marks the flat half") {
    const Plane flat = test::noise_plane(64, 64, 1, 0.002, 1e-6);  // flat guide level is near constant
    Plane guide = flat;
    const Plane busy = test::random_plane(64, 64, 2, 0.05, 0.5);
    for (std::size_t r = 32; r < 64; ++r)
        for (std::size_t c = 0; c < 64; ++c) guide(r, c) = busy(r, c);
    const Plane means = test::random_plane(64, 64, 3, 0.1, 0.9);
    const std::vector<Plane> g{guide}, m{means};
    const FlatMask mask = ats(g, m);
    std::size_t flat_hits = 0, busy_hits = 0;
    for (std::size_t r = 0; r < 64; ++r) {
        for (std::size_t c = 0; c < 64; ++c) (r < 32 ? flat_hits : busy_hits) += mask.at(0, r, c);
    }
    CHECK(flat_hits == 64 * 32);
    CHECK(busy_hits == 0);
}

TEST_CASE("ATS with a constant guide") {
    const std::vector<Plane> m{test::random_plane(16, 16, 4)};
    const FlatMask zero = ats(std::vector<Plane>{Plane(16, 16, 0.0)}, m);
    CHECK(zero.degenerate);
    CHECK(zero.fraction == 1.0);
    CHECK(zero.count() == 256);

    const FlatMask flat = ats(std::vector<Plane>{Plane(16, 16, 0.3)}, m);
    CHECK_FALSE(flat.degenerate);
    CHECK(flat.fraction == 1.0);
    CHECK(flat.threshold == 0.3);
    CHECK(flat.candidates[flat.selected].level == doctest::Approx(1.0));
}

TEST_CASE("ATS is deterministic and honours a quantile override") {
    const std::vector<Plane> g{test::random_plane(40, 40, 5), test::random_plane(40, 40, 6)};
    const std::vector<Plane> m{test::random_plane(40, 40, 7), test::random_plane(40, 40, 8)};
    const FlatMask a = ats(g, m), b = ats(g, m);
    CHECK(a.planes == b.planes);
    CHECK(a.threshold == b.threshold);

    AtsOptions opt;
    opt.quantile_override = 0.3;
    const FlatMask o = ats(g, m, opt);
    CHECK(o.candidates[o.selected].level == doctest::Approx(0.3));
    CHECK(o.fraction == doctest::Approx(0.3).epsilon(0.01));

    opt.quantile_override = 1.5;
    CHECK_THROWS_AS(ats(g, m, opt), DomainError);
}

TEST_CASE("ATS input errors") {
    const std::vector<Plane> g{Plane(8, 8, -1.0)}, m{Plane(8, 8, 0.5)};
    CHECK_THROWS_AS(ats(g, m), DomainError);
    CHECK_THROWS_AS(ats(std::vector<Plane>{Plane(8, 8)}, std::vector<Plane>{Plane(8, 9)}), DimensionError);
    CHECK_THROWS_AS(estimate_coarse(std::vector<Plane>{Plane(20, 20)}), DimensionError);
}

TEST_CASE("coarse estimate on a tile chart") {
    const NoiseParams truth(4.6e-3, 7.2e-3);
    const auto clean = tile_chart(512, 1);
    const StageEstimate est = estimate_coarse(add_noise(clean, truth, 11));
    CHECK(rel(est.params.alpha, truth.alpha) <= 0.05);
    CHECK(rel(est.params.sigma, truth.sigma) <= 0.10);
    CHECK(est.samples.stage == SampleStage::Coarse);
    CHECK(est.samples.size() > 100);
    CHECK_FALSE(has_warning(est, "texture"));
}

TEST_CASE("fine estimate with the clean frame as reference") {
    const NoiseParams truth(1.9e-3, 2.5e-3);
    const auto clean = tile_chart(512, 2);
    const auto noisy = add_noise(clean, truth, 12);
    const StageEstimate fine = estimate_fine(noisy, clean);
    CHECK(rel(fine.params.alpha, truth.alpha) <= 0.03);
    CHECK(rel(fine.params.sigma, truth.sigma) <= 0.05);
    CHECK(fine.samples.stage == SampleStage::Fine);

    // On flat ground both stages see the same statistics.
    const StageEstimate coarse = estimate_coarse(noisy);
    CHECK(rel(coarse.params.alpha, fine.params.alpha) <= 0.05);
    CHECK(rel(coarse.params.sigma, fine.params.sigma) <= 0.10);
}

TEST_CASE("fine variance samples follow the noise line") {
    const NoiseParams truth(7.7e-3, 9.0e-3);
    const auto clean = tile_chart(512, 3);
    const StageEstimate fine = estimate_fine(add_noise(clean, truth, 13), clean);
    // Windowed variance of n = 841 samples has relative std sqrt(2 / n) ~ 5%.
    double worst = 0.0, sum = 0.0;
    for (const auto& s : fine.samples.samples) {
        const double expect = truth.alpha * s.mean + truth.sigma * truth.sigma;
        const double r = (s.variance - expect) / expect;
        sum += r * r;
        worst = std::max(worst, std::abs(r));
    }
    const double rms = std::sqrt(sum / static_cast<double>(fine.samples.size()));
    CHECK(rms <= 0.07);
    CHECK(worst <= 0.3);
}

TEST_CASE("residual compensation scales the fine variance") {
    const NoiseParams truth(3.85e-3, 4.5e-3);
    const auto clean = tile_chart(256, 4);
    const auto noisy = add_noise(clean, truth, 14);
    CneOptions opt;
    const StageEstimate plain = estimate_fine(noisy, clean, opt);
    opt.residual_ratio = 0.2;
    const StageEstimate comp = estimate_fine(noisy, clean, opt);
    CHECK(comp.params.alpha == doctest::Approx(plain.params.alpha / 0.8).epsilon(1e-6));
    opt.residual_ratio = 0.5;
    CHECK_THROWS_AS(estimate_fine(noisy, clean, opt), DomainError);
}

TEST_CASE("fine estimate with the noisy frame as its own reference warns") {
    const auto clean = tile_chart(256, 5);
    const auto noisy = add_noise(clean, NoiseParams(4.6e-3, 7.2e-3), 15);
    const StageEstimate fine = estimate_fine(noisy, noisy);
    CHECK(has_warning(fine, "no measurable noise variance"));
}

TEST_CASE("texture everywhere raises the texture warning") {
    std::vector<Plane> clean;
    for (std::size_t k = 0; k < 4; ++k) {
        Plane p(256, 256);
        for (std::size_t r = 0; r < 256; ++r)
            for (std::size_t c = 0; c < 256; ++c)
                p(r, c) = 0.4 + 0.3 * std::sin(0.11 * r + 0.3 * k) * std::cos(0.07 * c) + 0.1 * std::sin(0.023 * (r + 2 * c));
        clean.push_back(std::move(p));
    }
    const StageEstimate est = estimate_coarse(add_noise(clean, NoiseParams(1.1e-3, 2.2e-3), 16));
    CHECK(has_warning(est, "texture-dominated"));
}

TEST_CASE("report JSON carries the stage evidence") {
    const auto clean = tile_chart(256, 6);
    const auto noisy = add_noise(clean, NoiseParams(4.6e-3, 7.2e-3), 17);
    EstimationReport rep;
    rep.coarse = estimate_coarse(noisy);
    rep.fine = estimate_fine(noisy, clean);
    rep.final_params = rep.fine->params;
    const auto j = rep.to_json();
    CHECK(j.contains("coarse"));
    CHECK(j.contains("fine"));
    CHECK(j["params"]["alpha"].get<double>() == rep.final_params.alpha);
    CHECK(j["coarse"]["ats"]["candidates"].size() == 20);
}

}  // TEST_SUITE
