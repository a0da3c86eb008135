// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "rawdn/error.hpp"
#include "rawdn/harness.hpp"
#include "rawdn/metrics.hpp"
#include "rawdn/scenes.hpp"
#include "support.hpp"

using namespace rawdn;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

SceneOptions scene_opts(std::size_t n) {
    SceneOptions o;
    o.width = n;
    o.height = n;
    return o;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("psnr reference values") {
    const Plane a(16, 16, 0.5);
    CHECK(psnr(a, Plane(16, 16, 0.5 + 1.0 / 255.0), 1.0) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(psnr(a, Plane(16, 16, 0.5 - 10.0 / 255.0), 1.0) == doctest::Approx(28.1308).epsilon(1e-5));
    CHECK(psnr(a, a, 1.0) == std::numeric_limits<double>::infinity());
    const Plane b = test::random_plane(16, 16, 1);
    CHECK(psnr(a, b, 1.0) == psnr(b, a, 1.0));
    CHECK_THROWS_AS(psnr(a, Plane(8, 8), 1.0), DimensionError);

    // Bayer overload: peak is white - black.
    const BayerImage x(Plane(8, 8, 100.0), Cfa::RGGB, 0.0, 1000.0);
    const BayerImage y(Plane(8, 8, 110.0), Cfa::RGGB, 0.0, 1000.0);
    CHECK(psnr(x, y) == doctest::Approx(40.0));
}

TEST_CASE("ssim reference values") {
    const Plane a = test::random_plane(32, 32, 2);
    CHECK(ssim(a, a, 1.0) == doctest::Approx(1.0));
    const Plane b = test::random_plane(32, 32, 3);
    CHECK(ssim(a, b, 1.0) == doctest::Approx(ssim(b, a, 1.0)).epsilon(1e-12));
    CHECK(ssim(a, b, 1.0) < 0.2);
    // Constant planes: only the luminance term remains.
    const double c1 = 0.01 * 0.01;
    const double expect = (2.0 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);
    CHECK(ssim(Plane(20, 20, 0.5), Plane(20, 20, 0.6), 1.0) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(ssim(Plane(8, 8), Plane(8, 8), 1.0), DimensionError);
}

TEST_CASE("presets") {
    CHECK(find_preset("phone", 3200).alpha == 4.6e-3);
    CHECK(find_preset("dslr", 25600).sigma == 1.63e-2);
    CHECK_THROWS_AS(find_preset("phone", 100), ConfigError);
}

TEST_CASE("scenes are deterministic and bounded") {
    for (SceneKind k : {SceneKind::Natural, SceneKind::FlatPatches, SceneKind::Texture}) {
        CAPTURE(to_string(k));
        CHECK(parse_scene(to_string(k)) == k);
        const BayerImage a = make_scene(k, 4, scene_opts(128)), b = make_scene(k, 4, scene_opts(128));
        CHECK(a.data == b.data);
        CHECK_FALSE(make_scene(k, 5, scene_opts(128)).data == a.data);
        for (double v : a.data.values()) {
            CHECK(v >= a.black_level);
            CHECK(v <= a.white_level);
        }
    }
    CHECK_THROWS(parse_scene("bogus"));
}

TEST_CASE("synthetic suite is reproducible on disk") {
    test::TempDir dir("suite");
    const auto clean_dir = dir / "clean";
    std::filesystem::create_directories(clean_dir);
    for (int i = 0; i < 2; ++i) {
        save_raw(make_scene(SceneKind::Natural, 10 + i, scene_opts(64)), clean_dir / ("img" + std::to_string(i) + ".raw16"));
    }
    const auto m1 = make_synthetic_suite(clean_dir, kCameraPresets, 7, dir / "a");
    const auto m2 = make_synthetic_suite(clean_dir, kCameraPresets, 7, dir / "b");
    CHECK(slurp(m1) == slurp(m2));
    CHECK(slurp(dir / "a" / "phone_iso3200" / "img1_noisy.raw16") == slurp(dir / "b" / "phone_iso3200" / "img1_noisy.raw16"));

    const auto suite = load_suite(m1);
    CHECK(suite.size() == 2 * kCameraPresets.size());
    std::size_t rows = 0;
    std::ifstream in(m1);
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == 1 + suite.size());
    // Stored noisy frames are integer DN.
    for (double v : suite[0].noisy.data.values()) CHECK(v == std::round(v));

    const auto m3 = make_synthetic_suite(clean_dir, kCameraPresets, 8, dir / "c");
    CHECK(slurp(m3) != slurp(m1));

    std::filesystem::create_directories(dir / "empty");
    CHECK_THROWS_AS(load_clean_dir(dir / "empty"), ConfigError);
    CHECK_THROWS_AS(load_clean_dir(dir / "nowhere"), ConfigError);
}

TEST_CASE("added noise follows the preset") {
    const BayerImage flat(Plane(256, 256, 512.0 + 0.25 * (16383.0 - 512.0)), Cfa::RGGB, 512.0, 16383.0);
    const NoiseParams np(4.6e-3, 7.2e-3);
    const BayerImage noisy = add_noise(flat, np, 3);
    const double span = 16383.0 - 512.0;
    Plane unit(256, 256);
    for (std::size_t i = 0; i < unit.size(); ++i) unit.values()[i] = (noisy.data.values()[i] - 512.0) / span;
    const double var = std::pow(test::plane_std(unit), 2);
    CHECK(var == doctest::Approx(np.alpha * 0.25 + np.sigma * np.sigma).epsilon(0.02));
    const BayerImage q = quantize(noisy);
    for (double v : q.data.values()) CHECK(v == std::round(v));
}

TEST_CASE("VST validation flags thin sampling and stays relative at high signal") {
    const auto lut = shared_lut();
    const std::vector<double> chis{5.0, 1e4};
    const auto small = validate_vst(1.565, chis, 1000, 1, *lut);
    for (const auto& r : small) CHECK(r.low_confidence);
    const auto big = validate_vst(1.565, chis, 200000, 1, *lut);
    CHECK_FALSE(big[0].low_confidence);
    CHECK(big[0].pass);
    CHECK(big[0].added_std <= kAddedStdBound);
    CHECK(big[1].residual_signal <= 1e-4);
    CHECK_THROWS_AS(validate_vst(1.0, chis, 1, 1, *lut), DomainError);
    CHECK(default_vst_grid().front() == 1.0);
    CHECK(default_vst_grid().back() == 500.0);
}

TEST_CASE("estimation validation is reproducible") {
    std::vector<BayerImage> cleans{make_scene(SceneKind::FlatPatches, 1, scene_opts(512))};
    const std::array<CameraPreset, 1> rows{find_preset("phone", 3200)};
    const auto suite = synthesize_suite(cleans, rows, 5);
    const PipelineConfig cfg;
    const EstimationTable a = validate_estimation(suite, 2, cfg);
    const EstimationTable b = validate_estimation(suite, 2, cfg);
    REQUIRE(a.trials.size() == 2);
    REQUIRE(a.rows.size() == 1);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a.trials[i].fine.alpha == b.trials[i].fine.alpha);
        CHECK(a.trials[i].coarse.sigma == b.trials[i].coarse.sigma);
    }
    CHECK(a.trials[0].fine.alpha != a.trials[1].fine.alpha);
    CHECK(a.rows[0].trials == 2);
    MESSAGE("coarse " << a.rows[0].coarse_alpha_dev << " fine " << a.rows[0].fine_alpha_dev);
    CHECK(a.rows[0].coarse_alpha_dev <= 0.05);
    CHECK(a.rows[0].fine_alpha_dev <= 0.05);

    test::TempDir dir("est");
    write_estimation_csv(a, dir / "t.csv");
    write_estimation_trials_csv(a, dir / "trials.csv");
    CHECK(slurp(dir / "t.csv").rfind("camera", 0) == 0);
    CHECK_THROWS_AS(validate_estimation(suite, 0, cfg), DomainError);
}

TEST_CASE("blind and oracle runs are compared per entry") {
    std::vector<BayerImage> cleans{make_scene(SceneKind::Natural, 2, scene_opts(256))};
    const std::array<CameraPreset, 1> rows{find_preset("dslr", 6400)};
    const auto suite = synthesize_suite(cleans, rows, 6);
    const auto gaps = compare_blind_oracle(suite, PipelineConfig{});
    REQUIRE(gaps.size() == 1);
    CHECK(gaps[0].psnr_blind > gaps[0].psnr_noisy);
    CHECK(gaps[0].psnr_oracle - gaps[0].psnr_blind <= 0.5);
}

}  // TEST_SUITE
