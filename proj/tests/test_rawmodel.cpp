// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <fstream>

#include "doctest.h"
#include "rawdn/error.hpp"
#include "rawdn/rawmodel.hpp"
#include "support.hpp"

using namespace rawdn;
using rawdn::test::TempDir;

namespace {

BayerImage random_raw(std::size_t w, std::size_t h, std::uint64_t seed, Cfa cfa = Cfa::RGGB) {
    Plane p = test::random_plane(w, h, seed, 0.0, 65535.0);
    for (double& v : p.values()) v = std::floor(v);
    return BayerImage(std::move(p), cfa, 64.0, 16383.0, "t");
}

}  // namespace

TEST_SUITE("rawmodel") {

TEST_CASE("pack of a 2x2 RGGB frame keeps raster order") {
    Plane m(2, 2, std::vector<double>{1, 2, 3, 4});
    auto p = pack_plane(m, Cfa::RGGB);
    CHECK(p[0](0, 0) == 1);
    CHECK(p[1](0, 0) == 2);
    CHECK(p[2](0, 0) == 3);
    CHECK(p[3](0, 0) == 4);
}

TEST_CASE("every CFA pattern packs to R, G1, G2, B") {
    // Hand-written site tables: the letter at each 2x2 position.
    struct Case {
        Cfa cfa;
        const char* sites;  // row-major 2x2
    };
    const Case cases[] = {{Cfa::RGGB, "RGGB"}, {Cfa::BGGR, "BGGR"}, {Cfa::GRBG, "GRBG"}, {Cfa::GBRG, "GBRG"}};
    for (const auto& cs : cases) {
        CAPTURE(to_string(cs.cfa));
        // Encode R=10, B=40, first green in raster order 20, second 30.
        std::vector<double> v(4);
        bool first_green = true;
        for (int i = 0; i < 4; ++i) {
            switch (cs.sites[i]) {
                case 'R': v[i] = 10; break;
                case 'B': v[i] = 40; break;
                default: v[i] = first_green ? 20 : 30; first_green = false;
            }
        }
        auto p = pack_plane(Plane(2, 2, v), cs.cfa);
        CHECK(p[0](0, 0) == 10);
        CHECK(p[1](0, 0) == 20);
        CHECK(p[2](0, 0) == 30);
        CHECK(p[3](0, 0) == 40);
    }
}

TEST_CASE("BGGR puts the red sample first") {
    Plane m(2, 2, std::vector<double>{7 /*b*/, 5, 6, 9 /*r*/});
    CHECK(pack_plane(m, Cfa::BGGR)[0](0, 0) == 9);
}

TEST_CASE("pack/unpack round trip for every pattern") {
    for (Cfa cfa : {Cfa::RGGB, Cfa::BGGR, Cfa::GRBG, Cfa::GBRG}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            const BayerImage img = random_raw(8, 6, seed, cfa);
            const PackedPlanes pp = pack(img);
            CHECK(pp.planes[0].width() == 4);
            CHECK(pp.planes[0].height() == 3);
            const BayerImage back = unpack(pp);
            CHECK(back.data == img.data);
            CHECK(back.cfa == img.cfa);
            CHECK(back.black_level == img.black_level);
        }
    }
}

TEST_CASE("unpack of single-pixel planes") {
    std::array<Plane, 4> p{Plane(1, 1, 1.0), Plane(1, 1, 2.0), Plane(1, 1, 3.0), Plane(1, 1, 4.0)};
    Plane m = unpack_planes(p, Cfa::RGGB);
    CHECK(m == Plane(2, 2, std::vector<double>{1, 2, 3, 4}));
}

TEST_CASE("shape errors") {
    CHECK_THROWS_AS(pack_plane(Plane(3, 2), Cfa::RGGB), DimensionError);
    CHECK_THROWS_AS(BayerImage(Plane(4, 5), Cfa::RGGB, 0, 1), DimensionError);
    std::array<Plane, 4> p{Plane(2, 2), Plane(2, 2), Plane(3, 2), Plane(2, 2)};
    CHECK_THROWS_AS(unpack_planes(p, Cfa::RGGB), DimensionError);
    CHECK_THROWS_AS(BayerImage(Plane(2, 2), Cfa::RGGB, 10, 10), DomainError);
    CHECK_THROWS_AS(parse_cfa("RGBG"), FormatError);
}

TEST_CASE("normalize and denormalize invert each other") {
    const BayerImage img = random_raw(16, 16, 3);
    const double alpha = 3.7;
    const NormalizedImage n = normalize(img, alpha, 1.5);
    CHECK(n.data(2, 3) == doctest::Approx((img.data(2, 3) - 64.0) / alpha));
    const BayerImage back = denormalize(n, alpha, img);
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        CHECK(std::abs(back.data.values()[i] - img.data.values()[i]) <= 1e-9);
    }
    CHECK_THROWS_AS(normalize(img, 0.0, 1.0), DomainError);
}

TEST_CASE("save/load is bit exact") {
    TempDir dir("raw");
    for (Cfa cfa : {Cfa::RGGB, Cfa::GBRG}) {
        const BayerImage img = random_raw(32, 32, 11, cfa);
        const auto path = dir / "frame.raw16";
        save_raw(img, path);
        const BayerImage back = load_raw(path);
        CHECK(back.data == img.data);
        CHECK(back.cfa == cfa);
        CHECK(back.black_level == 64.0);
        CHECK(back.white_level == 16383.0);
        CHECK(back.tag == "t");
    }
}

TEST_CASE("sidecar metadata is read") {
    TempDir dir("sidecar");
    {
        std::ofstream(dir / "a.raw16", std::ios::binary).write("\x01\x00\x02\x00\x03\x00\x04\x01", 8);
        std::ofstream(dir / "a.json") << R"({"width": 2, "height": 2, "cfa": "RGGB", "black_level": 64, "white_level": 1023})";
    }
    const BayerImage img = load_raw(dir / "a.raw16");
    CHECK(img.black_level == 64.0);
    CHECK(img.data(1, 1) == 4 + 256);
    CHECK(img.tag.empty());
}

TEST_CASE("file errors") {
    TempDir dir("rawerr");
    std::ofstream(dir / "nosidecar.raw16") << "xxxx";
    CHECK_THROWS_AS(load_raw(dir / "nosidecar.raw16"), FormatError);

    std::ofstream(dir / "short.raw16", std::ios::binary).write("\x01\x00\x02", 3);
    std::ofstream(dir / "short.json") << R"({"width": 2, "height": 2, "cfa": "RGGB", "black_level": 0, "white_level": 10})";
    CHECK_THROWS_AS(load_raw(dir / "short.raw16"), FormatError);

    std::ofstream(dir / "cfa.raw16", std::ios::binary).write("\0\0\0\0\0\0\0\0", 8);
    std::ofstream(dir / "cfa.json") << R"({"width": 2, "height": 2, "cfa": "XYZW", "black_level": 0, "white_level": 10})";
    CHECK_THROWS_AS(load_raw(dir / "cfa.raw16"), FormatError);
}

TEST_CASE("preview: black, white and mid gray") {
    BayerImage black(Plane(4, 4, 100.0), Cfa::RGGB, 100.0, 1100.0);
    for (auto v : preview_isp(black).pixels) CHECK(v == 0);
    BayerImage white(Plane(4, 4, 1100.0), Cfa::RGGB, 100.0, 1100.0);
    for (auto v : preview_isp(white).pixels) CHECK(v == 255);
    BayerImage gray(Plane(4, 4, 100.0 + 0.18 * 1000.0), Cfa::RGGB, 100.0, 1100.0);
    const RgbImage g = preview_isp(gray);
    CHECK(g.width == 2);
    CHECK(g.height == 2);
    for (auto v : g.pixels) CHECK(v == 117);
    // Out-of-range values clamp rather than wrap.
    BayerImage over(Plane(4, 4, 5000.0), Cfa::RGGB, 100.0, 1100.0);
    for (auto v : preview_isp(over).pixels) CHECK(v == 255);
}

TEST_CASE("preview is monotone in DN") {
    int last = -1;
    for (double dn = 0; dn <= 1200; dn += 7) {
        const RgbImage px = preview_isp(BayerImage(Plane(2, 2, dn), Cfa::RGGB, 100.0, 1100.0));
        CHECK(int(px.pixels[0]) >= last);
        last = px.pixels[0];
    }
}

TEST_CASE("preview PNG is written") {
    TempDir dir("png");
    write_png(preview_isp(random_raw(16, 16, 1)), dir / "p.png");
    CHECK(std::filesystem::file_size(dir / "p.png") > 8);
}

}  // TEST_SUITE
