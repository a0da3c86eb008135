// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/rawmodel.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>

#include "json.hpp"

namespace rawdn {

namespace {

void check_even(const Plane& p) {
    if (p.width() % 2 != 0 || p.height() % 2 != 0) {
        throw DimensionError("Bayer image dimensions must be even, got " + std::to_string(p.width()) + "x" +
                             std::to_string(p.height()));
    }
}

}  // namespace

std::string_view to_string(Cfa cfa) {
    switch (cfa) {
        case Cfa::RGGB: return "RGGB";
        case Cfa::BGGR: return "BGGR";
        case Cfa::GRBG: return "GRBG";
        case Cfa::GBRG: return "GBRG";
    }
    return "RGGB";
}

Cfa parse_cfa(std::string_view name) {
    for (Cfa c : {Cfa::RGGB, Cfa::BGGR, Cfa::GRBG, Cfa::GBRG}) {
        if (to_string(c) == name) return c;
    }
    throw FormatError("unknown cfa pattern '" + std::string(name) + "'");
}

std::array<SiteOffset, 4> cfa_offsets(Cfa cfa) {
    // Canonical output order: R, G1 (first green in raster order), G2, B.
    switch (cfa) {
        case Cfa::RGGB: return {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
        case Cfa::BGGR: return {{{1, 1}, {0, 1}, {1, 0}, {0, 0}}};
        case Cfa::GRBG: return {{{0, 1}, {0, 0}, {1, 1}, {1, 0}}};
        case Cfa::GBRG: return {{{1, 0}, {0, 0}, {1, 1}, {0, 1}}};
    }
    return {};
}

BayerImage::BayerImage(Plane d, Cfa c, double black, double white, std::string t)
    : data(std::move(d)), cfa(c), black_level(black), white_level(white), tag(std::move(t)) {
    check_even(data);
    if (!(black_level < white_level)) {
        throw DomainError("black level must be below white level");
    }
}

std::array<Plane, 4> pack_plane(const Plane& mosaic, Cfa cfa) {
    check_even(mosaic);
    const std::size_t w = mosaic.width() / 2;
    const std::size_t h = mosaic.height() / 2;
    const auto off = cfa_offsets(cfa);
    std::array<Plane, 4> out;
    for (std::size_t i = 0; i < 4; ++i) {
        out[i] = Plane(w, h);
        for (std::size_t r = 0; r < h; ++r) {
            const double* src = mosaic.row(2 * r + off[i].dr).data() + off[i].dc;
            double* dst = out[i].row(r).data();
            for (std::size_t c = 0; c < w; ++c) dst[c] = src[2 * c];
        }
    }
    return out;
}

Plane unpack_planes(const std::array<Plane, 4>& planes, Cfa cfa) {
    for (std::size_t i = 1; i < 4; ++i) {
        if (!planes[i].same_shape(planes[0])) throw DimensionError("packed planes differ in shape");
    }
    const std::size_t w = planes[0].width();
    const std::size_t h = planes[0].height();
    const auto off = cfa_offsets(cfa);
    Plane mosaic(2 * w, 2 * h);
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t r = 0; r < h; ++r) {
            const double* src = planes[i].row(r).data();
            double* dst = mosaic.row(2 * r + off[i].dr).data() + off[i].dc;
            for (std::size_t c = 0; c < w; ++c) dst[2 * c] = src[c];
        }
    }
    return mosaic;
}

PackedPlanes pack(const BayerImage& img) {
    return PackedPlanes{pack_plane(img.data, img.cfa), img.cfa, img.black_level, img.white_level, img.tag};
}

BayerImage unpack(const PackedPlanes& p) {
    return BayerImage(unpack_planes(p.planes, p.cfa), p.cfa, p.black_level, p.white_level, p.tag);
}

NormalizedImage normalize(const BayerImage& img, double alpha_dn, double sigma_hat) {
    if (!(alpha_dn > 0.0)) throw DomainError("alpha must be positive");
    NormalizedImage out{Plane(img.width(), img.height()), img.cfa, sigma_hat, 0.0};
    const double inv = 1.0 / alpha_dn;
    auto src = img.data.values();
    auto dst = out.data.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - img.black_level) * inv;
    return out;
}

BayerImage denormalize(const NormalizedImage& img, double alpha_dn, const BayerImage& reference) {
    Plane data(img.data.width(), img.data.height());
    auto src = img.data.values();
    auto dst = data.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] * alpha_dn + reference.black_level;
    return BayerImage(std::move(data), img.cfa, reference.black_level, reference.white_level, reference.tag);
}

std::array<Plane, 4> unit_planes(const BayerImage& img) {
    auto planes = pack_plane(img.data, img.cfa);
    const double inv = 1.0 / img.range();
    for (auto& p : planes) {
        for (double& v : p.values()) v = (v - img.black_level) * inv;
    }
    return planes;
}

std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
    auto p = payload;
    p.replace_extension(".json");
    return p;
}

BayerImage load_raw(const std::filesystem::path& payload) {
    const auto meta_path = sidecar_path(payload);
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw FormatError("missing sidecar " + meta_path.string());
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("malformed sidecar " + meta_path.string() + ": " + e.what());
    }
    std::size_t width = 0, height = 0;
    double black = 0.0, white = 0.0;
    Cfa cfa = Cfa::RGGB;
    std::string tag;
    try {
        width = meta.at("width").get<std::size_t>();
        height = meta.at("height").get<std::size_t>();
        cfa = parse_cfa(meta.at("cfa").get<std::string>());
        black = meta.at("black_level").get<double>();
        white = meta.at("white_level").get<double>();
        if (meta.contains("tag")) tag = meta["tag"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("sidecar " + meta_path.string() + ": " + e.what());
    }

    std::ifstream in(payload, std::ios::binary);
    if (!in) throw FormatError("cannot open payload " + payload.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != width * height * 2) {
        throw FormatError("payload size " + std::to_string(bytes.size()) + " != width*height*2 = " +
                          std::to_string(width * height * 2));
    }
    Plane data(width, height);
    auto dst = data.values();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] = static_cast<double>(static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8)));
    }
    return BayerImage(std::move(data), cfa, black, white, std::move(tag));
}

void save_raw(const BayerImage& img, const std::filesystem::path& payload) {
    std::vector<unsigned char> bytes(img.data.size() * 2);
    auto src = img.data.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double v = std::clamp(std::nearbyint(src[i]), 0.0, 65535.0);
        const auto u = static_cast<std::uint16_t>(v);
        bytes[2 * i] = static_cast<unsigned char>(u & 0xff);
        bytes[2 * i + 1] = static_cast<unsigned char>(u >> 8);
    }
    std::ofstream out(payload, std::ios::binary);
    if (!out) throw FormatError("cannot write " + payload.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));

    nlohmann::json meta{{"width", img.width()},
                        {"height", img.height()},
                        {"cfa", std::string(to_string(img.cfa))},
                        {"black_level", img.black_level},
                        {"white_level", img.white_level}};
    if (!img.tag.empty()) meta["tag"] = img.tag;
    std::ofstream meta_out(sidecar_path(payload));
    if (!meta_out) throw FormatError("cannot write sidecar for " + payload.string());
    meta_out << meta.dump(2) << '\n';
}

RgbImage preview_isp(const BayerImage& img) {
    const auto planes = pack_plane(img.data, img.cfa);
    RgbImage out;
    out.width = planes[0].width();
    out.height = planes[0].height();
    out.pixels.resize(out.width * out.height * 3);
    const double inv = 1.0 / img.range();
    auto encode = [&](double dn) {
        const double lin = std::clamp((dn - img.black_level) * inv, 0.0, 1.0);
        return static_cast<std::uint8_t>(std::lround(255.0 * std::pow(lin, 1.0 / 2.2)));
    };
    for (std::size_t r = 0; r < out.height; ++r) {
        for (std::size_t c = 0; c < out.width; ++c) {
            std::uint8_t* px = &out.pixels[(r * out.width + c) * 3];
            px[0] = encode(planes[0](r, c));
            px[1] = encode(0.5 * (planes[1](r, c) + planes[2](r, c)));
            px[2] = encode(planes[3](r, c));
        }
    }
    return out;
}

namespace {

void write_png_impl(const std::uint8_t* pixels, std::size_t width, std::size_t height, int color_type,
                    std::size_t channels, const std::filesystem::path& path) {
    std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!fp) throw FormatError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t r = 0; r < height; ++r) {
        png_write_row(png, const_cast<png_bytep>(pixels + r * width * channels));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png(const RgbImage& img, const std::filesystem::path& path) {
    write_png_impl(img.pixels.data(), img.width, img.height, PNG_COLOR_TYPE_RGB, 3, path);
}

void write_png_gray(const std::vector<std::uint8_t>& pixels, std::size_t width, std::size_t height,
                    const std::filesystem::path& path) {
    if (pixels.size() != width * height) throw DimensionError("gray PNG buffer size mismatch");
    write_png_impl(pixels.data(), width, height, PNG_COLOR_TYPE_GRAY, 1, path);
}

}  // namespace rawdn
