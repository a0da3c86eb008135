// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rawdn/plane.hpp"

namespace rawdn {

enum class Cfa { RGGB, BGGR, GRBG, GBRG };

std::string_view to_string(Cfa cfa);
Cfa parse_cfa(std::string_view name);

/// Row/column offset inside the 2x2 mosaic tile for each canonical plane (R, G1, G2, B).
struct SiteOffset {
    std::size_t dr;
    std::size_t dc;
};
std::array<SiteOffset, 4> cfa_offsets(Cfa cfa);

/// Single-plane CFA frame in digital numbers.
struct BayerImage {
    Plane data;
    Cfa cfa = Cfa::RGGB;
    double black_level = 0.0;
    double white_level = 65535.0;
    std::string tag;

    BayerImage() = default;
    BayerImage(Plane data, Cfa cfa, double black_level, double white_level, std::string tag = {});

    std::size_t width() const { return data.width(); }
    std::size_t height() const { return data.height(); }
    /// white_level - black_level; the DN span of a normalized unit.
    double range() const { return white_level - black_level; }
};

/// Four half-resolution planes in canonical order R, G1, G2, B.
struct PackedPlanes {
    std::array<Plane, 4> planes;
    Cfa cfa = Cfa::RGGB;
    double black_level = 0.0;
    double white_level = 65535.0;
    std::string tag;
};

std::array<Plane, 4> pack_plane(const Plane& mosaic, Cfa cfa);
Plane unpack_planes(const std::array<Plane, 4>& planes, Cfa cfa);

PackedPlanes pack(const BayerImage& img);
BayerImage unpack(const PackedPlanes& planes);

/// Pixel data whose units depend on the producing stage: electrons after normalize(),
/// transformed values scaled by 1/peak after the forward VST.
struct NormalizedImage {
    Plane data;
    Cfa cfa = Cfa::RGGB;
    double sigma_hat = 0.0;
    double peak = 0.0;
};

/// chi = (y - black) / alpha_dn.
NormalizedImage normalize(const BayerImage& img, double alpha_dn, double sigma_hat);
/// Inverse of normalize(); black/white/tag come from the reference image.
BayerImage denormalize(const NormalizedImage& img, double alpha_dn, const BayerImage& reference);

/// Packed planes rescaled so black maps to 0 and white to 1.
std::array<Plane, 4> unit_planes(const BayerImage& img);

BayerImage load_raw(const std::filesystem::path& payload);
void save_raw(const BayerImage& img, const std::filesystem::path& payload);
/// Sidecar path for a payload: same stem, .json extension.
std::filesystem::path sidecar_path(const std::filesystem::path& payload);

struct RgbImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<std::uint8_t> pixels;  // interleaved RGB, row-major
};

/// Half-resolution gamma-2.2 preview. Deterministic, clamps out-of-range values.
RgbImage preview_isp(const BayerImage& img);

void write_png(const RgbImage& img, const std::filesystem::path& path);
void write_png_gray(const std::vector<std::uint8_t>& pixels, std::size_t width, std::size_t height,
                    const std::filesystem::path& path);

}  // namespace rawdn
