// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>

#include "rawdn/rawmodel.hpp"

namespace rawdn {

/// Procedural clean sources for experiments. Values are linear, in [0, 1] above black.
enum class SceneKind {
    Natural,      // flat shapes, gradients and a few textured patches
    FlatPatches,  // a chart of uniform patches at distinct levels
    Texture,      // high-frequency content everywhere
};

std::string_view to_string(SceneKind kind);
SceneKind parse_scene(std::string_view name);

struct SceneOptions {
    std::size_t width = 512;  // mosaic size, even
    std::size_t height = 512;
    Cfa cfa = Cfa::RGGB;
    double black_level = 512.0;
    double white_level = 16383.0;
};

/// Clean Bayer frame in DN. Deterministic in (kind, seed, options); pixel values are not
/// rounded so noise can be added before quantization.
BayerImage make_scene(SceneKind kind, std::uint64_t seed, const SceneOptions& opt = {});

}  // namespace rawdn
