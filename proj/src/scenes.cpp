// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/scenes.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "rawdn/noisemodel.hpp"

namespace rawdn {

std::string_view to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::Natural: return "natural";
        case SceneKind::FlatPatches: return "flat";
        case SceneKind::Texture: return "texture";
    }
    return "?";
}

SceneKind parse_scene(std::string_view name) {
    if (name == "natural") return SceneKind::Natural;
    if (name == "flat") return SceneKind::FlatPatches;
    if (name == "texture") return SceneKind::Texture;
    throw ConfigError("unknown scene kind: " + std::string(name));
}

namespace {

constexpr double kLo = 0.02;
constexpr double kHi = 0.9;

class Draw {
public:
    explicit Draw(std::uint64_t seed) : rng_(seed, 0x5CE7E) {}
    double uniform(double a, double b) { return a + (b - a) * rng_.uniform(); }
    // Reflectances drawn evenly in display space land skewed toward black once linearized.
    double linear_level(double lo, double hi) { return lo + (hi - lo) * std::pow(rng_.uniform(), 2.2); }
    std::size_t index(std::size_t n) { return std::min(n - 1, static_cast<std::size_t>(rng_.uniform() * static_cast<double>(n))); }

private:
    CounterRng rng_;
};

// Sum of plane waves with log-uniform periods and amplitude proportional to period, scaled
// to unit RMS: a cheap stand-in for the broadband spectrum of real surface texture.
class Waves {
public:
    Waves(Draw& d, int count, double min_period, double max_period) {
        double power = 0.0;
        for (int i = 0; i < count; ++i) {
            const double period = min_period * std::pow(max_period / min_period, d.uniform(0, 1));
            const double angle = d.uniform(0, std::numbers::pi);
            waves_.push_back({2.0 * std::numbers::pi * std::cos(angle) / period,
                              2.0 * std::numbers::pi * std::sin(angle) / period, d.uniform(0, 2.0 * std::numbers::pi),
                              period});
            power += 0.5 * period * period;
        }
        norm_ = 1.0 / std::sqrt(power);
    }
    double operator()(std::size_t r, std::size_t c) const {
        double v = 0.0;
        for (const auto& w : waves_) {
            v += w.amp * std::sin(w.fx * static_cast<double>(c) + w.fy * static_cast<double>(r) + w.phase);
        }
        return v * norm_;
    }

private:
    struct Wave {
        double fx, fy, phase, amp;
    };
    std::vector<Wave> waves_;
    double norm_ = 1.0;
};

Plane natural(std::size_t w, std::size_t h, Draw& d) {
    Plane lum(w, h, d.linear_level(0.05, 0.5));
    const double W = static_cast<double>(w), H = static_cast<double>(h);
    const int shapes = 10 + static_cast<int>(d.index(6));
    for (int s = 0; s < shapes; ++s) {
        const double cx = d.uniform(0, W), cy = d.uniform(0, H);
        const double rx = d.uniform(0.06, 0.22) * W, ry = d.uniform(0.06, 0.22) * H;
        const double level = d.linear_level(0.03, 0.85);
        const bool disc = d.uniform(0, 1) < 0.4;
        // A minority of shapes carry a gentle gradient or a texture instead of a flat fill.
        const double kind = d.uniform(0, 1);
        const double gx = d.uniform(-0.25, 0.25) / W, gy = d.uniform(-0.25, 0.25) / H;
        const double contrast = d.uniform(0.15, 0.4);
        const Waves waves(d, 8, 3.0, 40.0);
        // Faint surface grain on about half the shapes, too fine for a blurred guide to see.
        const double grain = d.uniform(0, 1) < 0.5 ? d.uniform(0.0, 0.05) : 0.0;
        const Waves fine(d, 6, 2.0, 8.0);
        for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                const double dx = (static_cast<double>(c) - cx) / rx, dy = (static_cast<double>(r) - cy) / ry;
                const bool inside = disc ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (!inside) continue;
                double v = level;
                if (kind > 0.85) {
                    v *= 1.0 + contrast * waves(r, c);
                } else if (kind > 0.7) {
                    v += gx * (static_cast<double>(c) - cx) + gy * (static_cast<double>(r) - cy);
                }
                lum(r, c) = v * (1.0 + grain * fine(r, c));
            }
        }
    }
    return lum;
}

Plane flat_patches(std::size_t w, std::size_t h, Draw& d) {
    constexpr std::size_t kGrid = 4;
    std::array<double, kGrid * kGrid> levels{};
    for (std::size_t i = 0; i < levels.size(); ++i) {
        levels[i] = 0.04 + 0.8 * static_cast<double>(i) / static_cast<double>(levels.size() - 1);
    }
    for (std::size_t i = levels.size() - 1; i > 0; --i) std::swap(levels[i], levels[d.index(i + 1)]);
    Plane lum(w, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const std::size_t gr = std::min(kGrid - 1, r * kGrid / h), gc = std::min(kGrid - 1, c * kGrid / w);
            lum(r, c) = levels[gr * kGrid + gc];
        }
    }
    return lum;
}

Plane texture(std::size_t w, std::size_t h, Draw& d) {
    const Waves waves(d, 12, 2.2, 30.0);
    const double base = d.uniform(0.3, 0.5);
    Plane lum(w, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) lum(r, c) = base * (1.0 + 0.5 * waves(r, c));
    }
    return lum;
}

}  // namespace

BayerImage make_scene(SceneKind kind, std::uint64_t seed, const SceneOptions& opt) {
    if (opt.width % 2 || opt.height % 2 || opt.width == 0 || opt.height == 0) {
        throw DimensionError("scene dimensions must be even and positive");
    }
    Draw d(seed);
    const std::size_t pw = opt.width / 2, ph = opt.height / 2;
    Plane lum;
    switch (kind) {
        case SceneKind::Natural: lum = natural(pw, ph, d); break;
        case SceneKind::FlatPatches: lum = flat_patches(pw, ph, d); break;
        case SceneKind::Texture: lum = texture(pw, ph, d); break;
    }
    // Per-site gains so the four planes sit at different levels.
    const std::array<double, 4> gain = {d.uniform(0.55, 0.95), 1.0, 1.0, d.uniform(0.45, 0.85)};
    std::array<Plane, 4> planes;
    const double range = opt.white_level - opt.black_level;
    for (std::size_t i = 0; i < 4; ++i) {
        planes[i] = Plane(pw, ph);
        auto src = lum.values();
        auto dst = planes[i].values();
        for (std::size_t k = 0; k < dst.size(); ++k) {
            dst[k] = opt.black_level + range * std::clamp(src[k] * gain[i], kLo, kHi);
        }
    }
    return BayerImage(unpack_planes(planes, opt.cfa), opt.cfa, opt.black_level, opt.white_level,
                      std::string(to_string(kind)) + "-" + std::to_string(seed));
}

}  // namespace rawdn
