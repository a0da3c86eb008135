// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "rawdn/plane.hpp"

namespace rawdn::test {

inline Plane random_plane(std::size_t w, std::size_t h, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    Plane p(w, h);
    for (double& v : p.values()) v = u(gen);
    return p;
}

inline Plane noise_plane(std::size_t w, std::size_t h, std::uint64_t seed, double mean, double sd) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> n(mean, sd);
    Plane p(w, h);
    for (double& v : p.values()) v = n(gen);
    return p;
}

// Reflect-101 index, written independently of the library.
inline std::size_t mirror(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return static_cast<std::size_t>(i);
}

// Direct O(n p^2) windowed mean and two-pass std.
inline void direct_box(const Plane& img, std::size_t p, Plane& mean, Plane& sd) {
    const auto w = static_cast<std::ptrdiff_t>(img.width()), h = static_cast<std::ptrdiff_t>(img.height());
    const auto r = static_cast<std::ptrdiff_t>(p / 2);
    mean = Plane(img.width(), img.height());
    sd = Plane(img.width(), img.height());
    const double n = static_cast<double>(p * p);
    for (std::ptrdiff_t y = 0; y < h; ++y) {
        for (std::ptrdiff_t x = 0; x < w; ++x) {
            double s = 0.0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) s += img(mirror(y + dy, h), mirror(x + dx, w));
            const double m = s / n;
            double ss = 0.0;
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy)
                for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                    const double d = img(mirror(y + dy, h), mirror(x + dx, w)) - m;
                    ss += d * d;
                }
            mean(y, x) = m;
            sd(y, x) = std::sqrt(ss / n);
        }
    }
}

inline double plane_mean(const Plane& p) {
    double s = 0.0;
    for (double v : p.values()) s += v;
    return s / static_cast<double>(p.size());
}

inline double plane_std(const Plane& p) {
    const double m = plane_mean(p);
    double s = 0.0;
    for (double v : p.values()) s += (v - m) * (v - m);
    return std::sqrt(s / static_cast<double>(p.size()));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& name) {
        path_ = std::filesystem::temp_directory_path() /
                ("rawdn-" + name + "-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

private:
    std::filesystem::path path_;
};

}  // namespace rawdn::test
