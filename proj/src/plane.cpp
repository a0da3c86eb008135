// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/plane.hpp"

#include <cstring>

namespace rawdn {

std::uint64_t content_hash(const Plane& plane) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    const std::uint64_t dims[2] = {plane.width(), plane.height()};
    mix(reinterpret_cast<const unsigned char*>(dims), sizeof(dims));
    mix(reinterpret_cast<const unsigned char*>(plane.data()), plane.size() * sizeof(double));
    return h;
}

}  // namespace rawdn
