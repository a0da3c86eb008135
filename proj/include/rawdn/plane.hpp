// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rawdn/error.hpp"

namespace rawdn {

/// Dense row-major 2D array of doubles. The single pixel container used by every module.
class Plane {
public:
    Plane() = default;
    Plane(std::size_t width, std::size_t height, double fill = 0.0)
        : width_(width), height_(height), data_(width * height, fill) {}
    Plane(std::size_t width, std::size_t height, std::vector<double> data)
        : width_(width), height_(height), data_(std::move(data)) {
        if (data_.size() != width_ * height_) {
            throw DimensionError("plane data size does not match width*height");
        }
    }

    std::size_t width() const { return width_; }
    std::size_t height() const { return height_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * width_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * width_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * width_, width_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * width_, width_}; }

    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Plane& other) const {
        return width_ == other.width_ && height_ == other.height_;
    }

    friend bool operator==(const Plane&, const Plane&) = default;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<double> data_;
};

/// FNV-1a over the raw bytes of a plane; used to assert which buffer a stage consumed.
std::uint64_t content_hash(const Plane& plane);

}  // namespace rawdn
