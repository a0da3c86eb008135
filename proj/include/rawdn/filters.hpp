// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "rawdn/plane.hpp"

namespace rawdn {

/// Reflect-101 index into [0, n): -1 -> 1, n -> n-2.
std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n);

/// Summed-area table over a reflect-101 padded copy of the input (optionally squared).
/// Images above kCompensatedPixels keep a second low-order table so sums are accumulated
/// in double-double precision.
class IntegralImage {
public:
    static constexpr std::size_t kCompensatedPixels = 4'000'000;

    explicit IntegralImage(const Plane& src, std::size_t pad = 0, bool squared = false);

    /// Inclusive sum over rows [0..r] and columns [0..c] of the padded source.
    double at(std::size_t r, std::size_t c) const;

    /// Sum of the size x size window whose top-left corner is (r, c) in padded coordinates.
    double window_sum(std::size_t r, std::size_t c, std::size_t size) const;

    /// Mean of every size x size window centred on a source pixel; requires pad == size / 2.
    void window_means(std::size_t size, Plane& out) const;

    bool compensated() const { return !lo_.empty(); }
    std::size_t padded_width() const { return pw_; }
    std::size_t padded_height() const { return ph_; }

private:
    std::size_t src_w_ = 0, src_h_ = 0, pad_ = 0;
    std::size_t pw_ = 0, ph_ = 0;  // padded extent; the tables carry one extra zero row and column
    std::vector<double> hi_;
    std::vector<double> lo_;

    std::size_t stride() const { return pw_ + 1; }
};

/// p x p mean filter with reflect-101 borders. p odd, 1 <= p <= min(width, height).
Plane box_mean(const Plane& img, std::size_t p);

/// sqrt(max(0, B_p(img^2) - B_p(img)^2)), same border policy as box_mean.
Plane box_std(const Plane& img, std::size_t p);

struct BoxStats {
    Plane mean;
    Plane std;
};
/// Mean and standard deviation maps sharing one pass over the tables.
BoxStats box_stats(const Plane& img, std::size_t p);

}  // namespace rawdn
