// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/noisemodel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

namespace rawdn {

NoiseParams::NoiseParams(double a, double s) : alpha(a), sigma(s) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("noise gain alpha must be positive and finite");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("read noise sigma must be non-negative");
}

// ---------------------------------------------------------------------------------------------
// Random numbers

namespace {

inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t CounterRng::next_u64() {
    const std::uint64_t key = mix64(seed_ ^ 0x6A09E667F3BCC909ULL) ^ mix64(stream_ + 0x9E3779B97F4A7C15ULL);
    return mix64(key + 0x9E3779B97F4A7C15ULL * ++counter_);
}

double CounterRng::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
    if (have_spare_) {
        have_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    have_spare_ = true;
    return radius * std::cos(angle);
}

std::int64_t CounterRng::poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    if (lambda < 10.0) {
        // Inversion by sequential search.
        double p = std::exp(-lambda);
        double cdf = p;
        const double u = uniform();
        std::int64_t k = 0;
        while (u > cdf) {
            ++k;
            p *= lambda / static_cast<double>(k);
            cdf += p;
            if (p < 1e-300 && cdf <= u) break;  // u in the unrepresentable tail
        }
        return k;
    }
    // Transformed rejection with squeeze (Hormann 1993, PTRS).
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -lambda + k * loglam - std::lgamma(k + 1.0)) {
            return static_cast<std::int64_t>(k);
        }
    }
}

Plane sample_noisy(const Plane& clean, const NoiseParams& params, std::uint64_t seed) {
    Plane out(clean.width(), clean.height());
    const double inv_alpha = 1.0 / params.alpha;
    for (std::size_t r = 0; r < clean.height(); ++r) {
        CounterRng rng(seed, r);
        const double* src = clean.row(r).data();
        double* dst = out.row(r).data();
        for (std::size_t c = 0; c < clean.width(); ++c) {
            if (!(src[c] >= 0.0)) throw DomainError("clean signal must be non-negative");
            double y = params.alpha * static_cast<double>(rng.poisson(src[c] * inv_alpha));
            if (params.sigma > 0.0) y += params.sigma * rng.normal();
            dst[c] = y;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------------------------
// Fitting

std::string_view to_string(SampleStage stage) {
    switch (stage) {
        case SampleStage::Coarse: return "coarse";
        case SampleStage::Fine: return "fine";
        case SampleStage::Pooled: return "pooled";
    }
    return "coarse";
}

MVSamples pool_samples(const std::vector<MVSamples>& sets) {
    MVSamples out;
    out.stage = SampleStage::Pooled;
    for (const auto& s : sets) out.samples.insert(out.samples.end(), s.samples.begin(), s.samples.end());
    return out;
}

namespace {

struct Wls {
    double slope = 0.0;
    double intercept = 0.0;
};

Wls weighted_ols(const std::vector<MVSample>& s) {
    double sw = 0, sx = 0, sy = 0;
    for (const auto& p : s) {
        sw += p.weight;
        sx += p.weight * p.mean;
        sy += p.weight * p.variance;
    }
    if (!(sw > 0.0)) throw FitError("sample weights sum to zero");
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (const auto& p : s) {
        const double dx = p.mean - mx;
        sxx += p.weight * dx * dx;
        sxy += p.weight * dx * (p.variance - my);
    }
    if (!(sxx > 0.0)) throw FitError("all sample means are identical; slope is undetermined");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

double origin_slope(const std::vector<MVSample>& s) {
    double sxx = 0, sxy = 0;
    for (const auto& p : s) {
        sxx += p.weight * p.mean * p.mean;
        sxy += p.weight * p.mean * p.variance;
    }
    return sxx > 0.0 ? sxy / sxx : 0.0;
}

double median(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
    }
    return m;
}

bool distinct_means(const std::vector<MVSample>& s) {
    for (const auto& p : s) {
        if (p.mean != s.front().mean) return true;
    }
    return false;
}

}  // namespace

LineFit fit_line_robust(const MVSamples& samples) {
    const auto& s = samples.samples;
    if (s.size() < 2) throw FitError("need at least two samples, got " + std::to_string(s.size()));
    for (const auto& p : s) {
        if (!std::isfinite(p.mean) || !std::isfinite(p.variance) || !(p.weight >= 0.0)) {
            throw FitError("non-finite sample");
        }
    }
    Wls fit = weighted_ols(s);

    // Residuals are standardized by sqrt(weight) so the MAD pass compares like with like
    // when samples carry unequal weights; with unit weights these are the plain residuals.
    std::vector<double> resid(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        resid[i] = std::sqrt(s[i].weight) * (s[i].variance - (fit.slope * s[i].mean + fit.intercept));
    }
    const double med = median(resid);
    std::vector<double> dev(resid.size());
    for (std::size_t i = 0; i < resid.size(); ++i) dev[i] = std::abs(resid[i] - med);
    const double mad = median(dev);

    std::vector<MVSample> kept;
    kept.reserve(s.size());
    LineFit out;
    out.inliers.assign(s.size(), 0);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (dev[i] <= 3.0 * mad) {
            kept.push_back(s[i]);
            out.inliers[i] = 1;
        }
    }
    if (kept.size() >= 2 && kept.size() < s.size() && distinct_means(kept)) {
        fit = weighted_ols(kept);
    } else {
        kept = s;
        out.inliers.assign(s.size(), 1);
    }
    out.used = kept.size();
    out.discarded = s.size() - kept.size();
    out.slope = fit.slope;
    out.intercept = fit.intercept;
    if (out.intercept < 0.0) {
        out.intercept = 0.0;
        out.slope = origin_slope(kept);
        out.intercept_clamped = true;
    }
    return out;
}

NoiseParams fit_least_squares(const MVSamples& samples) {
    const LineFit f = fit_line_robust(samples);
    return NoiseParams(std::max(f.slope, kMinAlpha), std::sqrt(f.intercept));
}

ResidualStats residual_stats(const MVSamples& samples, const NoiseParams& params) {
    const auto& s = samples.samples;
    if (s.empty()) throw FitError("residual statistics of an empty sample set");
    const double var0 = params.sigma * params.sigma;
    std::vector<double> resid(s.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        resid[i] = s[i].variance - (params.alpha * s[i].mean + var0);
        ss += resid[i] * resid[i];
    }
    const double med = median(resid);
    std::vector<double> dev(resid.size());
    for (std::size_t i = 0; i < resid.size(); ++i) dev[i] = std::abs(resid[i] - med);
    const double mad = median(dev);
    std::size_t outliers = 0;
    for (double d : dev) outliers += d > 3.0 * mad ? 1 : 0;
    return {std::sqrt(ss / static_cast<double>(s.size())),
            static_cast<double>(outliers) / static_cast<double>(s.size())};
}

void write_samples_csv(const MVSamples& samples, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out.precision(17);
    out << "mean,variance,weight,stage\n";
    for (const auto& s : samples.samples) {
        out << s.mean << ',' << s.variance << ',' << s.weight << ',' << to_string(samples.stage) << '\n';
    }
}

MVSamples read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "mean,variance,weight,stage") {
        throw FormatError("unexpected sample CSV header in " + path.string());
    }
    MVSamples out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f[4];
        for (auto& field : f) {
            if (!std::getline(ls, field, ',')) throw FormatError("short sample CSV row: " + line);
        }
        out.samples.push_back({std::stod(f[0]), std::stod(f[1]), std::stod(f[2])});
        out.stage = f[3] == "fine" ? SampleStage::Fine : f[3] == "pooled" ? SampleStage::Pooled : SampleStage::Coarse;
    }
    return out;
}

}  // namespace rawdn
