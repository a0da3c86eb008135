// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/vst.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "rawdn/simd/kernels.hpp"

namespace rawdn {

namespace {

constexpr double kAnscombeShift = 0.375;

// Gauss-Hermite rule for the standard normal weight, Newton iteration on the
// orthonormal Hermite recurrence.
struct NormalRule {
    static constexpr std::size_t kNodes = 61;
    std::array<double, kNodes> x{};
    std::array<double, kNodes> w{};

    NormalRule() {
        const int n = static_cast<int>(kNodes);
        const double pim4 = 0.7511255444649425;
        const int m = (n + 1) / 2;
        double z = 0.0;
        std::array<double, kNodes> xp{};
        for (int i = 0; i < m; ++i) {
            if (i == 0) {
                z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
            } else if (i == 1) {
                z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
            } else if (i == 2) {
                z = 1.86 * z - 0.86 * xp[0];
            } else if (i == 3) {
                z = 1.91 * z - 0.91 * xp[1];
            } else {
                z = 2.0 * z - xp[static_cast<std::size_t>(i - 2)];
            }
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = pim4, p2 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
                }
                pp = std::sqrt(2.0 * n) * p2;
                const double z1 = z;
                z = z1 - p1 / pp;
                if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
            }
            const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(n - 1 - i);
            xp[a] = z;
            xp[b] = -z;
            const double wt = 2.0 / (pp * pp);
            x[a] = z * std::numbers::sqrt2;
            x[b] = -z * std::numbers::sqrt2;
            w[a] = w[b] = wt / std::sqrt(std::numbers::pi);
        }
    }
};

// Gauss-Legendre rule on [-1, 1].
struct LegendreRule {
    static constexpr std::size_t kNodes = 64;
    std::array<double, kNodes> x{};
    std::array<double, kNodes> w{};

    LegendreRule() {
        const int n = static_cast<int>(kNodes);
        for (int i = 0; i < (n + 1) / 2; ++i) {
            double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
            double pp = 0.0;
            for (int it = 0; it < 100; ++it) {
                double p1 = 1.0, p2 = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double p3 = p2;
                    p2 = p1;
                    p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
                }
                pp = n * (z * p1 - p2) / (z * z - 1.0);
                const double z1 = z;
                z = z1 - p1 / pp;
                if (std::abs(z - z1) <= 1e-16) break;
            }
            const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(n - 1 - i);
            x[a] = -z;
            x[b] = z;
            w[a] = w[b] = 2.0 / ((1.0 - z * z) * pp * pp);
        }
    }
};

const NormalRule& normal_rule() {
    static const NormalRule rule;
    return rule;
}

const LegendreRule& legendre_rule() {
    static const LegendreRule rule;
    return rule;
}

// Standard-normal mass beyond this many deviations is ignored by the edge-aware rule.
constexpr double kTailCut = 12.0;

// E[gat(k + s u)], u ~ N(0, 1).
double gaussian_component(double k, double sigma_hat, double offset) {
    const double edge = -(k + offset) / sigma_hat;  // u where the transform's argument hits zero
    if (edge <= -kTailCut) {
        const auto& rule = normal_rule();
        double acc = 0.0;
        for (std::size_t i = 0; i < NormalRule::kNodes; ++i) {
            const double v = k + sigma_hat * rule.x[i] + offset;
            if (v > 0.0) acc += rule.w[i] * 2.0 * std::sqrt(v);
        }
        return acc;
    }
    // The square-root kink sits inside the bulk of the Gaussian: integrate over [edge, kTailCut]
    // with u = edge + t^2, which turns 2 sqrt(s (u - edge)) into the smooth 2 sqrt(s) t.
    const auto& rule = legendre_rule();
    const double half = 0.5 * std::sqrt(kTailCut - edge);
    const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    const double root_s = std::sqrt(sigma_hat);
    double acc = 0.0;
    for (std::size_t i = 0; i < LegendreRule::kNodes; ++i) {
        const double t = half * (rule.x[i] + 1.0);
        const double u = edge + t * t;
        acc += rule.w[i] * (2.0 * root_s * t) * norm * std::exp(-0.5 * u * u) * (2.0 * t);
    }
    return acc * half;
}

void check_bias_args(double chi, double sigma_hat) {
    if (!std::isfinite(chi) || !std::isfinite(sigma_hat)) throw DomainError("non-finite bias argument");
    if (!(sigma_hat > 0.0)) throw DomainError("read noise must be positive for the bias function");
    if (chi < 0.0) throw DomainError("bias function needs a non-negative signal");
}

}  // namespace

double gat(double z, double sigma_hat) {
    const double v = z + kAnscombeShift + sigma_hat * sigma_hat;
    return v > 0.0 ? 2.0 * std::sqrt(v) : 0.0;
}

Plane gat(const Plane& z, double sigma_hat) {
    Plane out(z.width(), z.height());
    auto src = z.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = gat(src[i], sigma_hat);
    return out;
}

double iat(double w, double sigma_hat) {
    if (w < 0.0) throw DomainError("inverse transform of a negative value");
    const double h = 0.5 * w;
    return h * h - kAnscombeShift - sigma_hat * sigma_hat;
}

double expected_gat(double chi, double sigma_hat) {
    check_bias_args(chi, sigma_hat);
    const double offset = kAnscombeShift + sigma_hat * sigma_hat;
    if (chi == 0.0) return gaussian_component(0.0, sigma_hat, offset);
    const double spread = 8.0 * std::sqrt(chi + 1.0);
    const double lo = std::max(0.0, std::floor(chi - spread));
    const double hi = std::ceil(chi + spread) + 10.0;
    const double log_chi = std::log(chi);
    double acc = 0.0;
    for (double k = lo; k <= hi; k += 1.0) {
        const double pmf = std::exp(k * log_chi - chi - std::lgamma(k + 1.0));
        acc += pmf * gaussian_component(k, sigma_hat, offset);
    }
    return acc;
}

double bias_quadrature(double chi, double sigma_hat) { return expected_gat(chi, sigma_hat) - gat(chi, sigma_hat); }

double bias_closed_form(double chi, double sigma_hat) {
    check_bias_args(chi, sigma_hat);
    const double s2 = sigma_hat * sigma_hat;
    return -(chi + s2) / (4.0 * std::pow(chi + kAnscombeShift + s2, 1.5));
}

double bias_function(double chi, double sigma_hat) {
    return chi < kLowSignalThreshold ? bias_quadrature(chi, sigma_hat) : bias_closed_form(chi, sigma_hat);
}

// ---------------------------------------------------------------------------------------------
// Look-up table

double LutGrid::node(std::size_t i) const {
    if (count == 1) return std::pow(10.0, log10_min);
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    return std::pow(10.0, log10_min + t * (log10_max - log10_min));
}

namespace {

void check_grid(const LutGrid& g, const char* name) {
    if (g.count < 2 || !(g.log10_max > g.log10_min) || !std::isfinite(g.log10_min) || !std::isfinite(g.log10_max)) {
        throw DomainError(std::string(name) + " grid must be monotone increasing with at least two nodes");
    }
}

// Fractional index of v on a log10 grid, clamped to [0, count-1].
double grid_position(const LutGrid& g, double v) {
    if (!(v > 0.0)) return 0.0;
    const double t = (std::log10(v) - g.log10_min) / (g.log10_max - g.log10_min) * (g.count - 1);
    return std::clamp(t, 0.0, static_cast<double>(g.count - 1));
}

}  // namespace

BiasLut::BiasLut(LutGrid signal, LutGrid read_noise, std::vector<double> values)
    : signal_(signal), read_noise_(read_noise), values_(std::move(values)) {
    check_grid(signal_, "signal");
    check_grid(read_noise_, "read-noise");
    if (values_.size() != static_cast<std::size_t>(signal_.count) * read_noise_.count) {
        throw DimensionError("bias table size does not match its grids");
    }
}

double BiasLut::lookup(double chi, double sigma_hat) const {
    const double ts = grid_position(signal_, chi);
    const double tn = grid_position(read_noise_, sigma_hat);
    const std::size_t i = std::min<std::size_t>(static_cast<std::size_t>(ts), signal_.count - 2);
    const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(tn), read_noise_.count - 2);
    const double fs = ts - static_cast<double>(i);
    const double fn = tn - static_cast<double>(j);
    const double v00 = value(j, i), v01 = value(j, i + 1);
    const double v10 = value(j + 1, i), v11 = value(j + 1, i + 1);
    return (1.0 - fn) * ((1.0 - fs) * v00 + fs * v01) + fn * ((1.0 - fs) * v10 + fs * v11);
}

std::vector<double> BiasLut::slice(double sigma_hat) const {
    const double tn = grid_position(read_noise_, sigma_hat);
    const std::size_t j = std::min<std::size_t>(static_cast<std::size_t>(tn), read_noise_.count - 2);
    const double fn = tn - static_cast<double>(j);
    std::vector<double> row(signal_.count);
    for (std::size_t i = 0; i < signal_.count; ++i) row[i] = (1.0 - fn) * value(j, i) + fn * value(j + 1, i);
    return row;
}

BiasLut build_lut(const LutGrid& signal, const LutGrid& read_noise) {
    check_grid(signal, "signal");
    check_grid(read_noise, "read-noise");
    std::vector<double> values(static_cast<std::size_t>(signal.count) * read_noise.count);
    for (std::size_t j = 0; j < read_noise.count; ++j) {
        const double s = read_noise.node(j);
        for (std::size_t i = 0; i < signal.count; ++i) values[j * signal.count + i] = bias_function(signal.node(i), s);
    }
    return BiasLut(signal, read_noise, std::move(values));
}

double lut_bias(const BiasLut& lut, double chi, double sigma_hat) { return lut.lookup(chi, sigma_hat); }

namespace {

template <typename T>
void put(std::ofstream& out, T v) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    unsigned char b[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(b), sizeof(T))) throw FormatError("truncated LUT file");
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
}

}  // namespace

void save_lut(const BiasLut& lut, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out.write("YLUT", 4);
    put<std::uint32_t>(out, BiasLut::kVersion);
    for (const LutGrid* g : {&lut.signal_grid(), &lut.read_noise_grid()}) {
        put<std::uint32_t>(out, g->count);
        put<double>(out, g->log10_min);
        put<double>(out, g->log10_max);
    }
    for (double v : lut.values()) put<double>(out, v);
    if (!out) throw FormatError("failed writing " + path.string());
}

BiasLut load_lut(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, "YLUT", 4) != 0) throw FormatError("not a bias LUT file");
    const auto version = get<std::uint32_t>(in);
    if (version != BiasLut::kVersion) {
        throw FormatError("LUT version " + std::to_string(version) + " != " + std::to_string(BiasLut::kVersion));
    }
    LutGrid grids[2];
    for (auto& g : grids) {
        g.count = get<std::uint32_t>(in);
        g.log10_min = get<double>(in);
        g.log10_max = get<double>(in);
    }
    std::vector<double> values(static_cast<std::size_t>(grids[0].count) * grids[1].count);
    for (double& v : values) v = get<double>(in);
    return BiasLut(grids[0], grids[1], std::move(values));
}

std::shared_ptr<const BiasLut> shared_lut(const LutGrid& signal, const LutGrid& read_noise,
                                          const std::filesystem::path& cache) {
    using Key = std::tuple<std::uint32_t, double, double, std::uint32_t, double, double>;
    static std::mutex mutex;
    static std::map<Key, std::shared_ptr<const BiasLut>> memo;
    const Key key{signal.count, signal.log10_min, signal.log10_max,
                  read_noise.count, read_noise.log10_min, read_noise.log10_max};
    std::lock_guard lock(mutex);
    if (auto it = memo.find(key); it != memo.end()) return it->second;

    std::shared_ptr<const BiasLut> lut;
    if (!cache.empty() && std::filesystem::exists(cache)) {
        try {
            auto loaded = load_lut(cache);
            if (loaded.signal_grid() == signal && loaded.read_noise_grid() == read_noise) {
                lut = std::make_shared<const BiasLut>(std::move(loaded));
            }
        } catch (const FormatError&) {
            // stale or foreign file: rebuilt below
        }
    }
    if (!lut) {
        lut = std::make_shared<const BiasLut>(build_lut(signal, read_noise));
        if (!cache.empty()) save_lut(*lut, cache);
    }
    memo.emplace(key, lut);
    return lut;
}

// ---------------------------------------------------------------------------------------------
// Image transforms

TransformContext make_context(const NoiseParams& params, double black_level, double white_level) {
    if (!(black_level < white_level)) throw DomainError("black level must be below white level");
    TransformContext ctx;
    ctx.params = params;
    ctx.black_level = black_level;
    ctx.white_level = white_level;
    const double range = white_level - black_level;
    ctx.alpha_dn = params.alpha * range;
    ctx.sigma_dn = params.sigma * range;
    ctx.sigma_hat = params.sigma_hat();
    ctx.peak = gat(1.0 / params.alpha, ctx.sigma_hat);
    ctx.sigma_snr = 1.0 / ctx.peak;
    return ctx;
}

NormalizedImage em_vst_forward(const BayerImage& img, const TransformContext& ctx, const BiasLut& lut) {
    const auto table = lut.slice(ctx.sigma_hat);
    const LutGrid& g = lut.signal_grid();
    simd::EmVstRowParams p;
    p.black = ctx.black_level;
    p.inv_alpha = 1.0 / ctx.alpha_dn;
    p.offset = kAnscombeShift + ctx.sigma_hat * ctx.sigma_hat;
    p.inv_peak = 1.0 / ctx.peak;
    p.bias = table.data();
    p.bias_count = table.size();
    p.log_min = g.log10_min * std::numbers::ln10;
    p.inv_log_step = static_cast<double>(g.count - 1) / ((g.log10_max - g.log10_min) * std::numbers::ln10);

    NormalizedImage out{Plane(img.width(), img.height()), img.cfa, ctx.sigma_hat, ctx.peak};
    const auto& k = simd::active_kernels();
    for (std::size_t r = 0; r < img.height(); ++r) {
        k.emvst_forward_row(img.data.row(r).data(), img.width(), p, out.data.row(r).data());
    }
    return out;
}

NormalizedImage gat_forward(const BayerImage& img, const TransformContext& ctx) {
    NormalizedImage out{Plane(img.width(), img.height()), img.cfa, ctx.sigma_hat, ctx.peak};
    auto src = img.data.values();
    auto dst = out.data.values();
    const double inv_alpha = 1.0 / ctx.alpha_dn;
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = gat((src[i] - ctx.black_level) * inv_alpha, ctx.sigma_hat) / ctx.peak;
    }
    return out;
}

namespace {

simd::InverseRowParams inverse_params(const TransformContext& ctx) {
    simd::InverseRowParams p;
    p.half_peak = 0.5 * ctx.peak;
    p.offset = kAnscombeShift + ctx.sigma_hat * ctx.sigma_hat;
    p.alpha = ctx.alpha_dn;
    p.black = ctx.black_level;
    p.lo = ctx.black_level - 4.0 * ctx.sigma_dn;
    p.hi = ctx.white_level;
    return p;
}

}  // namespace

BayerImage inverse_after_denoise(const NormalizedImage& den, const TransformContext& ctx) {
    Plane out(den.data.width(), den.data.height());
    const auto p = inverse_params(ctx);
    const auto& k = simd::active_kernels();
    for (std::size_t r = 0; r < out.height(); ++r) {
        k.inverse_row(den.data.row(r).data(), out.width(), p, out.row(r).data());
    }
    return BayerImage(std::move(out), den.cfa, ctx.black_level, ctx.white_level);
}

BayerImage uiat_baseline(const NormalizedImage& den, const TransformContext& ctx, const BiasLut& lut) {
    Plane out(den.data.width(), den.data.height());
    const auto p = inverse_params(ctx);
    auto src = den.data.values();
    auto dst = out.values();
    for (std::size_t i = 0; i < src.size(); ++i) {
        const double w = std::max(0.0, src[i] * ctx.peak);
        const double estimate = std::max(0.0, iat(w, ctx.sigma_hat));
        const double corrected = std::max(0.0, w - lut.lookup(estimate, ctx.sigma_hat));
        dst[i] = std::clamp(p.alpha * iat(corrected, ctx.sigma_hat) + p.black, p.lo, p.hi);
    }
    return BayerImage(std::move(out), den.cfa, ctx.black_level, ctx.white_level);
}

}  // namespace rawdn
