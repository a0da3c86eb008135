// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/cne.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rawdn/filters.hpp"
#include "rawdn/rawmodel.hpp"

namespace rawdn {

std::size_t FlatMask::count() const {
    std::size_t n = 0;
    for (const auto& p : planes) n += static_cast<std::size_t>(std::count(p.begin(), p.end(), std::uint8_t{1}));
    return n;
}

namespace {

void check_matching(std::span<const Plane> a, std::span<const Plane> b) {
    if (a.empty() || a.size() != b.size()) throw DimensionError("plane sets differ in count");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i].same_shape(a[0]) || !b[i].same_shape(a[0])) throw DimensionError("plane shapes differ");
    }
}

std::size_t histogram_bin(double v, const AtsOptions& opt) {
    const double t = v / opt.histogram_max * static_cast<double>(opt.histogram_bins);
    if (!(t > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(t), opt.histogram_bins - 1);
}

}  // namespace

FlatMask ats(std::span<const Plane> guide_std, std::span<const Plane> means_for_bins, const AtsOptions& opt) {
    check_matching(guide_std, means_for_bins);
    if (opt.candidates == 0 || opt.histogram_bins == 0) throw DomainError("ATS needs candidates and bins");
    FlatMask m;
    m.width = guide_std[0].width();
    m.height = guide_std[0].height();

    std::vector<double> pooled;
    pooled.reserve(guide_std.size() * guide_std[0].size());
    for (const auto& g : guide_std) {
        for (double v : g.values()) {
            if (!(v >= 0.0)) throw DomainError("guide standard deviation must be non-negative");
            pooled.push_back(v);
        }
    }
    const std::size_t total = pooled.size();
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());

    auto build_mask = [&](double theta) {
        m.planes.assign(guide_std.size(), std::vector<std::uint8_t>(m.width * m.height, 0));
        for (std::size_t p = 0; p < guide_std.size(); ++p) {
            auto g = guide_std[p].values();
            for (std::size_t i = 0; i < g.size(); ++i) m.planes[p][i] = g[i] <= theta ? 1 : 0;
        }
    };

    if (sorted.back() == 0.0) {
        m.degenerate = true;
        m.threshold = 0.0;
        m.fraction = 1.0;
        build_mask(0.0);
        std::vector<std::uint8_t> seen(opt.histogram_bins, 0);
        for (const auto& mp : means_for_bins) {
            for (double v : mp.values()) seen[histogram_bin(v, opt)] = 1;
        }
        m.bins = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), std::uint8_t{1}));
        return m;
    }

    std::vector<std::uint8_t> seen(opt.histogram_bins);
    for (std::size_t k = 1; k <= opt.candidates; ++k) {
        AtsCandidate cand;
        cand.level = static_cast<double>(k) / static_cast<double>(opt.candidates);
        const auto rank = static_cast<std::size_t>(std::ceil(cand.level * static_cast<double>(total) - 1e-9));
        cand.threshold = sorted[std::clamp<std::size_t>(rank, 1, total) - 1];
        const auto selected = static_cast<std::size_t>(
            std::upper_bound(sorted.begin(), sorted.end(), cand.threshold) - sorted.begin());
        cand.fraction = static_cast<double>(selected) / static_cast<double>(total);

        std::fill(seen.begin(), seen.end(), 0);
        for (std::size_t p = 0; p < guide_std.size(); ++p) {
            auto g = guide_std[p].values();
            auto mv = means_for_bins[p].values();
            for (std::size_t i = 0; i < g.size(); ++i) {
                if (g[i] <= cand.threshold) seen[histogram_bin(mv[i], opt)] = 1;
            }
        }
        cand.bins = static_cast<std::size_t>(std::count(seen.begin(), seen.end(), std::uint8_t{1}));
        cand.score = cand.threshold * cand.threshold / (cand.fraction * static_cast<double>(cand.bins));
        m.candidates.push_back(cand);
    }

    std::size_t best = 0;
    if (opt.quantile_override) {
        const double want = *opt.quantile_override;
        if (!(want > 0.0 && want <= 1.0)) throw DomainError("ATS quantile override must lie in (0, 1]");
        for (std::size_t i = 1; i < m.candidates.size(); ++i) {
            if (std::abs(m.candidates[i].level - want) < std::abs(m.candidates[best].level - want)) best = i;
        }
    } else {
        // Equal scores go to the smaller threshold; among candidates sharing one threshold the
        // highest nominal quantile is reported, since that is the one q actually reaches.
        for (std::size_t i = 1; i < m.candidates.size(); ++i) {
            const auto& c = m.candidates[i];
            const auto& b = m.candidates[best];
            if (c.score < b.score || (c.score == b.score && c.threshold == b.threshold)) best = i;
        }
    }
    m.selected = best;
    m.threshold = m.candidates[best].threshold;
    m.fraction = m.candidates[best].fraction;
    m.bins = m.candidates[best].bins;
    build_mask(m.threshold);
    return m;
}

namespace {

constexpr int kFitPasses = 8;

struct SampleGrid {
    std::size_t first;
    std::size_t step;
};

// Window centres whose p x p support lies inside the plane, spaced ceil(p/2) apart.
SampleGrid sample_grid(std::size_t p) { return {p / 2, (p + 1) / 2}; }

template <typename Emit>
void for_each_grid_point(std::size_t w, std::size_t h, std::size_t p, Emit&& emit) {
    const auto g = sample_grid(p);
    for (std::size_t r = g.first; r + g.first < h; r += g.step) {
        for (std::size_t c = g.first; c + g.first < w; c += g.step) emit(r, c);
    }
}

struct Maps {
    std::vector<Plane> guide;
    std::vector<Plane> mean;
    std::vector<Plane> variance;
};

StageEstimate finish_stage(const Maps& maps, SampleStage stage, const CneOptions& opt) {
    StageEstimate est;
    est.mask = ats(maps.guide, maps.mean, opt.ats);
    est.samples.stage = stage;
    const std::size_t w = maps.mean[0].width(), h = maps.mean[0].height();

    struct GridPoint {
        double guide;
        MVSample s;
    };
    std::vector<GridPoint> grid;
    for (std::size_t p = 0; p < maps.mean.size(); ++p) {
        for_each_grid_point(w, h, opt.p, [&](std::size_t r, std::size_t c) {
            const MVSample s{maps.mean[p](r, c), maps.variance[p](r, c), 1.0};
            grid.push_back({maps.guide[p](r, c), s});
            if (est.mask.at(p, r, c)) est.samples.samples.push_back(s);
        });
    }
    if (grid.empty()) throw DimensionError("image too small for the sampling grid");

    if (est.mask.degenerate) est.warnings.push_back("guide standard deviation is zero everywhere; using the full image");
    if (est.mask.fraction < 0.01) est.warnings.push_back("selected flat fraction below 1%");

    auto distinct = [](const MVSamples& s) {
        return std::any_of(s.samples.begin(), s.samples.end(),
                           [&](const MVSample& x) { return x.mean != s.samples.front().mean; });
    };
    if (est.samples.size() < 2 || !distinct(est.samples)) {
        est.warnings.push_back("flat mask yielded too few samples; falling back to the lowest-variance 5% of windows");
        std::sort(grid.begin(), grid.end(), [](const GridPoint& a, const GridPoint& b) { return a.guide < b.guide; });
        const std::size_t keep = std::max<std::size_t>(2, (grid.size() + 19) / 20);
        est.samples.samples.clear();
        for (std::size_t i = 0; i < std::min(keep, grid.size()); ++i) est.samples.samples.push_back(grid[i].s);
    }

    const double max_var = std::accumulate(est.samples.samples.begin(), est.samples.samples.end(), 0.0,
                                           [](double a, const MVSample& s) { return std::max(a, std::abs(s.variance)); });
    if (max_var <= 1e-24 || !distinct(est.samples)) {
        est.warnings.push_back("no measurable noise variance in the flat regions");
        est.params = NoiseParams(kMinAlpha, 0.0);
        est.fit.used = est.samples.size();
        return est;
    }
    // The sampling error of a windowed variance grows with the variance itself, so once a
    // pass yields a positive slope the surviving samples are weighted by 1 / V_model^2.
    // Every pass continues from the previous inliers, so textured windows the guide missed
    // are peeled off over several passes rather than dragging the first fit.
    MVSamples current = est.samples;
    est.fit = fit_line_robust(current);
    for (int pass = 0; pass < kFitPasses; ++pass) {
        MVSamples next;
        next.stage = current.stage;
        for (std::size_t i = 0; i < current.size(); ++i) {
            if (est.fit.inliers[i]) next.samples.push_back(current.samples[i]);
        }
        const bool weighted = est.fit.slope > 0.0;
        double floor = 0.0;
        for (const auto& s : next.samples) floor = std::max(floor, est.fit.slope * s.mean + est.fit.intercept);
        floor *= 1e-3;
        for (auto& s : next.samples) {
            const double v = std::max(est.fit.slope * s.mean + est.fit.intercept, floor);
            s.weight = weighted ? 1.0 / (v * v) : 1.0;
        }
        if (next.size() < 2 || !distinct(next)) break;
        const bool converged = weighted && est.fit.discarded == 0 && pass > 0;
        est.fit = fit_line_robust(next);
        current = std::move(next);
        if (converged && est.fit.discarded == 0) break;
    }
    est.fit.discarded = est.samples.size() - est.fit.used;
    if (est.fit.slope <= kMinAlpha) est.warnings.push_back("fitted gain is not positive; clamped");
    if (est.fit.intercept_clamped) {
        est.warnings.push_back("fitted read-noise variance is negative; clamped to zero");
    }
    est.params = NoiseParams(std::max(est.fit.slope, kMinAlpha), std::sqrt(est.fit.intercept));
    return est;
}

}  // namespace

StageEstimate estimate_coarse(std::span<const Plane> noisy, const CneOptions& opt) {
    if (noisy.empty()) throw DimensionError("no planes to estimate from");
    for (const auto& p : noisy) {
        if (!p.same_shape(noisy[0])) throw DimensionError("plane shapes differ");
        if (p.width() < opt.p || p.height() < opt.p) throw DimensionError("image smaller than the estimation kernel");
    }
    Maps maps;
    for (const auto& plane : noisy) {
        maps.guide.push_back(box_std(box_mean(plane, opt.p_blur), opt.p));
        BoxStats s = box_stats(plane, opt.p);
        for (double& v : s.std.values()) v *= v;
        maps.mean.push_back(std::move(s.mean));
        maps.variance.push_back(std::move(s.std));
    }
    StageEstimate est = finish_stage(maps, SampleStage::Coarse, opt);

    // Texture check: on genuinely flat ground the blurred guide carries only noise, roughly
    // sqrt(alpha I + sigma^2) / p_blur. A threshold far above that means nothing flat was found.
    if (!est.samples.empty()) {
        double mean_i = 0.0;
        for (const auto& s : est.samples.samples) mean_i += s.mean;
        mean_i /= static_cast<double>(est.samples.size());
        const double noise_guide =
            std::sqrt(std::max(0.0, est.params.alpha * mean_i + est.params.sigma * est.params.sigma)) /
            static_cast<double>(opt.p_blur);
        if (est.mask.threshold > kTextureRatio * noise_guide) {
            est.warnings.push_back("texture-dominated image: no flat regions found, estimate is biased upward");
        }
    }
    return est;
}

StageEstimate estimate_fine(std::span<const Plane> noisy, std::span<const Plane> coarse_denoised,
                            const CneOptions& opt) {
    check_matching(noisy, coarse_denoised);
    if (!(opt.residual_ratio >= 0.0 && opt.residual_ratio < 0.5)) {
        throw DomainError("residual ratio must lie in [0, 0.5)");
    }
    const double gain = 1.0 / (1.0 - opt.residual_ratio);
    if (noisy[0].width() < opt.p || noisy[0].height() < opt.p) {
        throw DimensionError("image smaller than the estimation kernel");
    }
    Maps maps;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        BoxStats ref = box_stats(coarse_denoised[i], opt.p);
        Plane noisy_std = box_std(noisy[i], opt.p);
        Plane v(noisy_std.width(), noisy_std.height());
        auto a = noisy_std.values();
        auto b = ref.std.values();
        auto out = v.values();
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = gain * (a[k] * a[k] - b[k] * b[k]);
        maps.guide.push_back(std::move(ref.std));
        maps.mean.push_back(std::move(ref.mean));
        maps.variance.push_back(std::move(v));
    }
    return finish_stage(maps, SampleStage::Fine, opt);
}

nlohmann::json to_json(const NoiseParams& p) {
    return {{"alpha", p.alpha}, {"sigma", p.sigma}, {"sigma_hat", p.sigma_hat()}};
}

nlohmann::json to_json(const FlatMask& m) {
    nlohmann::json cands = nlohmann::json::array();
    for (const auto& c : m.candidates) {
        cands.push_back({{"quantile", c.level},
                         {"threshold", c.threshold},
                         {"fraction", c.fraction},
                         {"bins", c.bins},
                         {"score", c.score}});
    }
    return {{"threshold", m.threshold},  {"threshold_variance", m.threshold * m.threshold}, {"fraction", m.fraction},     {"bins", m.bins},
            {"selected", m.selected},    {"degenerate", m.degenerate}, {"candidates", cands}};
}

namespace {

nlohmann::json stage_json(const StageEstimate& s) {
    return {{"params", to_json(s.params)},
            {"ats", to_json(s.mask)},
            {"samples", {{"count", s.samples.size()}, {"used", s.fit.used}, {"discarded", s.fit.discarded}}},
            {"intercept_clamped", s.fit.intercept_clamped},
            {"warnings", s.warnings}};
}

}  // namespace

nlohmann::json EstimationReport::to_json() const {
    nlohmann::json j;
    j["skipped"] = skipped;
    j["residual_ratio"] = residual_ratio;
    j["params"] = rawdn::to_json(final_params);
    j["coarse"] = coarse ? stage_json(*coarse) : nlohmann::json(nullptr);
    j["fine"] = fine ? stage_json(*fine) : nlohmann::json(nullptr);
    j["warnings"] = warnings;
    return j;
}

void write_mask_png(const FlatMask& mask, const std::filesystem::path& path) {
    std::vector<std::uint8_t> px(mask.width * mask.height);
    const double n = static_cast<double>(mask.planes.size());
    for (std::size_t i = 0; i < px.size(); ++i) {
        double acc = 0.0;
        for (const auto& p : mask.planes) acc += p[i];
        px[i] = static_cast<std::uint8_t>(std::lround(255.0 * acc / n));
    }
    write_png_gray(px, mask.width, mask.height, path);
}

}  // namespace rawdn
