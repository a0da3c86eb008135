// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>

namespace rawdn {

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size() && std::isfinite(d)) return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("invalid number for " + key + ": '" + v + "'");
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("invalid integer for " + key + ": '" + v + "'");
    }
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("invalid boolean for " + key + ": '" + v + "'");
}

}  // namespace

void PipelineConfig::apply(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "p") p = parse_uint(key, v);
    else if (key == "p_blur") p_blur = parse_uint(key, v);
    else if (key == "ats_quantile") ats_quantile = parse_double(key, v);
    else if (key == "sigma_mult") sigma_multiplier = parse_double(key, v);
    else if (key == "alpha") override_alpha = parse_double(key, v);
    else if (key == "sigma") override_sigma = parse_double(key, v);
    else if (key == "denoiser") denoiser = v;
    else if (key == "external_command") external_command = v;
    else if (key == "dct_threshold") dct.threshold = parse_double(key, v);
    else if (key == "dct_stride") dct.stride = parse_uint(key, v);
    else if (key == "dct_wiener") dct.wiener = parse_bool(key, v);
    else if (key == "gaussian_scale") gaussian_scale = parse_double(key, v);
    else if (key == "fine_residual") fine_residual = parse_bool(key, v);
    else if (key == "iterative") iterative = parse_bool(key, v);
    else if (key == "iter_steps") iter.steps = parse_uint(key, v);
    else if (key == "iter_eta") iter.eta = parse_double(key, v);
    else if (key == "iter_gamma") iter.gamma = parse_double(key, v);
    else if (key == "iter_target_ratio") iter.target_ratio = parse_double(key, v);
    else if (key == "lut_signal_count") signal_grid.count = static_cast<std::uint32_t>(parse_uint(key, v));
    else if (key == "lut_signal_log10_min") signal_grid.log10_min = parse_double(key, v);
    else if (key == "lut_signal_log10_max") signal_grid.log10_max = parse_double(key, v);
    else if (key == "lut_noise_count") read_noise_grid.count = static_cast<std::uint32_t>(parse_uint(key, v));
    else if (key == "lut_noise_log10_min") read_noise_grid.log10_min = parse_double(key, v);
    else if (key == "lut_noise_log10_max") read_noise_grid.log10_max = parse_double(key, v);
    else if (key == "lut_cache") lut_cache = v;
    else if (key == "seed") seed = parse_uint(key, v);
    else throw ConfigError("unknown config key: " + key);
}

void PipelineConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected key = value");
        }
        apply(trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::optional<NoiseParams> PipelineConfig::noise_override() const {
    if (override_alpha.has_value() != override_sigma.has_value()) {
        throw ConfigError("alpha and sigma must be overridden together");
    }
    if (!override_alpha) return std::nullopt;
    try {
        return NoiseParams(*override_alpha, *override_sigma);
    } catch (const DomainError& e) {
        throw ConfigError(std::string("invalid noise override: ") + e.what());
    }
}

void PipelineConfig::set_noise_override(const NoiseParams& np) {
    override_alpha = np.alpha;
    override_sigma = np.sigma;
}

void PipelineConfig::validate() const {
    if (p == 0 || p % 2 == 0) throw ConfigError("p must be odd and positive");
    if (p_blur == 0 || p_blur % 2 == 0) throw ConfigError("p_blur must be odd and positive");
    if (!(sigma_multiplier > 0.0)) throw ConfigError("sigma multiplier must be positive");
    if (ats_quantile && !(*ats_quantile > 0.0 && *ats_quantile <= 1.0)) {
        throw ConfigError("ats_quantile must lie in (0, 1]");
    }
    (void)noise_override();
    if (denoiser == "external" && external_command.empty()) throw ConfigError("external denoiser needs external_command");
    if (signal_grid.count < 2 || read_noise_grid.count < 2 || !(signal_grid.log10_max > signal_grid.log10_min) ||
        !(read_noise_grid.log10_max > read_noise_grid.log10_min)) {
        throw ConfigError("LUT grids need at least two nodes and increasing bounds");
    }
    if (iterative) iter.validate();
}

std::unique_ptr<Denoiser> PipelineConfig::make_denoiser() const {
    if (denoiser == "dct") return std::make_unique<DctDenoiser>(dct);
    if (denoiser == "gaussian") return std::make_unique<GaussianDenoiser>(gaussian_scale);
    return rawdn::make_denoiser(denoiser, external_command);
}

CneOptions PipelineConfig::cne_options() const {
    CneOptions o;
    o.p = p;
    o.p_blur = p_blur;
    o.ats.quantile_override = ats_quantile;
    return o;
}

// ---------------------------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::vector<Plane> as_vector(std::array<Plane, 4> a) { return {std::make_move_iterator(a.begin()), std::make_move_iterator(a.end())}; }

std::array<Plane, 4> as_array(PlaneStack v) {
    if (v.size() != 4) throw DimensionError("denoiser returned the wrong number of planes");
    return {std::move(v[0]), std::move(v[1]), std::move(v[2]), std::move(v[3])};
}

}  // namespace

SingleDenoise denoise_known(const BayerImage& noisy, const NoiseParams& params, const Denoiser& d,
                            const PipelineConfig& cfg, bool iterative) {
    SingleDenoise out;
    out.context = make_context(params, noisy.black_level, noisy.white_level);
    auto lut = shared_lut(cfg.signal_grid, cfg.read_noise_grid, cfg.lut_cache);
    out.input_hash = content_hash(noisy.data);
    NormalizedImage fwd = em_vst_forward(noisy, out.context, *lut);
    out.guidance = DenoiserGuidance(out.context.sigma_snr, cfg.sigma_multiplier);

    PlaneStack planes = as_vector(pack_plane(fwd.data, fwd.cfa));
    PlaneStack den;
    if (iterative) {
        IterConfig ic = cfg.iter;
        ic.seed = cfg.seed;
        IterTrace trace;
        den = iterative_denoise(planes, d, out.guidance, ic, &trace);
        out.trace = std::move(trace);
    } else {
        den = d.denoise(planes, out.guidance);
    }
    fwd.data = unpack_planes(as_array(std::move(den)), fwd.cfa);
    out.image = inverse_after_denoise(fwd, out.context);
    return out;
}

namespace {

// Shared by run_cne and run_pipeline so both report identical estimates.
struct CneRun {
    EstimationReport report;
    BayerImage coarse_denoised;
    TransformContext coarse_context;
    std::vector<StageTiming> timings;
};

CneRun cne_stages(const BayerImage& noisy, const Denoiser& d, const PipelineConfig& cfg) {
    CneRun run;
    CneOptions opt = cfg.cne_options();
    const auto unit = unit_planes(noisy);

    auto t0 = Clock::now();
    run.report.coarse = estimate_coarse(unit, opt);
    run.timings.push_back({"estimate_coarse", seconds_since(t0)});

    t0 = Clock::now();
    SingleDenoise coarse = denoise_known(noisy, run.report.coarse->params, d, cfg, false);
    run.coarse_denoised = std::move(coarse.image);
    run.coarse_context = coarse.context;
    if (cfg.perturb_coarse) cfg.perturb_coarse(run.coarse_denoised);
    run.timings.push_back({"denoise_coarse", seconds_since(t0)});

    t0 = Clock::now();
    if (cfg.fine_residual) {
        opt.residual_ratio = std::min(0.25, residual_noise_ratio(d, coarse.guidance, opt.p, cfg.seed));
        run.report.residual_ratio = opt.residual_ratio;
    }
    const auto unit_coarse = unit_planes(run.coarse_denoised);
    run.report.fine = estimate_fine(unit, unit_coarse, opt);
    run.timings.push_back({"estimate_fine", seconds_since(t0)});

    run.report.final_params = run.report.fine->params;
    for (const auto& w : run.report.coarse->warnings) run.report.warnings.push_back("coarse: " + w);
    for (const auto& w : run.report.fine->warnings) run.report.warnings.push_back("fine: " + w);
    return run;
}

}  // namespace

EstimationReport run_cne(const BayerImage& noisy, const Denoiser& d, const PipelineConfig& cfg) {
    cfg.validate();
    return cne_stages(noisy, d, cfg).report;
}

PipelineResult run_pipeline(const BayerImage& noisy, const PipelineConfig& cfg) {
    cfg.validate();
    auto denoiser = cfg.make_denoiser();
    PipelineResult res;
    res.noisy_hash = content_hash(noisy.data);

    if (const auto over = cfg.noise_override()) {
        res.report.skipped = true;
        res.report.final_params = *over;
    } else {
        CneRun run = cne_stages(noisy, *denoiser, cfg);
        res.report = std::move(run.report);
        res.coarse_denoised = std::move(run.coarse_denoised);
        res.contexts.push_back(run.coarse_context);
        res.timings = std::move(run.timings);
    }

    const auto t0 = Clock::now();
    SingleDenoise fin = denoise_known(noisy, res.report.final_params, *denoiser, cfg, cfg.iterative);
    res.timings.push_back({cfg.iterative ? "denoise_iterative" : "denoise_final", seconds_since(t0)});
    res.denoised = std::move(fin.image);
    res.contexts.push_back(fin.context);
    res.guidance = fin.guidance;
    res.trace = std::move(fin.trace);
    res.final_input_hash = fin.input_hash;
    return res;
}

nlohmann::json PipelineResult::to_json() const {
    nlohmann::json j;
    j["estimation"] = report.to_json();
    j["guidance"] = {{"sigma_snr", guidance.sigma_snr},
                     {"multiplier", guidance.multiplier},
                     {"effective", guidance.effective()}};
    nlohmann::json ctx = nlohmann::json::array();
    for (const auto& c : contexts) {
        ctx.push_back({{"alpha", c.params.alpha},
                       {"sigma", c.params.sigma},
                       {"alpha_dn", c.alpha_dn},
                       {"sigma_dn", c.sigma_dn},
                       {"sigma_hat", c.sigma_hat},
                       {"peak", c.peak},
                       {"sigma_snr", c.sigma_snr}});
    }
    j["contexts"] = ctx;
    if (trace) j["iteration"] = {{"gamma", trace->gamma}, {"sigmas", trace->sigmas}};
    nlohmann::json t = nlohmann::json::object();
    for (const auto& s : timings) t[s.stage] = s.seconds;
    j["timings_s"] = t;
    j["noisy_hash"] = noisy_hash;
    j["final_input_hash"] = final_input_hash;
    return j;
}

}  // namespace rawdn
