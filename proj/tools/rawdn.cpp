// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 validation failed, 2 usage or
// configuration error, 3 runtime failure (I/O, external denoiser, numerical).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rawdn/cne.hpp"
#include "rawdn/error.hpp"
#include "rawdn/harness.hpp"
#include "rawdn/metrics.hpp"
#include "rawdn/pipeline.hpp"
#include "rawdn/rawmodel.hpp"
#include "rawdn/scenes.hpp"
#include "rawdn/vst.hpp"

namespace fs = std::filesystem;
using namespace rawdn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;
constexpr int kExitRuntime = 3;

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha;
    std::optional<double> sigma;
    std::optional<double> sigma_mult;
    std::optional<double> ats_quantile;
    std::vector<std::string> set;  // extra key=value pairs
};

PipelineConfig make_config(const Globals& g) {
    PipelineConfig cfg;
    if (!g.config.empty()) cfg.load(g.config);
    for (const auto& kv : g.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (g.seed) cfg.seed = *g.seed;
    if (g.alpha) cfg.override_alpha = *g.alpha;
    if (g.sigma) cfg.override_sigma = *g.sigma;
    if (g.sigma_mult) cfg.sigma_multiplier = *g.sigma_mult;
    if (g.ats_quantile) cfg.ats_quantile = *g.ats_quantile;
    cfg.validate();
    cfg.noise_override();  // rejects a lone --alpha or --sigma
    return cfg;
}

void write_json(const nlohmann::json& j, const std::string& path) {
    if (path == "-") {
        std::cout << j.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void print_params(const char* label, const NoiseParams& p) {
    std::printf("%-8s alpha %.4e  sigma %.4e  sigma_hat %.3f\n", label, p.alpha, p.sigma, p.sigma_hat());
}

std::vector<CameraPreset> select_rows(const std::vector<std::string>& specs) {
    if (specs.empty()) return {kCameraPresets.begin(), kCameraPresets.end()};
    std::vector<CameraPreset> rows;
    for (const auto& s : specs) {
        const auto colon = s.find(':');
        if (colon == std::string::npos) throw ConfigError("row must be camera:iso, got '" + s + "'");
        int iso = 0;
        try {
            iso = std::stoi(s.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("bad ISO in '" + s + "'");
        }
        rows.push_back(find_preset(s.substr(0, colon), iso));
    }
    return rows;
}

// --- subcommands --------------------------------------------------------------------

int cmd_estimate(const Globals& g, const std::string& input, const std::string& json_path,
                 const std::string& mask_path) {
    const PipelineConfig cfg = make_config(g);
    const BayerImage img = load_raw(input);
    EstimationReport rep;
    if (auto over = cfg.noise_override()) {
        rep.skipped = true;
        rep.final_params = *over;
    } else {
        rep = run_cne(img, *cfg.make_denoiser(), cfg);
    }
    if (json_path != "-") {  // stdout carries only the JSON then
        if (rep.coarse) print_params("coarse", rep.coarse->params);
        if (rep.fine) print_params("fine", rep.fine->params);
        print_params(rep.skipped ? "given" : "final", rep.final_params);
    }
    for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    if (!json_path.empty()) write_json(rep.to_json(), json_path);
    if (!mask_path.empty()) {
        if (!rep.fine) throw ConfigError("--mask needs estimation; drop --alpha/--sigma");
        write_mask_png(rep.fine->mask, mask_path);
    }
    return kExitOk;
}

int cmd_denoise(const Globals& g, const std::string& input, const std::string& out, std::string report,
                bool iterative, const std::string& denoiser, const std::string& external) {
    PipelineConfig cfg = make_config(g);
    if (iterative) cfg.iterative = true;
    if (!denoiser.empty()) cfg.denoiser = denoiser;
    if (!external.empty()) {
        cfg.denoiser = "external";
        cfg.external_command = external;
    }
    cfg.validate();
    const BayerImage img = load_raw(input);
    const PipelineResult res = run_pipeline(img, cfg);
    save_raw(res.denoised, out);
    if (report.empty()) {
        fs::path p = out;
        p.replace_extension(".report.json");
        report = p.string();
    }
    nlohmann::json j = res.to_json();
    j["input"] = input;
    j["output"] = out;
    j["denoiser"] = cfg.denoiser;
    j["sigma_multiplier"] = cfg.sigma_multiplier;
    j["iterative"] = cfg.iterative;
    write_json(j, report);
    print_params(res.report.skipped ? "given" : "estimate", res.report.final_params);
    std::printf("sigma_snr %.5f x %.3f -> %.5f\n", res.guidance.sigma_snr, res.guidance.multiplier,
                res.guidance.effective());
    for (const auto& w : res.report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
    std::printf("wrote %s and %s\n", out.c_str(), report.c_str());
    return kExitOk;
}

int cmd_scenes(const Globals& g, const std::string& out_dir, std::size_t count, const std::string& kind,
               std::size_t size) {
    const SceneKind k = parse_scene(kind);
    SceneOptions opt;
    opt.width = opt.height = size;
    const std::uint64_t base = g.seed.value_or(100);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < count; ++i) {
        const BayerImage img = make_scene(k, base + i, opt);
        save_raw(img, fs::path(out_dir) / (img.tag + ".raw16"));
    }
    std::printf("wrote %zu %s scenes to %s\n", count, kind.c_str(), out_dir.c_str());
    return kExitOk;
}

int cmd_synth(const Globals& g, const std::string& clean_dir, const std::string& out_dir,
              const std::vector<std::string>& rows) {
    const auto sel = select_rows(rows);
    const fs::path manifest = make_synthetic_suite(clean_dir, sel, g.seed.value_or(0), out_dir);
    std::printf("wrote %s\n", manifest.c_str());
    return kExitOk;
}

int cmd_validate_vst(const Globals& g, const std::string& camera, int iso, std::size_t n,
                     std::vector<double> grid, const std::string& csv) {
    const PipelineConfig cfg = make_config(g);
    NoiseParams params;
    if (auto over = cfg.noise_override()) {
        params = *over;
    } else {
        params = find_preset(camera, iso).params();
    }
    if (grid.empty()) grid = default_vst_grid();
    const auto lut = shared_lut(cfg.signal_grid, cfg.read_noise_grid, cfg.lut_cache);
    const auto recs = validate_vst(params.sigma_hat(), grid, n, cfg.seed, *lut);
    if (!csv.empty()) write_vst_csv(recs, csv);
    bool all = true;
    std::printf("sigma_hat %.4f, n %zu; bounds: added std <= %.0f%%, residual <= %.0f%% of bias\n",
                params.sigma_hat(), n, 100 * kAddedStdBound, 100 * kResidualBound);
    std::printf("%8s %12s %10s %10s %10s  %s\n", "chi", "bias", "added_std", "residual", "+-se", "result");
    for (const auto& r : recs) {
        all = all && r.pass;
        std::printf("%8g %12.4e %10.4f %9.2f%% %9.2f%%  %s%s\n", r.chi, r.exact_bias, r.added_std,
                    100 * r.residual, 100 * r.residual_se, r.pass ? "pass" : "FAIL",
                    r.low_confidence ? " (low confidence)" : "");
    }
    std::printf("%s\n", all ? "all records pass" : "some records FAIL");
    return all ? kExitOk : kExitFailed;
}

int cmd_validate_estimation(const Globals& g, const std::string& manifest, std::size_t trials,
                            const std::string& csv, const std::string& trials_csv, double alpha_bound,
                            double sigma_bound, double refined_bound) {
    const PipelineConfig cfg = make_config(g);
    if (cfg.noise_override()) throw ConfigError("validate-estimation cannot take --alpha/--sigma");
    const auto suite = load_suite(manifest);
    const EstimationTable table = validate_estimation(suite, trials, cfg);
    if (!csv.empty()) write_estimation_csv(table, csv);
    if (!trials_csv.empty()) write_estimation_trials_csv(table, trials_csv);

    bool ok = true;
    std::size_t refined = 0;
    std::printf("%-6s %6s | %9s %9s | %9s %9s | %s\n", "camera", "iso", "coarse a", "coarse s", "fine a", "fine s",
                "result");
    for (const auto& r : table.rows) {
        const bool pass = r.fine_alpha_dev <= alpha_bound && r.fine_sigma_dev <= sigma_bound;
        ok = ok && pass;
        std::printf("%-6s %6d | %8.2f%% %8.2f%% | %8.2f%% %8.2f%% | %s\n", std::string(r.preset.camera).c_str(),
                    r.preset.iso, 100 * r.coarse_alpha_dev, 100 * r.coarse_sigma_dev, 100 * r.fine_alpha_dev,
                    100 * r.fine_sigma_dev, pass ? "pass" : "FAIL");
    }
    for (const auto& t : table.trials) {
        refined += t.fine_alpha_dev <= t.coarse_alpha_dev ? 1 : 0;
    }
    const double frac = table.trials.empty() ? 0.0 : static_cast<double>(refined) / table.trials.size();
    const bool refined_ok = frac >= refined_bound;
    std::printf("fine alpha <= coarse alpha in %.1f%% of %zu trials (bound %.0f%%): %s\n", 100 * frac, table.trials.size(),
                100 * refined_bound, refined_ok ? "pass" : "FAIL");
    return ok && refined_ok ? kExitOk : kExitFailed;
}

int cmd_metrics(const std::string& a, const std::string& ref, const std::string& json_path) {
    const BayerImage x = load_raw(a), y = load_raw(ref);
    const QualityScore q = quality(x, y);
    if (json_path != "-") {
        std::printf("psnr %s dB  ssim %.6f  (peak %g DN)\n",
                    std::isinf(q.psnr) ? "inf" : std::to_string(q.psnr).c_str(), q.ssim, y.range());
    }
    if (!json_path.empty()) {
        nlohmann::json j{{"psnr", std::isinf(q.psnr) ? nlohmann::json("inf") : nlohmann::json(q.psnr)},
                         {"ssim", q.ssim},
                         {"peak", y.range()}};
        write_json(j, json_path);
    }
    return kExitOk;
}

int cmd_lut_build(const Globals& g, const std::string& out) {
    const PipelineConfig cfg = make_config(g);
    const BiasLut lut = build_lut(cfg.signal_grid, cfg.read_noise_grid);
    save_lut(lut, out);
    std::printf("wrote %s (%u x %u)\n", out.c_str(), lut.read_noise_grid().count, lut.signal_grid().count);
    return kExitOk;
}

int cmd_lut_inspect(const std::string& path, const std::vector<double>& probe) {
    const BiasLut lut = load_lut(path);
    const auto& s = lut.signal_grid();
    const auto& r = lut.read_noise_grid();
    std::printf("signal grid     %u nodes, 10^%g .. 10^%g\n", s.count, s.log10_min, s.log10_max);
    std::printf("read-noise grid %u nodes, 10^%g .. 10^%g\n", r.count, r.log10_min, r.log10_max);
    if (probe.size() == 2) {
        const double chi = probe[0], sh = probe[1];
        std::printf("lut(%g, %g) = %.6e  exact %.6e\n", chi, sh, lut.lookup(chi, sh), bias_function(chi, sh));
    }
    return kExitOk;
}

int cmd_preview(const std::string& input, const std::string& out) {
    write_png(preview_isp(load_raw(input)), out);
    std::printf("wrote %s\n", out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Blind raw image denoising: noise estimation, variance stabilization, denoising"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    app.add_option("--config", g.config, "key = value configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "RNG seed");
    app.add_option("--alpha", g.alpha, "noise gain override, normalized units (needs --sigma)");
    app.add_option("--sigma", g.sigma, "read noise override, normalized units (needs --alpha)");
    app.add_option("--sigma-mult", g.sigma_mult, "denoiser guidance multiplier (default 1.03)");
    app.add_option("--ats-quantile", g.ats_quantile, "force the flat-region quantile instead of the adaptive pick");
    app.add_option("--set", g.set, "extra configuration key=value (repeatable)");

    std::string input, out, report, json_path, mask_path, denoiser, external, csv, trials_csv, ref, kind = "natural";
    std::string camera = "phone", manifest, clean_dir;
    std::vector<std::string> rows;
    std::vector<double> grid, probe;
    bool iterative = false;
    int iso = 3200;
    std::size_t n = 1000000, trials = 1, count = 10, size = 1024;
    double alpha_bound = 0.05, sigma_bound = 0.10, refined_bound = 0.90;

    auto* est = app.add_subcommand("estimate", "estimate noise parameters of a raw frame");
    est->add_option("input", input, "input .raw16")->required();
    est->add_option("--json", json_path, "write the report as JSON ('-' for stdout)");
    est->add_option("--mask", mask_path, "write the fine flat-region mask as PNG");

    auto* den = app.add_subcommand("denoise", "blind two-stage denoising");
    den->add_option("input", input, "input .raw16")->required();
    den->add_option("--out", out, "output .raw16")->required();
    den->add_option("--report", report, "JSON report path (default <out>.report.json)");
    den->add_flag("--iterative", iterative, "iterative refinement in the final stage");
    den->add_option("--denoiser", denoiser, "dct, gaussian, identity or external");
    den->add_option("--external", external, "shell command speaking the plane exchange protocol");

    auto* sc = app.add_subcommand("scenes", "generate synthetic clean frames");
    sc->add_option("--out", out, "output directory")->required();
    sc->add_option("--count", count, "number of frames");
    sc->add_option("--kind", kind, "natural, flat or texture");
    sc->add_option("--size", size, "mosaic width and height");

    auto* sy = app.add_subcommand("synth", "build a noisy/clean suite from clean frames");
    sy->add_option("clean_dir", clean_dir, "directory of .raw16 or .png clean sources")->required();
    sy->add_option("--out", out, "output directory")->required();
    sy->add_option("--row", rows, "camera:iso preset (repeatable; default all)");

    auto* vv = app.add_subcommand("validate-vst", "Monte Carlo check of the expectation-matched transform");
    vv->add_option("--camera", camera, "preset camera");
    vv->add_option("--iso", iso, "preset ISO");
    vv->add_option("--n", n, "samples per signal level");
    vv->add_option("--chi", grid, "signal levels in electrons (default 1..500)");
    vv->add_option("--csv", csv, "per-level CSV");

    auto* ve = app.add_subcommand("validate-estimation", "coarse and fine estimates over a suite");
    ve->add_option("manifest", manifest, "suite manifest.csv")->required();
    ve->add_option("--trials", trials, "noise redraws per entry");
    ve->add_option("--csv", csv, "per-row CSV");
    ve->add_option("--trials-csv", trials_csv, "per-trial CSV");
    ve->add_option("--alpha-bound", alpha_bound, "fine alpha deviation bound per row");
    ve->add_option("--sigma-bound", sigma_bound, "fine sigma deviation bound per row");
    ve->add_option("--refined-bound", refined_bound, "minimum share of trials with fine <= coarse");

    auto* me = app.add_subcommand("metrics", "PSNR and SSIM of a frame against a reference");
    me->add_option("input", input, "frame to score")->required();
    me->add_option("reference", ref, "reference frame")->required();
    me->add_option("--json", json_path, "write scores as JSON ('-' for stdout)");

    auto* lut = app.add_subcommand("lut", "build or inspect the bias table cache");
    lut->require_subcommand(1);
    auto* lb = lut->add_subcommand("build", "compute and save the table");
    lb->add_option("--out", out, "cache file")->required();
    auto* li = lut->add_subcommand("inspect", "print grid and an optional probe");
    li->add_option("path", input, "cache file")->required();
    li->add_option("--probe", probe, "chi sigma_hat")->expected(2);

    auto* pv = app.add_subcommand("preview", "gamma-corrected half-resolution PNG");
    pv->add_option("input", input, "input .raw16")->required();
    pv->add_option("--out", out, "output .png")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        std::fputs(app.help().c_str(), stderr);
        return kExitUsage;
    }

    try {
        if (*est) return cmd_estimate(g, input, json_path, mask_path);
        if (*den) return cmd_denoise(g, input, out, report, iterative, denoiser, external);
        if (*sc) return cmd_scenes(g, out, count, kind, size);
        if (*sy) return cmd_synth(g, clean_dir, out, rows);
        if (*vv) return cmd_validate_vst(g, camera, iso, n, grid, csv);
        if (*ve) {
            return cmd_validate_estimation(g, manifest, trials, csv, trials_csv, alpha_bound, sigma_bound,
                                           refined_bound);
        }
        if (*me) return cmd_metrics(input, ref, json_path);
        if (*lb) return cmd_lut_build(g, out);
        if (*li) return cmd_lut_inspect(input, probe);
        if (*pv) return cmd_preview(input, out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n%s", e.what(), app.help().c_str());
        return kExitUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
