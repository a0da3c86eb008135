// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/harness.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "rawdn/metrics.hpp"

namespace fs = std::filesystem;

namespace rawdn {

namespace {

// Runs fn(i) for i in [0, n) on up to hardware_concurrency threads. Cells are independent and
// seeded by index, so results do not depend on the thread count. The first exception wins.
template <class Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(n, std::max(1u, std::thread::hardware_concurrency()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex mutex;
    std::size_t next = 0;
    std::exception_ptr error;
    auto work = [&] {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard lock(mutex);
                if (next >= n || error) return;
                i = next++;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

const CameraPreset& find_preset(std::string_view camera, int iso) {
    for (const auto& p : kCameraPresets) {
        if (p.camera == camera && p.iso == iso) return p;
    }
    throw ConfigError("no noise preset for " + std::string(camera) + " ISO " + std::to_string(iso));
}

BayerImage add_noise(const BayerImage& clean, const NoiseParams& params, std::uint64_t seed) {
    const double range = clean.range();
    Plane unit(clean.width(), clean.height());
    auto src = clean.data.values();
    auto dst = unit.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::max(0.0, (src[i] - clean.black_level) / range);
    Plane noisy = sample_noisy(unit, params, seed);
    for (double& v : noisy.values()) v = clean.black_level + range * v;
    return BayerImage(std::move(noisy), clean.cfa, clean.black_level, clean.white_level, clean.tag);
}

BayerImage quantize(const BayerImage& img) {
    BayerImage out = img;
    for (double& v : out.data.values()) v = std::clamp(std::round(v), 0.0, 65535.0);
    return out;
}

namespace {

std::uint64_t entry_seed(std::uint64_t seed, std::size_t row, std::size_t image) {
    CounterRng rng(seed, (static_cast<std::uint64_t>(row) << 32) | image);
    return rng.next_u64();
}

}  // namespace

std::vector<SuiteEntry> synthesize_suite(const std::vector<BayerImage>& cleans, std::span<const CameraPreset> rows,
                                         std::uint64_t seed) {
    if (cleans.empty()) throw ConfigError("no clean images for the synthetic suite");
    std::vector<SuiteEntry> out;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t i = 0; i < cleans.size(); ++i) {
            SuiteEntry e;
            e.image = cleans[i].tag.empty() ? "image" + std::to_string(i) : cleans[i].tag;
            e.preset = rows[r];
            e.seed = entry_seed(seed, r, i);
            e.clean = quantize(cleans[i]);
            e.noisy = quantize(add_noise(e.clean, rows[r].params(), e.seed));
            out.push_back(std::move(e));
        }
    }
    return out;
}

namespace {

BayerImage load_png_source(const fs::path& path) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&img, path.c_str())) {
        throw FormatError("cannot read PNG " + path.string() + ": " + img.message);
    }
    img.format = PNG_FORMAT_LINEAR_Y;
    std::vector<std::uint16_t> px(PNG_IMAGE_SIZE(img) / sizeof(std::uint16_t));
    if (!png_image_finish_read(&img, nullptr, px.data(), 0, nullptr)) {
        throw FormatError("cannot decode PNG " + path.string() + ": " + img.message);
    }
    const std::size_t w = img.width & ~1u, h = img.height & ~1u;
    if (w < 2 || h < 2) throw DimensionError("PNG source too small: " + path.string());
    constexpr double kBlack = 512.0, kWhite = 16383.0;
    Plane data(w, h);
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            const double lin = px[r * img.width + c] / 65535.0;
            data(r, c) = kBlack + (kWhite - kBlack) * (0.02 + 0.88 * lin);
        }
    }
    return BayerImage(std::move(data), Cfa::RGGB, kBlack, kWhite, path.stem().string());
}

}  // namespace

std::vector<BayerImage> load_clean_dir(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw ConfigError("clean image directory not found: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto ext = e.path().extension();
        if (e.is_regular_file() && (ext == ".raw16" || ext == ".png")) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw ConfigError("no .raw16 or .png images in " + dir.string());
    std::vector<BayerImage> out;
    for (const auto& f : files) {
        if (f.extension() == ".png") {
            out.push_back(load_png_source(f));
        } else {
            BayerImage img = load_raw(f);
            img.tag = f.stem().string();
            out.push_back(std::move(img));
        }
    }
    return out;
}

fs::path make_synthetic_suite(const fs::path& clean_dir, std::span<const CameraPreset> rows, std::uint64_t seed,
                              const fs::path& out_dir) {
    const auto suite = synthesize_suite(load_clean_dir(clean_dir), rows, seed);
    fs::create_directories(out_dir);
    const fs::path manifest = out_dir / "manifest.csv";
    std::ofstream csv(manifest);
    if (!csv) throw FormatError("cannot write " + manifest.string());
    csv << "image,camera,iso,alpha,sigma,seed,clean,noisy\n" << std::setprecision(17);
    for (const auto& e : suite) {
        const std::string sub = std::string(e.preset.camera) + "_iso" + std::to_string(e.preset.iso);
        fs::create_directories(out_dir / sub);
        const std::string clean_rel = sub + "/" + e.image + "_clean.raw16";
        const std::string noisy_rel = sub + "/" + e.image + "_noisy.raw16";
        BayerImage clean = e.clean, noisy = e.noisy;
        noisy.tag = sub;
        save_raw(clean, out_dir / clean_rel);
        save_raw(noisy, out_dir / noisy_rel);
        csv << e.image << ',' << e.preset.camera << ',' << e.preset.iso << ',' << e.preset.alpha << ','
            << e.preset.sigma << ',' << e.seed << ',' << clean_rel << ',' << noisy_rel << '\n';
    }
    return manifest;
}

std::vector<SuiteEntry> load_suite(const fs::path& manifest) {
    std::ifstream in(manifest);
    if (!in) throw ConfigError("cannot open suite manifest " + manifest.string());
    std::string line;
    std::getline(in, line);
    if (line != "image,camera,iso,alpha,sigma,seed,clean,noisy") throw FormatError("unexpected manifest header");
    const fs::path base = manifest.parent_path();
    std::vector<SuiteEntry> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 8) throw FormatError("malformed manifest line: " + line);
        SuiteEntry e;
        e.image = f[0];
        e.preset = find_preset(f[1], std::stoi(f[2]));
        e.seed = std::stoull(f[5]);
        e.clean = load_raw(base / f[6]);
        e.noisy = load_raw(base / f[7]);
        out.push_back(std::move(e));
    }
    return out;
}

// ---------------------------------------------------------------------------------------

std::vector<double> default_vst_grid() {
    return {1, 2, 3, 5, 7, 10, 15, 20, 30, 40, 50, 70, 100, 150, 200, 300, 400, 500};
}

namespace {

// Running mean and variance shifted by the first value to keep cancellation small.
struct Moments {
    double shift = 0.0, s1 = 0.0, s2 = 0.0;
    std::size_t n = 0;
    void add(double x) {
        if (n == 0) shift = x;
        const double d = x - shift;
        s1 += d;
        s2 += d * d;
        ++n;
    }
    double mean() const { return shift + s1 / static_cast<double>(n); }
    double variance() const {
        const double m = s1 / static_cast<double>(n);
        return std::max(0.0, (s2 - s1 * m) / static_cast<double>(n - 1));
    }
    double std() const { return std::sqrt(variance()); }
};

}  // namespace

std::vector<VstRecord> validate_vst(double sigma_hat, std::span<const double> chis, std::size_t n, std::uint64_t seed,
                                    const BiasLut& lut) {
    if (n < 2) throw DomainError("validate_vst needs at least two samples");
    std::vector<VstRecord> out(chis.size());
    parallel_for(chis.size(), [&](std::size_t i) {
        VstRecord& rec = out[i];
        rec.chi = chis[i];
        rec.sigma_hat = sigma_hat;
        rec.n = n;
        rec.exact_bias = bias_function(rec.chi, sigma_hat);
        const double f_chi = gat(rec.chi, sigma_hat);
        CounterRng rng(seed, i);
        Moments corr, fz, o;
        for (std::size_t k = 0; k < n; ++k) {
            const double z = static_cast<double>(rng.poisson(rec.chi)) + sigma_hat * rng.normal();
            const double f = gat(z, sigma_hat);
            const double c = lut.lookup(std::max(z, 0.0), sigma_hat);
            corr.add(c);
            fz.add(f);
            o.add(f - c);
        }
        const double e = std::abs(rec.exact_bias);
        const double sn = std::sqrt(static_cast<double>(n));
        rec.mean_correction = corr.mean();
        rec.residual = std::abs(rec.mean_correction - rec.exact_bias) / e;
        rec.residual_se = corr.std() / sn / e;
        rec.residual_direct = std::abs(o.mean() - f_chi) / e;
        rec.residual_direct_se = o.std() / sn / e;
        rec.residual_signal = std::abs(rec.mean_correction - rec.exact_bias) / f_chi;
        rec.added_std = corr.std();
        rec.std_ratio = o.std() / fz.std();
        rec.low_confidence = n < 100000 || 3.0 * rec.residual_se > kResidualBound;
        rec.pass = rec.added_std <= kAddedStdBound && rec.residual <= kResidualBound;
    });
    return out;
}

void write_vst_csv(const std::vector<VstRecord>& records, const fs::path& path) {
    std::ofstream csv(path);
    if (!csv) throw FormatError("cannot write " + path.string());
    csv << "chi,sigma_hat,n,exact_bias,mean_correction,residual,residual_se,residual_direct,residual_direct_se,"
           "residual_signal,added_std,std_ratio,residual_bound,added_std_bound,low_confidence,pass\n"
        << std::setprecision(10);
    for (const auto& r : records) {
        csv << r.chi << ',' << r.sigma_hat << ',' << r.n << ',' << r.exact_bias << ',' << r.mean_correction << ','
            << r.residual << ',' << r.residual_se << ',' << r.residual_direct << ',' << r.residual_direct_se << ','
            << r.residual_signal << ',' << r.added_std << ',' << r.std_ratio << ',' << kResidualBound << ','
            << kAddedStdBound << ',' << (r.low_confidence ? 1 : 0) << ',' << (r.pass ? 1 : 0) << '\n';
    }
}

// ---------------------------------------------------------------------------------------

namespace {

double deviation(double est, double truth) { return std::abs(est - truth) / truth; }

bool same_preset(const CameraPreset& a, const CameraPreset& b) { return a.camera == b.camera && a.iso == b.iso; }

}  // namespace

EstimationTable validate_estimation(const std::vector<SuiteEntry>& suite, std::size_t trials,
                                    const PipelineConfig& cfg) {
    if (trials == 0) throw DomainError("validate_estimation needs at least one trial");
    auto denoiser = cfg.make_denoiser();
    EstimationTable table;
    table.trials.resize(suite.size() * trials);
    parallel_for(table.trials.size(), [&](std::size_t cell) {
        const SuiteEntry& e = suite[cell / trials];
        const std::size_t t = cell % trials;
        {
            const BayerImage noisy =
                t == 0 ? e.noisy : quantize(add_noise(e.clean, e.preset.params(), entry_seed(e.seed, t, 0)));
            const EstimationReport rep = run_cne(noisy, *denoiser, cfg);
            EstimationTrial& tr = table.trials[cell];
            tr.image = e.image;
            tr.preset = e.preset;
            tr.trial = t;
            tr.coarse = rep.coarse->params;
            tr.fine = rep.fine->params;
            tr.coarse_alpha_dev = deviation(tr.coarse.alpha, e.preset.alpha);
            tr.coarse_sigma_dev = deviation(tr.coarse.sigma, e.preset.sigma);
            tr.fine_alpha_dev = deviation(tr.fine.alpha, e.preset.alpha);
            tr.fine_sigma_dev = deviation(tr.fine.sigma, e.preset.sigma);
            tr.fine_rmse = rep.fine->samples.empty() ? 0.0 : residual_stats(rep.fine->samples, tr.fine).rmse;
            tr.warnings = rep.warnings.size();
        }
    });
    for (const auto& tr : table.trials) {
        auto it = std::find_if(table.rows.begin(), table.rows.end(),
                               [&](const EstimationRow& r) { return same_preset(r.preset, tr.preset); });
        if (it == table.rows.end()) {
            table.rows.push_back({});
            it = std::prev(table.rows.end());
            it->preset = tr.preset;
            it->mean_coarse.alpha = 0.0;  // accumulated below, averaged afterwards
            it->mean_fine.alpha = 0.0;
        }
        it->trials += 1;
        it->mean_coarse.alpha += tr.coarse.alpha;
        it->mean_coarse.sigma += tr.coarse.sigma;
        it->mean_fine.alpha += tr.fine.alpha;
        it->mean_fine.sigma += tr.fine.sigma;
        it->coarse_alpha_dev += tr.coarse_alpha_dev;
        it->coarse_sigma_dev += tr.coarse_sigma_dev;
        it->fine_alpha_dev += tr.fine_alpha_dev;
        it->fine_sigma_dev += tr.fine_sigma_dev;
        it->refined_fraction += tr.fine_alpha_dev <= tr.coarse_alpha_dev ? 1.0 : 0.0;
    }
    for (auto& r : table.rows) {
        const double k = static_cast<double>(r.trials);
        r.mean_coarse.alpha /= k;
        r.mean_coarse.sigma /= k;
        r.mean_fine.alpha /= k;
        r.mean_fine.sigma /= k;
        r.coarse_alpha_dev /= k;
        r.coarse_sigma_dev /= k;
        r.fine_alpha_dev /= k;
        r.fine_sigma_dev /= k;
        r.refined_fraction /= k;
    }
    return table;
}

void write_estimation_csv(const EstimationTable& table, const fs::path& path) {
    std::ofstream csv(path);
    if (!csv) throw FormatError("cannot write " + path.string());
    csv << "camera,iso,true_alpha,true_sigma,trials,coarse_alpha,coarse_sigma,coarse_alpha_dev_pct,"
           "coarse_sigma_dev_pct,fine_alpha,fine_sigma,fine_alpha_dev_pct,fine_sigma_dev_pct,refined_fraction\n"
        << std::setprecision(6);
    for (const auto& r : table.rows) {
        csv << r.preset.camera << ',' << r.preset.iso << ',' << r.preset.alpha << ',' << r.preset.sigma << ','
            << r.trials << ',' << r.mean_coarse.alpha << ',' << r.mean_coarse.sigma << ',' << 100 * r.coarse_alpha_dev
            << ',' << 100 * r.coarse_sigma_dev << ',' << r.mean_fine.alpha << ',' << r.mean_fine.sigma << ','
            << 100 * r.fine_alpha_dev << ',' << 100 * r.fine_sigma_dev << ',' << r.refined_fraction << '\n';
    }
}

void write_estimation_trials_csv(const EstimationTable& table, const fs::path& path) {
    std::ofstream csv(path);
    if (!csv) throw FormatError("cannot write " + path.string());
    csv << "image,camera,iso,trial,coarse_alpha,coarse_sigma,fine_alpha,fine_sigma,coarse_alpha_dev,"
           "coarse_sigma_dev,fine_alpha_dev,fine_sigma_dev,fine_rmse,warnings\n"
        << std::setprecision(8);
    for (const auto& t : table.trials) {
        csv << t.image << ',' << t.preset.camera << ',' << t.preset.iso << ',' << t.trial << ',' << t.coarse.alpha
            << ',' << t.coarse.sigma << ',' << t.fine.alpha << ',' << t.fine.sigma << ',' << t.coarse_alpha_dev << ','
            << t.coarse_sigma_dev << ',' << t.fine_alpha_dev << ',' << t.fine_sigma_dev << ',' << t.fine_rmse << ','
            << t.warnings << '\n';
    }
}

std::vector<GapRecord> compare_blind_oracle(const std::vector<SuiteEntry>& suite, const PipelineConfig& cfg) {
    std::vector<GapRecord> out(suite.size());
    parallel_for(suite.size(), [&](std::size_t i) {
        const SuiteEntry& e = suite[i];
        GapRecord& g = out[i];
        g.image = e.image;
        g.preset = e.preset;
        g.psnr_noisy = psnr(e.noisy, e.clean);
        PipelineConfig blind = cfg;
        blind.override_alpha.reset();
        blind.override_sigma.reset();
        g.psnr_blind = psnr(run_pipeline(e.noisy, blind).denoised, e.clean);
        PipelineConfig oracle = cfg;
        oracle.set_noise_override(e.preset.params());
        g.psnr_oracle = psnr(run_pipeline(e.noisy, oracle).denoised, e.clean);
    });
    return out;
}

}  // namespace rawdn
