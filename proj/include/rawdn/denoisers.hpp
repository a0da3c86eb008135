// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rawdn/plane.hpp"

namespace rawdn {

/// The packed planes handed to a denoiser, in [0,1]-scaled transformed units.
using PlaneStack = std::vector<Plane>;

/// Noise level passed to a denoiser: sigma_snr (std of the scaled transformed image)
/// times a user multiplier.
struct DenoiserGuidance {
    double sigma_snr = 0.0;
    double multiplier = 1.03;

    DenoiserGuidance() = default;
    DenoiserGuidance(double sigma_snr, double multiplier = 1.03);

    double effective() const { return multiplier * sigma_snr; }
};

/// Below this noise level every built-in denoiser returns its input unchanged.
inline constexpr double kPassThroughSigma = 1e-4;

class Denoiser {
public:
    virtual ~Denoiser() = default;
    virtual std::string name() const = 0;

    /// sigma >= 0 in the units of the planes. Output has the input's shape.
    virtual PlaneStack denoise(const PlaneStack& x, double sigma) const = 0;

    /// Interface entry point; rejects a non-positive effective sigma.
    PlaneStack denoise(const PlaneStack& x, const DenoiserGuidance& g) const;
};

class IdentityDenoiser final : public Denoiser {
public:
    std::string name() const override { return "identity"; }
    PlaneStack denoise(const PlaneStack& x, double sigma) const override;
    using Denoiser::denoise;
};

/// Separable Gaussian blur, kernel std = scale * sigma pixels.
class GaussianDenoiser final : public Denoiser {
public:
    explicit GaussianDenoiser(double scale = 16.0);
    std::string name() const override { return "gaussian"; }
    PlaneStack denoise(const PlaneStack& x, double sigma) const override;
    using Denoiser::denoise;

    double scale() const { return scale_; }

private:
    double scale_;
};

struct DctOptions {
    double threshold = 3.0;   // hard threshold in units of sigma
    std::size_t stride = 4;          // hard-threshold pass
    bool wiener = true;              // second pass using the first as pilot
    std::size_t wiener_stride = 2;
};

/// Sliding 8x8 orthonormal DCT, hard thresholding (DC always kept), uniform overlap-add.
class DctDenoiser final : public Denoiser {
public:
    explicit DctDenoiser(DctOptions opt = {});
    std::string name() const override { return "dct"; }
    PlaneStack denoise(const PlaneStack& x, double sigma) const override;
    using Denoiser::denoise;

    const DctOptions& options() const { return opt_; }

private:
    DctOptions opt_;
};

/// Runs `command` through /bin/sh once per call and exchanges planes over stdin/stdout.
/// Request and response: "YDNZ", u32 version, u32 channels, u32 height, u32 width,
/// f32 sigma, then channels*height*width f32, all little-endian.
class ExternalDenoiser final : public Denoiser {
public:
    static constexpr std::uint32_t kVersion = 1;

    explicit ExternalDenoiser(std::string command);
    std::string name() const override { return "external"; }
    PlaneStack denoise(const PlaneStack& x, double sigma) const override;
    using Denoiser::denoise;

    const std::string& command() const { return command_; }

private:
    std::string command_;
};

/// Builds a denoiser by name: identity, gaussian, dct, or external (needs command).
std::unique_ptr<Denoiser> make_denoiser(const std::string& name, const std::string& command = {});

struct IterConfig {
    std::size_t steps = 10;  // T
    double eta = 0.8;
    /// Decay ratio; when unset it is derived from the final target level.
    std::optional<double> gamma;
    std::optional<double> target_sigma;
    double target_ratio = 5.0 / 32.87;  // target / sigma_snr when target_sigma is unset
    std::uint64_t seed = 0;

    void validate() const;
    double resolve_gamma(double sigma_snr) const;
};

struct IterTrace {
    double gamma = 1.0;
    std::vector<double> sigmas;  // level passed to each denoiser call, in call order
};

/// DDIM-style refinement. x0 = D(xT, s); for t = T-1..1: eps = g^(T-t-1) (xT - x0),
/// eps = eta eps + sqrt(1 - eta^2) s_t z, x_t = x0 + g eps, s_t = g^(T-t) s, x0 = D(x_t, s_t).
/// s is the effective guidance level.
PlaneStack iterative_denoise(const PlaneStack& xT, const Denoiser& d, const DenoiserGuidance& g,
                             const IterConfig& cfg, IterTrace* trace = nullptr);

/// Noise variance the denoiser keeps on a flat field, relative to the input noise variance,
/// measured through windowed p x p variances on a synthetic constant image at the given guidance.
double residual_noise_ratio(const Denoiser& d, const DenoiserGuidance& g, std::size_t p, std::uint64_t seed = 0);

}  // namespace rawdn
