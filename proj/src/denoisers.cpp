// Copyright (C) 2026 The rawdn Authors
// SPDX-License-Identifier: Apache-2.0

#include "rawdn/denoisers.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fcntl.h>
#include <numbers>

#include "rawdn/filters.hpp"
#include "rawdn/noisemodel.hpp"

namespace rawdn {

DenoiserGuidance::DenoiserGuidance(double sigma_snr_, double multiplier_)
    : sigma_snr(sigma_snr_), multiplier(multiplier_) {
    if (!(sigma_snr > 0.0) || !std::isfinite(sigma_snr)) throw DomainError("sigma_snr must be positive");
    if (!(multiplier > 0.0) || !std::isfinite(multiplier)) throw DomainError("sigma multiplier must be positive");
}

PlaneStack Denoiser::denoise(const PlaneStack& x, const DenoiserGuidance& g) const {
    const double s = g.effective();
    if (!(s > 0.0)) throw DomainError("denoiser guidance must be positive");
    return denoise(x, s);
}

namespace {

void check_stack(const PlaneStack& x, double sigma) {
    if (x.empty()) throw DimensionError("empty plane stack");
    for (const auto& p : x) {
        if (!p.same_shape(x[0])) throw DimensionError("plane shapes differ");
    }
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw DomainError("denoiser sigma must be non-negative");
}

}  // namespace

PlaneStack IdentityDenoiser::denoise(const PlaneStack& x, double sigma) const {
    check_stack(x, sigma);
    return x;
}

// ---------------------------------------------------------------------------------------

GaussianDenoiser::GaussianDenoiser(double scale) : scale_(scale) {
    if (!(scale > 0.0)) throw DomainError("gaussian scale must be positive");
}

namespace {

Plane blur_rows(const Plane& src, const std::vector<double>& k, bool horizontal) {
    const auto radius = static_cast<std::ptrdiff_t>(k.size() / 2);
    const auto w = static_cast<std::ptrdiff_t>(src.width());
    const auto h = static_cast<std::ptrdiff_t>(src.height());
    Plane out(src.width(), src.height());
    for (std::ptrdiff_t r = 0; r < h; ++r) {
        for (std::ptrdiff_t c = 0; c < w; ++c) {
            double acc = 0.0;
            for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
                const double v = horizontal ? src(static_cast<std::size_t>(r), static_cast<std::size_t>(reflect101(c + j, w)))
                                            : src(static_cast<std::size_t>(reflect101(r + j, h)), static_cast<std::size_t>(c));
                acc += k[static_cast<std::size_t>(j + radius)] * v;
            }
            out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = acc;
        }
    }
    return out;
}

}  // namespace

PlaneStack GaussianDenoiser::denoise(const PlaneStack& x, double sigma) const {
    check_stack(x, sigma);
    if (sigma < kPassThroughSigma) return x;
    const double s = scale_ * sigma;
    const auto radius = static_cast<std::size_t>(std::ceil(3.0 * s));
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double d = static_cast<double>(i) - static_cast<double>(radius);
        k[i] = std::exp(-0.5 * d * d / (s * s));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    PlaneStack out;
    for (const auto& p : x) out.push_back(blur_rows(blur_rows(p, k, true), k, false));
    return out;
}

// ---------------------------------------------------------------------------------------

namespace {

constexpr std::size_t kB = 8;
using Block = std::array<double, kB * kB>;

const Block& dct_matrix() {
    static const Block m = [] {
        Block c{};
        for (std::size_t k = 0; k < kB; ++k) {
            const double a = k == 0 ? std::sqrt(1.0 / kB) : std::sqrt(2.0 / kB);
            for (std::size_t n = 0; n < kB; ++n) {
                c[k * kB + n] = a * std::cos(std::numbers::pi * (2.0 * n + 1.0) * k / (2.0 * kB));
            }
        }
        return c;
    }();
    return m;
}

// out = C in C^T
void forward_dct(const Block& in, Block& out) {
    const Block& c = dct_matrix();
    Block t{};
    for (std::size_t i = 0; i < kB; ++i)
        for (std::size_t j = 0; j < kB; ++j) {
            double acc = 0.0;
            for (std::size_t n = 0; n < kB; ++n) acc += c[i * kB + n] * in[n * kB + j];
            t[i * kB + j] = acc;
        }
    for (std::size_t i = 0; i < kB; ++i)
        for (std::size_t j = 0; j < kB; ++j) {
            double acc = 0.0;
            for (std::size_t n = 0; n < kB; ++n) acc += t[i * kB + n] * c[j * kB + n];
            out[i * kB + j] = acc;
        }
}

// out = C^T in C
void inverse_dct(const Block& in, Block& out) {
    const Block& c = dct_matrix();
    Block t{};
    for (std::size_t i = 0; i < kB; ++i)
        for (std::size_t j = 0; j < kB; ++j) {
            double acc = 0.0;
            for (std::size_t n = 0; n < kB; ++n) acc += c[n * kB + i] * in[n * kB + j];
            t[i * kB + j] = acc;
        }
    for (std::size_t i = 0; i < kB; ++i)
        for (std::size_t j = 0; j < kB; ++j) {
            double acc = 0.0;
            for (std::size_t n = 0; n < kB; ++n) acc += t[i * kB + n] * c[n * kB + j];
            out[i * kB + j] = acc;
        }
}

std::vector<std::size_t> block_starts(std::size_t n, std::size_t stride) {
    std::vector<std::size_t> s;
    for (std::size_t i = 0; i + kB <= n; i += stride) s.push_back(i);
    if (s.back() != n - kB) s.push_back(n - kB);
    return s;
}

void load_block(const Plane& p, std::size_t r0, std::size_t c0, Block& b) {
    for (std::size_t i = 0; i < kB; ++i)
        for (std::size_t j = 0; j < kB; ++j) b[i * kB + j] = p(r0 + i, c0 + j);
}

// Applies `shrink` to the coefficients of every block and averages the overlapping results.
template <typename Shrink>
Plane block_filter(const Plane& src, std::size_t stride, Shrink&& shrink) {
    Plane acc(src.width(), src.height());
    Plane count(src.width(), src.height());
    Block b, coef, rec;
    for (std::size_t r0 : block_starts(src.height(), stride)) {
        for (std::size_t c0 : block_starts(src.width(), stride)) {
            load_block(src, r0, c0, b);
            forward_dct(b, coef);
            shrink(r0, c0, coef);
            inverse_dct(coef, rec);
            for (std::size_t i = 0; i < kB; ++i)
                for (std::size_t j = 0; j < kB; ++j) {
                    acc(r0 + i, c0 + j) += rec[i * kB + j];
                    count(r0 + i, c0 + j) += 1.0;
                }
        }
    }
    auto a = acc.values();
    auto n = count.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] /= n[i];
    return acc;
}

}  // namespace

DctDenoiser::DctDenoiser(DctOptions opt) : opt_(opt) {
    if (opt_.stride == 0 || opt_.stride > kB || opt_.wiener_stride == 0 || opt_.wiener_stride > kB) {
        throw DomainError("DCT strides must lie in [1, 8]");
    }
    if (!(opt_.threshold >= 0.0)) throw DomainError("DCT threshold must be non-negative");
}

PlaneStack DctDenoiser::denoise(const PlaneStack& x, double sigma) const {
    check_stack(x, sigma);
    if (sigma < kPassThroughSigma) return x;
    if (x[0].width() < kB || x[0].height() < kB) throw DimensionError("DCT denoiser needs planes of at least 8x8");
    const double thr = opt_.threshold * sigma;
    const double var = sigma * sigma;
    PlaneStack out;
    for (const auto& p : x) {
        Plane pilot = block_filter(p, opt_.stride, [&](std::size_t, std::size_t, Block& c) {
            for (std::size_t k = 1; k < c.size(); ++k) {
                if (std::abs(c[k]) < thr) c[k] = 0.0;
            }
        });
        if (!opt_.wiener) {
            out.push_back(std::move(pilot));
            continue;
        }
        Block pb, pc;
        out.push_back(block_filter(p, opt_.wiener_stride, [&](std::size_t r0, std::size_t c0, Block& c) {
            load_block(pilot, r0, c0, pb);
            forward_dct(pb, pc);
            for (std::size_t k = 1; k < c.size(); ++k) {  // DC kept, as in the pilot pass
                const double e = pc[k] * pc[k];
                c[k] *= e / (e + var);
            }
        }));
    }
    return out;
}

// ---------------------------------------------------------------------------------------

ExternalDenoiser::ExternalDenoiser(std::string command) : command_(std::move(command)) {
    if (command_.empty()) throw ConfigError("external denoiser needs a command");
}

namespace {

constexpr std::array<char, 4> kMagic = {'Y', 'D', 'N', 'Z'};
constexpr std::size_t kHeaderBytes = 24;

void put_u32(std::vector<char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    return v;
}

void put_f32(std::vector<char>& b, float f) {
    std::uint32_t v;
    std::memcpy(&v, &f, 4);
    put_u32(b, v);
}

float get_f32(const char* p) {
    const std::uint32_t v = get_u32(p);
    float f;
    std::memcpy(&f, &v, 4);
    return f;
}

struct Fd {
    int fd = -1;
    ~Fd() { reset(); }
    void reset() {
        if (fd >= 0) ::close(fd);
        fd = -1;
    }
};

struct ProcessResult {
    std::vector<char> out;
    std::string err;
    int status = 0;
};

// SIGPIPE is held pending while we talk to the child so a process that exits early
// surfaces as EPIPE instead of killing us.
class SigpipeGuard {
public:
    SigpipeGuard() {
        sigemptyset(&set_);
        sigaddset(&set_, SIGPIPE);
        pthread_sigmask(SIG_BLOCK, &set_, &old_);
    }
    ~SigpipeGuard() {
        timespec zero{0, 0};
        while (sigtimedwait(&set_, nullptr, &zero) > 0) {
        }
        pthread_sigmask(SIG_SETMASK, &old_, nullptr);
    }

private:
    sigset_t set_, old_;
};

ProcessResult run_process(const std::string& command, const std::vector<char>& input) {
    int in_pipe[2], out_pipe[2], err_pipe[2];
    if (::pipe(in_pipe) != 0) throw BridgeError("pipe failed");
    Fd in_r{in_pipe[0]}, in_w{in_pipe[1]};
    if (::pipe(out_pipe) != 0) throw BridgeError("pipe failed");
    Fd out_r{out_pipe[0]}, out_w{out_pipe[1]};
    if (::pipe(err_pipe) != 0) throw BridgeError("pipe failed");
    Fd err_r{err_pipe[0]}, err_w{err_pipe[1]};

    SigpipeGuard guard;
    const pid_t pid = ::fork();
    if (pid < 0) throw BridgeError("fork failed");
    if (pid == 0) {
        ::dup2(in_r.fd, 0);
        ::dup2(out_w.fd, 1);
        ::dup2(err_w.fd, 2);
        for (int fd : {in_r.fd, in_w.fd, out_r.fd, out_w.fd, err_r.fd, err_w.fd}) ::close(fd);
        sigset_t none;
        sigemptyset(&none);
        pthread_sigmask(SIG_SETMASK, &none, nullptr);
        ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    in_r.reset();
    out_w.reset();
    err_w.reset();
    ::fcntl(in_w.fd, F_SETFL, ::fcntl(in_w.fd, F_GETFL) | O_NONBLOCK);

    ProcessResult res;
    std::size_t written = 0;
    if (input.empty()) in_w.reset();
    char buf[65536];
    while (out_r.fd >= 0 || err_r.fd >= 0 || in_w.fd >= 0) {
        std::vector<pollfd> fds;
        if (in_w.fd >= 0) fds.push_back({in_w.fd, POLLOUT, 0});
        if (out_r.fd >= 0) fds.push_back({out_r.fd, POLLIN, 0});
        if (err_r.fd >= 0) fds.push_back({err_r.fd, POLLIN, 0});
        if (::poll(fds.data(), fds.size(), -1) < 0) {
            if (errno == EINTR) continue;
            break;
        }
        for (const auto& p : fds) {
            if (p.revents == 0) continue;
            if (p.fd == in_w.fd) {
                const ssize_t n = ::write(in_w.fd, input.data() + written, input.size() - written);
                if (n > 0) written += static_cast<std::size_t>(n);
                if ((n < 0 && errno != EAGAIN && errno != EINTR) || written == input.size()) in_w.reset();
            } else {
                Fd& src = p.fd == out_r.fd ? out_r : err_r;
                const ssize_t n = ::read(src.fd, buf, sizeof buf);
                if (n > 0) {
                    if (&src == &out_r) res.out.insert(res.out.end(), buf, buf + n);
                    else res.err.append(buf, static_cast<std::size_t>(n));
                } else if (n == 0 || (errno != EAGAIN && errno != EINTR)) {
                    src.reset();
                }
            }
        }
    }
    while (::waitpid(pid, &res.status, 0) < 0 && errno == EINTR) {
    }
    return res;
}

}  // namespace

PlaneStack ExternalDenoiser::denoise(const PlaneStack& x, double sigma) const {
    check_stack(x, sigma);
    const auto channels = static_cast<std::uint32_t>(x.size());
    const auto h = static_cast<std::uint32_t>(x[0].height());
    const auto w = static_cast<std::uint32_t>(x[0].width());
    const auto fsigma = static_cast<float>(sigma);

    std::vector<char> req;
    req.reserve(kHeaderBytes + 4 * x.size() * x[0].size());
    req.insert(req.end(), kMagic.begin(), kMagic.end());
    put_u32(req, kVersion);
    put_u32(req, channels);
    put_u32(req, h);
    put_u32(req, w);
    put_f32(req, fsigma);
    for (const auto& p : x)
        for (double v : p.values()) put_f32(req, static_cast<float>(v));

    const ProcessResult res = run_process(command_, req);
    if (!WIFEXITED(res.status) || WEXITSTATUS(res.status) != 0) {
        const int code = WIFEXITED(res.status) ? WEXITSTATUS(res.status) : -1;
        throw BridgeError("external denoiser exited with status " + std::to_string(code) + ": " + res.err);
    }
    const auto& r = res.out;
    if (r.size() < kHeaderBytes || !std::equal(kMagic.begin(), kMagic.end(), r.begin())) {
        throw BridgeError("external denoiser protocol error: bad or missing header");
    }
    if (get_u32(r.data() + 4) != kVersion) throw BridgeError("external denoiser protocol error: version mismatch");
    if (get_u32(r.data() + 8) != channels || get_u32(r.data() + 12) != h || get_u32(r.data() + 16) != w) {
        throw BridgeError("external denoiser protocol error: shape mismatch");
    }
    if (get_f32(r.data() + 20) != fsigma) throw BridgeError("external denoiser protocol error: sigma not echoed");
    const std::size_t payload = 4ull * channels * h * w;
    if (r.size() != kHeaderBytes + payload) throw BridgeError("external denoiser protocol error: payload size");

    PlaneStack out;
    const char* p = r.data() + kHeaderBytes;
    for (std::uint32_t ch = 0; ch < channels; ++ch) {
        Plane pl(w, h);
        for (double& v : pl.values()) {
            v = get_f32(p);
            p += 4;
        }
        out.push_back(std::move(pl));
    }
    return out;
}

std::unique_ptr<Denoiser> make_denoiser(const std::string& name, const std::string& command) {
    if (name == "identity") return std::make_unique<IdentityDenoiser>();
    if (name == "gaussian") return std::make_unique<GaussianDenoiser>();
    if (name == "dct") return std::make_unique<DctDenoiser>();
    if (name == "external") return std::make_unique<ExternalDenoiser>(command);
    throw ConfigError("unknown denoiser: " + name);
}

// ---------------------------------------------------------------------------------------

void IterConfig::validate() const {
    if (steps < 1) throw ConfigError("iteration count must be at least 1");
    if (!(eta >= 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in [0, 1]");
    if (gamma && !(*gamma > 0.0 && *gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
    if (target_sigma && !(*target_sigma > 0.0)) throw ConfigError("target sigma must be positive");
    if (!gamma && !target_sigma && !(target_ratio > 0.0 && target_ratio < 1.0)) {
        throw ConfigError("target ratio must lie in (0, 1)");
    }
}

double IterConfig::resolve_gamma(double sigma_snr) const {
    validate();
    if (gamma) return *gamma;
    if (steps < 2) return 1.0;
    const double target = target_sigma ? *target_sigma : target_ratio * sigma_snr;
    if (!(target < sigma_snr)) throw ConfigError("target sigma must be below sigma_snr");
    return std::pow(target / sigma_snr, 1.0 / static_cast<double>(steps - 1));
}

PlaneStack iterative_denoise(const PlaneStack& xT, const Denoiser& d, const DenoiserGuidance& g,
                             const IterConfig& cfg, IterTrace* trace) {
    const double s = g.effective();
    if (!(s > 0.0)) throw DomainError("denoiser guidance must be positive");
    const double gamma = cfg.resolve_gamma(s);
    const std::size_t T = cfg.steps;
    if (trace) {
        trace->gamma = gamma;
        trace->sigmas.assign(1, s);
    }

    PlaneStack x0 = d.denoise(xT, s);
    const double mix = std::sqrt(std::max(0.0, 1.0 - cfg.eta * cfg.eta));
    double sigma_t = s;  // the first mix-up uses sigma_snr
    for (std::size_t t = T - 1; t >= 1; --t) {
        const double decay = std::pow(gamma, static_cast<double>(T - t - 1));
        PlaneStack xt = x0;
        for (std::size_t p = 0; p < xT.size(); ++p) {
            for (std::size_t r = 0; r < xT[p].height(); ++r) {
                CounterRng rng(cfg.seed, (static_cast<std::uint64_t>(t) << 48) ^ (static_cast<std::uint64_t>(p) << 32) ^ r);
                auto a = xT[p].row(r);
                auto b = x0[p].row(r);
                auto o = xt[p].row(r);
                for (std::size_t c = 0; c < a.size(); ++c) {
                    double eps = decay * (a[c] - b[c]);
                    if (mix > 0.0) eps = cfg.eta * eps + mix * sigma_t * rng.normal();
                    o[c] = b[c] + gamma * eps;
                }
            }
        }
        const double next = s * std::pow(gamma, static_cast<double>(T - t));
        if (std::abs(next - sigma_t * gamma) > 1e-12 * s) throw Error("iteration schedule drifted from geometric decay");
        sigma_t = next;
        if (trace) trace->sigmas.push_back(sigma_t);
        x0 = d.denoise(xt, sigma_t);
    }
    return x0;
}

double residual_noise_ratio(const Denoiser& d, const DenoiserGuidance& g, std::size_t p, std::uint64_t seed) {
    const std::size_t n = std::max<std::size_t>(128, 4 * p);
    const double sigma = g.sigma_snr;
    PlaneStack noisy(4, Plane(n, n));
    for (std::size_t k = 0; k < noisy.size(); ++k) {
        for (std::size_t r = 0; r < n; ++r) {
            CounterRng rng(seed ^ 0x9e3779b97f4a7c15ULL, (static_cast<std::uint64_t>(k) << 32) ^ r);
            for (std::size_t c = 0; c < n; ++c) noisy[k](r, c) = 0.5 + sigma * rng.normal();
        }
    }
    const PlaneStack out = d.denoise(noisy, g);
    if (out.size() != noisy.size()) throw DimensionError("denoiser changed the plane count");
    // Interior windows only: border windows reuse reflected pixels.
    const std::size_t lo = p / 2, hi = n - p / 2;
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < noisy.size(); ++k) {
        const Plane vi = box_std(noisy[k], p), vo = box_std(out[k], p);
        for (std::size_t r = lo; r < hi; ++r) {
            for (std::size_t c = lo; c < hi; ++c) {
                num += vo(r, c) * vo(r, c);
                den += vi(r, c) * vi(r, c);
            }
        }
    }
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace rawdn
