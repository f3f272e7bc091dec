#include "anodiff/diffusion/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anodiff {

namespace {
constexpr double kBetaMin = 1e-5;
constexpr double kBetaMax = 0.999;
constexpr double kSigS = -3.0;
constexpr double kSigE = 3.0;
constexpr double kSigTau = 1.0;

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
}  // namespace

void DiffusionConfig::validate() const {
    if (total_steps < 1) throw std::invalid_argument("diffusion: total_steps must be >= 1");
    if (reverse_start < 1 || reverse_start > total_steps)
        throw std::invalid_argument("diffusion: need 0 < reverse_start <= total_steps");
    if (ddim_interval < 1 || ddim_interval > reverse_start)
        throw std::invalid_argument("diffusion: need 1 <= ddim_interval <= reverse_start");
}

double sigmoid_alpha_bar(double u) {
    const auto v = [](double uu) {
        return logistic(-(kSigS + uu * (kSigE - kSigS)) / kSigTau);
    };
    const double v0 = v(0.0), v1 = v(1.0);
    return (v(u) - v1) / (v0 - v1);
}

NoiseSchedule build_schedule(const DiffusionConfig& cfg) {
    cfg.validate();
    const int T = cfg.total_steps;
    NoiseSchedule s;
    s.beta.assign(static_cast<size_t>(T) + 1, 0.0);
    s.alpha.assign(static_cast<size_t>(T) + 1, 1.0);
    s.alpha_bar.assign(static_cast<size_t>(T) + 1, 1.0);
    s.beta_tilde.assign(static_cast<size_t>(T) + 1, 0.0);

    if (cfg.schedule == ScheduleKind::linear) {
        const double b1 = 1e-4, bT = 1e-2;
        for (int t = 1; t <= T; ++t) {
            const double u = T > 1 ? static_cast<double>(t - 1) / (T - 1) : 0.0;
            s.beta[static_cast<size_t>(t)] = b1 + u * (bT - b1);
        }
    } else {
        double prev = sigmoid_alpha_bar(0.0);  // exactly 1
        for (int t = 1; t <= T; ++t) {
            const double cur = sigmoid_alpha_bar(static_cast<double>(t) / T);
            s.beta[static_cast<size_t>(t)] = 1.0 - cur / prev;
            prev = cur;
        }
    }

    for (int t = 1; t <= T; ++t) {
        double& b = s.beta[static_cast<size_t>(t)];
        b = std::clamp(b, kBetaMin, kBetaMax);
        s.alpha[static_cast<size_t>(t)] = 1.0 - b;
        s.alpha_bar[static_cast<size_t>(t)] =
            s.alpha_bar[static_cast<size_t>(t) - 1] * s.alpha[static_cast<size_t>(t)];
        s.beta_tilde[static_cast<size_t>(t)] =
            (1.0 - s.alpha_bar[static_cast<size_t>(t) - 1]) /
            (1.0 - s.alpha_bar[static_cast<size_t>(t)]) * b;
    }
    return s;
}

ScheduleKind schedule_kind_from_string(const std::string& s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "sigmoid") return ScheduleKind::sigmoid;
    throw std::invalid_argument("diffusion: unknown schedule '" + s + "'");
}

SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "ddpm") return SamplerKind::ddpm;
    if (s == "ddim") return SamplerKind::ddim;
    throw std::invalid_argument("diffusion: unknown sampler '" + s + "'");
}

const char* to_string(ScheduleKind k) {
    return k == ScheduleKind::linear ? "linear" : "sigmoid";
}
const char* to_string(SamplerKind k) {
    return k == SamplerKind::ddpm ? "ddpm" : "ddim";
}

}  // namespace anodiff
