#include "anodiff/diffusion/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace anodiff {

namespace {
void check_t(int t, const NoiseSchedule& sched, int lo) {
    if (t < lo || t > sched.total_steps())
        throw std::invalid_argument("sampler: timestep out of range: " + std::to_string(t));
}
}  // namespace

NoisySample forward_diffuse(const DTensor& x0, int t, const NoiseSchedule& sched,
                            const DTensor& noise) {
    check_t(t, sched, 1);
    if (!x0.same_shape(noise))
        throw std::invalid_argument("sampler: noise shape mismatch");
    const double abar = sched.alpha_bar[static_cast<size_t>(t)];
    const double cs = std::sqrt(abar);
    const double cn = std::sqrt(1.0 - abar);
    NoisySample out;
    out.t = t;
    out.eps = noise;
    out.x_t.resize(x0.dims());
    for (int64_t i = 0; i < x0.numel(); ++i) out.x_t[i] = cs * x0[i] + cn * noise[i];
    return out;
}

DTensor ddpm_step(const DTensor& x_t, int t, const DTensor& eps_hat,
                  const NoiseSchedule& sched, const DTensor& z) {
    check_t(t, sched, 1);
    if (!x_t.same_shape(eps_hat) || !x_t.same_shape(z))
        throw std::invalid_argument("sampler: shape mismatch");
    const double alpha = sched.alpha[static_cast<size_t>(t)];
    const double abar = sched.alpha_bar[static_cast<size_t>(t)];
    const double inv_sa = 1.0 / std::sqrt(alpha);
    const double ceps = (1.0 - alpha) / std::sqrt(1.0 - abar);
    const double cz = t == 1 ? 0.0 : std::sqrt(sched.beta_tilde[static_cast<size_t>(t)]);
    DTensor out(x_t.dims());
    for (int64_t i = 0; i < x_t.numel(); ++i)
        out[i] = inv_sa * (x_t[i] - ceps * eps_hat[i]) + cz * z[i];
    return out;
}

double ddpm_sigma(const NoiseSchedule& sched, int t) {
    check_t(t, sched, 1);
    const double abar_t = sched.alpha_bar[static_cast<size_t>(t)];
    const double abar_p = sched.alpha_bar[static_cast<size_t>(t) - 1];
    return std::sqrt((1.0 - abar_p) / (1.0 - abar_t)) * std::sqrt(1.0 - abar_t / abar_p);
}

DTensor ddim_step(const DTensor& x_t, int t, int t_prev, const DTensor& eps_hat,
                  const NoiseSchedule& sched, double sigma_t, const DTensor* noise) {
    check_t(t, sched, 1);
    if (t_prev < 0 || t_prev >= t)
        throw std::invalid_argument("sampler: need 0 <= t_prev < t");
    if (!x_t.same_shape(eps_hat))
        throw std::invalid_argument("sampler: shape mismatch");
    if (sigma_t < 0) throw std::invalid_argument("sampler: sigma must be >= 0");

    const double abar_t = sched.alpha_bar[static_cast<size_t>(t)];
    const double abar_p = sched.alpha_bar[static_cast<size_t>(t_prev)];
    const double dir_sq = 1.0 - abar_p - sigma_t * sigma_t;
    if (dir_sq < -1e-12)
        throw std::invalid_argument("sampler: sigma^2 exceeds 1 - alpha_bar(t_prev)");
    const double c_dir = std::sqrt(std::max(dir_sq, 0.0));

    const double inv_sabar = 1.0 / std::sqrt(abar_t);
    const double c_eps = std::sqrt(1.0 - abar_t);
    const double c_x0 = std::sqrt(abar_p);
    const bool stochastic = sigma_t > 0.0;
    if (stochastic && (noise == nullptr || !noise->same_shape(x_t)))
        throw std::invalid_argument("sampler: stochastic ddim step requires noise");

    DTensor out(x_t.dims());
    for (int64_t i = 0; i < x_t.numel(); ++i) {
        const double x0_pred = (x_t[i] - c_eps * eps_hat[i]) * inv_sabar;
        double v = c_x0 * x0_pred + c_dir * eps_hat[i];
        if (stochastic) v += sigma_t * (*noise)[i];
        out[i] = v;
    }
    return out;
}

std::vector<int> ddim_timesteps(int t_hat, int interval) {
    if (t_hat < 1 || interval < 1)
        throw std::invalid_argument("sampler: bad ddim subsequence parameters");
    std::vector<int> ts;
    for (int t = t_hat; t >= 1; t -= interval) ts.push_back(t);
    ts.push_back(0);
    return ts;
}

ReconstructResult reconstruct(const DTensor& x0, const DiffusionConfig& cfg,
                              const NoiseSchedule& sched,
                              const DenoiserFn& denoiser, uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const int t_hat = cfg.reverse_start;

    DTensor eps(x0.dims());
    rng.fill_normal(eps.data(), eps.numel());
    DTensor x = forward_diffuse(x0, t_hat, sched, eps).x_t;

    ReconstructResult res;
    res.seed = seed;

    if (cfg.sampler == SamplerKind::ddpm) {
        DTensor z(x0.dims());
        for (int t = t_hat; t >= 1; --t) {
            const DTensor eps_hat = denoiser(x, t);
            ++res.denoiser_calls;
            if (t > 1)
                rng.fill_normal(z.data(), z.numel());
            else
                z.fill(0.0);
            x = ddpm_step(x, t, eps_hat, sched, z);
        }
    } else {
        const auto ts = ddim_timesteps(t_hat, cfg.ddim_interval);
        for (size_t i = 0; i + 1 < ts.size(); ++i) {
            const DTensor eps_hat = denoiser(x, ts[i]);
            ++res.denoiser_calls;
            x = ddim_step(x, ts[i], ts[i + 1], eps_hat, sched, /*sigma=*/0.0);
        }
    }
    res.x0_hat = std::move(x);
    return res;
}

}  // namespace anodiff
