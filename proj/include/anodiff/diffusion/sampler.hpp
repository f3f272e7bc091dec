#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "anodiff/diffusion/schedule.hpp"
#include "anodiff/tensor.hpp"
#include "anodiff/util/rng.hpp"

namespace anodiff {

struct NoisySample {
    DTensor x_t;
    int t = 0;
    DTensor eps;  // the noise that was actually applied (training target)
};

// x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise
NoisySample forward_diffuse(const DTensor& x0, int t, const NoiseSchedule& sched,
                            const DTensor& noise);

// Stochastic reverse step:
// x_{t-1} = (x_t - (1-alpha_t)/sqrt(1-abar_t) * eps_hat) / sqrt(alpha_t)
//           + sqrt(beta_tilde_t) * z
// z is ignored (treated as zero) at t = 1.
DTensor ddpm_step(const DTensor& x_t, int t, const DTensor& eps_hat,
                  const NoiseSchedule& sched, const DTensor& z);

// sigma that makes a DDIM step coincide with the DDPM step to t-1
double ddpm_sigma(const NoiseSchedule& sched, int t);

// Deterministic (sigma = 0) or stochastic generalized reverse step from t to
// t_prev. noise may be null when sigma_t == 0.
DTensor ddim_step(const DTensor& x_t, int t, int t_prev, const DTensor& eps_hat,
                  const NoiseSchedule& sched, double sigma_t,
                  const DTensor* noise = nullptr);

// {t_hat, t_hat - interval, ...} down to >= 1, then 0. Stepping through
// consecutive pairs costs ceil(t_hat / interval) denoiser calls.
std::vector<int> ddim_timesteps(int t_hat, int interval);

using DenoiserFn = std::function<DTensor(const DTensor& x_t, int t)>;

struct ReconstructResult {
    DTensor x0_hat;
    int denoiser_calls = 0;
    uint64_t seed = 0;
};

// Partial diffusion: corrupt x0 to reverse_start once, then run the
// configured reverse sampler back to 0 (DDIM runs with sigma = 0).
ReconstructResult reconstruct(const DTensor& x0, const DiffusionConfig& cfg,
                              const NoiseSchedule& sched,
                              const DenoiserFn& denoiser, uint64_t seed);

}  // namespace anodiff
