#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "anodiff/diffusion/schedule.hpp"
#include "anodiff/nn/checkpoint.hpp"
#include "anodiff/nn/unet.hpp"
#include "anodiff/tensor.hpp"

namespace anodiff {

struct TrainConfig {
    double learning_rate = 1e-4;
    double ema_rate = 0.995;
    int64_t total_steps = 64000;
    int batch_size = 24;
    uint64_t seed = 0;
    int64_t checkpoint_every = 8000;
    double grad_clip = 0.0;  // global-norm clip, 0 disables
    int jobs = 0;            // 0 -> hardware concurrency

    void validate() const;
};

struct AdamState {
    std::vector<float> m, v;
    int64_t steps = 0;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

// Bias-corrected Adam update; zero gradients leave weights unchanged.
void adam_step(AdamState& st, std::vector<float>& w, const std::vector<float>& g,
               double lr);

// ema <- rate * ema + (1 - rate) * w
void ema_update(std::vector<float>& ema, const std::vector<float>& w, double rate);

struct TrainState {
    nn::DenoiserParams<float> params;
    AdamState opt;
    int64_t step = 0;  // completed optimization steps
};

// One denoising-MSE optimization step on a batch of windows. Timesteps and
// noise are drawn per element from a counter-derived stream (seed, step), so
// runs and checkpoint resumes replay identically.
double train_step(const nn::UNet<float>& net, TrainState& st,
                  const std::vector<const FTensor*>& batch,
                  const NoiseSchedule& sched, const TrainConfig& cfg);

struct TrainLogRow {
    int64_t step;
    double loss;
    double wall_ms;
};

struct TrainLoopResult {
    std::string final_checkpoint;
    std::vector<TrainLogRow> log;
};

// Runs cfg.total_steps steps over shuffled batches (reshuffled per epoch),
// writes periodic + final checkpoints and run_dir/train_log.csv. Pass a
// checkpoint path in `resume_from` to continue an interrupted run.
TrainLoopResult train_loop(const nn::UNet<float>& net,
                           const std::vector<FTensor>& windows,
                           const NoiseSchedule& sched, const TrainConfig& cfg,
                           const std::string& run_dir,
                           const nlohmann::json& config_echo,
                           const std::string& resume_from = "");

// Deterministic batch index stream: element j of step s belongs to epoch
// (s*B + j) / N and is drawn from that epoch's seeded shuffle.
std::vector<int64_t> batch_indices(uint64_t seed, int64_t step, int batch_size,
                                   int64_t dataset_size);

}  // namespace anodiff
