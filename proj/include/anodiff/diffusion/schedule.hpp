#pragma once

#include <string>
#include <vector>

namespace anodiff {

enum class ScheduleKind { linear, sigmoid };
enum class SamplerKind { ddpm, ddim };

struct DiffusionConfig {
    int total_steps = 1000;    // T
    int reverse_start = 280;   // t-hat for partial diffusion
    ScheduleKind schedule = ScheduleKind::sigmoid;
    int ddim_interval = 4;     // reverse subsequence stride
    SamplerKind sampler = SamplerKind::ddim;

    void validate() const;
};

// Per-step coefficient tables, length T+1 with the t = 0 convention
// beta[0] = 0, alpha[0] = 1, alpha_bar[0] = 1, beta_tilde[0] = 0.
struct NoiseSchedule {
    std::vector<double> beta;
    std::vector<double> alpha;       // 1 - beta
    std::vector<double> alpha_bar;   // running product of alpha
    std::vector<double> beta_tilde;  // (1 - abar_{t-1}) / (1 - abar_t) * beta_t

    int total_steps() const { return static_cast<int>(beta.size()) - 1; }
};

// Raw normalized sigmoid curve (s = -3, e = 3, tau = 1): exactly 1 at u = 0
// and exactly 0 at u = 1; betas are derived from it and then clamped.
double sigmoid_alpha_bar(double u);

NoiseSchedule build_schedule(const DiffusionConfig& cfg);

ScheduleKind schedule_kind_from_string(const std::string& s);
SamplerKind sampler_kind_from_string(const std::string& s);
const char* to_string(ScheduleKind k);
const char* to_string(SamplerKind k);

}  // namespace anodiff
