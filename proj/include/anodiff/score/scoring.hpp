#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "anodiff/audio/features.hpp"
#include "anodiff/diffusion/sampler.hpp"
#include "anodiff/nn/unet.hpp"
#include "anodiff/tensor.hpp"

namespace anodiff {

struct AFParams {
    double k_fraction = 0.1;
    bool use_relu = false;
};

struct AFConfig {
    AFParams defaults;  // first-shot-safe fallback
    std::map<std::string, AFParams> per_machine;

    const AFParams& lookup(const std::string& machine_type) const {
        auto it = per_machine.find(machine_type);
        return it == per_machine.end() ? defaults : it->second;
    }
    void validate() const;
};

struct AnomalyMap {
    DTensor residual;  // x - xhat
    DTensor filtered;  // post-activation residual, non-selected pixels zeroed
    int window_origin = 0;
};

// Anomalies filter: activation (ReLU of x - xhat, or |x - xhat|) followed by
// TopK selection, score = sum of selected / (F*T).
std::pair<double, AnomalyMap> af_score(const DTensor& x, const DTensor& xhat,
                                       const AFParams& af);

double mae_score(const DTensor& x, const DTensor& xhat);

// Score recomputed from a cached residual (x - xhat), no map materialized.
double af_score_from_residual(const DTensor& residual, const AFParams& af);
double mae_score_from_residual(const DTensor& residual);

struct ScoreOptions {
    int hop = 5;               // test-time sliding-window hop (frames)
    bool aggregate_max = false;  // default: mean of window scores
    uint64_t seed = 0;
    bool keep_residuals = false;
    bool keep_maps = false;
};

struct ClipScore {
    std::string clip_id;
    double score = 0.0;      // AF aggregate
    double mae = 0.0;        // MAE aggregate (always computed; the k=1 no-ReLU case)
    std::vector<double> window_scores;
    std::vector<double> window_mae;
    std::vector<int> origins;
    std::vector<DTensor> residuals;    // per window, when keep_residuals
    std::vector<AnomalyMap> maps;      // per window, when keep_maps
    int denoiser_calls = 0;            // per window
    uint64_t seed = 0;
};

// Wraps an EMA-weight denoiser forward as the double-precision callback the
// reverse samplers consume.
DenoiserFn make_denoiser(const nn::UNet<float>& net, const std::vector<float>& ema_weights);

// Windows the clip, reconstructs each window by partial diffusion, scores it,
// and aggregates. Window seeds derive from (opts.seed, window index).
ClipScore score_clip(const FBankFeature& f, const nn::UNet<float>& net,
                     const std::vector<float>& ema_weights, const DiffusionConfig& dcfg,
                     const NoiseSchedule& sched, const AFParams& af,
                     const ScoreOptions& opts);

// ---- AF parameter sweep over cached residuals ----

struct ResidualCacheEntry {
    std::string clip_id, machine_type, domain, label;
    std::vector<DTensor> residuals;
};

struct SweepRow {
    std::string machine_type;
    double k_fraction = 0.0;
    bool use_relu = false;
    double sauc = 0.0, tauc = 0.0, pauc = 0.0, auc_all = 0.0;
};

// Recomputes clip scores and AUC metrics for each (K, relu) combination from
// cached residuals; never re-runs diffusion.
std::vector<SweepRow> af_sweep(const std::vector<ResidualCacheEntry>& cache,
                               const std::vector<double>& k_values,
                               const std::vector<bool>& relu_options, double pauc_p,
                               bool aggregate_max = false);

// Residual cache container (binary, versioned).
void save_residual_cache(const std::string& path,
                         const std::vector<ResidualCacheEntry>& cache);
std::vector<ResidualCacheEntry> load_residual_cache(const std::string& path);

}  // namespace anodiff
