#pragma once

// Plain-text hierarchical key-value run configuration ("section.key = value",
// '#' comments). Unknown keys are rejected. Environment variables
// ANODIFF_DATASET and ANODIFF_RUN_DIR override the two path entries.

#include <cstdint>
#include <string>

#include <json.hpp>

#include "anodiff/audio/features.hpp"
#include "anodiff/diffusion/schedule.hpp"
#include "anodiff/nn/unet.hpp"
#include "anodiff/score/scoring.hpp"
#include "anodiff/train/trainer.hpp"

namespace anodiff {

struct RunConfig {
    FeatureConfig feature;
    DiffusionConfig diffusion;
    nn::UNetConfig unet;
    TrainConfig train;
    AFConfig af;
    ScoreOptions score;
    double eval_p = 0.1;
    bool eval_mixed_anomalies = false;
    double sweep_k_min = 0.03, sweep_k_max = 0.99, sweep_k_step = 0.03;
    int jobs = 0;  // 0 -> hardware concurrency
    std::string dataset_path;
    std::string run_dir = "runs/default";

    void validate() const;
    // swaps in the desk-scale model/feature geometry (32 mel bins, 32x32 net)
    void apply_toy_profile();
};

RunConfig default_run_config();
RunConfig load_run_config(const std::string& path);         // file + env overrides
void parse_config_line(RunConfig& cfg, const std::string& key, const std::string& value);
void apply_env_overrides(RunConfig& cfg);
std::string dump_run_config(const RunConfig& cfg);          // canonical text form
void write_config_snapshot(const RunConfig& cfg, const std::string& path);
nlohmann::json run_config_to_json(const RunConfig& cfg);    // checkpoint echo

}  // namespace anodiff
