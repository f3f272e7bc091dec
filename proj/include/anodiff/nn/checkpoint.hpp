#pragma once

// Checkpoint container: "ADCK" magic, format-version integer, JSON header
// (config echo, step, tensor directory), then raw little-endian float32
// blocks for weights / EMA / Adam moments. Round-trips bit-exactly.

#include <string>
#include <vector>

#include <json.hpp>

#include "anodiff/nn/unet.hpp"

namespace anodiff {

struct Checkpoint {
    nn::UNetConfig unet;
    nn::DenoiserParams<float> params;
    bool has_adam = false;
    std::vector<float> adam_m, adam_v;
    nlohmann::json extra;  // pipeline config echo (feature / diffusion / train)
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

nlohmann::json unet_config_to_json(const nn::UNetConfig& cfg);
nn::UNetConfig unet_config_from_json(const nlohmann::json& j);

}  // namespace anodiff
