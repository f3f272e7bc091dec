#include "anodiff/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace anodiff {

namespace {
constexpr char kMagic[4] = {'A', 'D', 'C', 'K'};
constexpr uint32_t kFormatVersion = 1;

void write_block(std::ostream& out, const std::vector<float>& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(float)));
}

void read_block(std::istream& in, std::vector<float>& v, size_t n) {
    v.resize(n);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor block");
}
}  // namespace

nlohmann::json unet_config_to_json(const nn::UNetConfig& cfg) {
    return {{"base_channels", cfg.base_channels},
            {"channel_multipliers", cfg.channel_multipliers},
            {"attention_heads", cfg.attention_heads},
            {"attention_resolutions", cfg.attention_resolutions},
            {"input_size", cfg.input_size},
            {"time_embed_dim", cfg.time_embed_dim},
            {"groups_per_norm", cfg.groups_per_norm}};
}

nn::UNetConfig unet_config_from_json(const nlohmann::json& j) {
    nn::UNetConfig cfg;
    cfg.base_channels = j.at("base_channels").get<int>();
    cfg.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
    cfg.attention_heads = j.at("attention_heads").get<int>();
    cfg.attention_resolutions = j.at("attention_resolutions").get<std::vector<int>>();
    cfg.input_size = j.at("input_size").get<int>();
    cfg.time_embed_dim = j.at("time_embed_dim").get<int>();
    cfg.groups_per_norm = j.at("groups_per_norm").get<int>();
    return cfg;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    if (ck.params.weights.size() != ck.params.ema.size())
        throw std::invalid_argument("checkpoint: weights/ema size mismatch");
    nlohmann::json header = {
        {"format_version", kFormatVersion},
        {"param_count", ck.params.weights.size()},
        {"step", ck.params.step},
        {"unet", unet_config_to_json(ck.unet)},
        {"has_adam", ck.has_adam},
        {"extra", ck.extra},
    };
    const std::string hs = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("checkpoint: cannot write " + path);
    out.write(kMagic, 4);
    const uint32_t ver = kFormatVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    write_block(out, ck.params.weights);
    write_block(out, ck.params.ema);
    if (ck.has_adam) {
        write_block(out, ck.adam_m);
        write_block(out, ck.adam_v);
    }
    if (!out) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("checkpoint: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("checkpoint: bad magic: " + path);
    uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (ver != kFormatVersion)
        throw std::runtime_error("checkpoint: unsupported format version " +
                                 std::to_string(ver));
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw std::runtime_error("checkpoint: truncated header: " + path);
    const nlohmann::json header = nlohmann::json::parse(hs);

    Checkpoint ck;
    ck.unet = unet_config_from_json(header.at("unet"));
    ck.params.step = header.at("step").get<int64_t>();
    ck.has_adam = header.at("has_adam").get<bool>();
    ck.extra = header.value("extra", nlohmann::json::object());
    const size_t n = header.at("param_count").get<size_t>();
    read_block(in, ck.params.weights, n);
    read_block(in, ck.params.ema, n);
    if (ck.has_adam) {
        read_block(in, ck.adam_m, n);
        read_block(in, ck.adam_v, n);
    }
    return ck;
}

}  // namespace anodiff
