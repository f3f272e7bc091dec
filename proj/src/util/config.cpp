#include "anodiff/util/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace anodiff {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

int to_int(const std::string& v) { return std::stoi(v); }
int64_t to_i64(const std::string& v) { return std::stoll(v); }
double to_f64(const std::string& v) { return std::stod(v); }
uint64_t to_u64(const std::string& v) { return std::stoull(v); }

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw std::invalid_argument("config: bad boolean '" + v + "'");
}

std::vector<int> to_int_list(const std::string& v) {
    std::vector<int> out;
    for (const auto& tok : split(v, ','))
        if (!tok.empty()) out.push_back(to_int(tok));
    if (out.empty()) throw std::invalid_argument("config: empty int list");
    return out;
}

}  // namespace

RunConfig default_run_config() { return RunConfig{}; }

void RunConfig::validate() const {
    feature.validate();
    diffusion.validate();
    unet.validate();
    train.validate();
    af.validate();
    if (score.hop < 1) throw std::invalid_argument("config: score.hop must be >= 1");
    if (!(eval_p > 0 && eval_p <= 1))
        throw std::invalid_argument("config: eval.p must be in (0,1]");
    if (!(sweep_k_min > 0 && sweep_k_min <= sweep_k_max && sweep_k_max <= 1 &&
          sweep_k_step > 0))
        throw std::invalid_argument("config: bad sweep K grid");
    if (unet.input_size != feature.n_mels)
        throw std::invalid_argument(
            "config: unet.input_size must equal feature.n_mels (square windows)");
}

void RunConfig::apply_toy_profile() {
    unet = nn::UNetConfig::toy();
    feature.n_mels = 32;
    train.batch_size = 16;
    train.total_steps = std::min<int64_t>(train.total_steps, 2000);
    train.checkpoint_every = std::min<int64_t>(train.checkpoint_every, 1000);
}

void parse_config_line(RunConfig& cfg, const std::string& key, const std::string& value) {
    // af.machine.<name> = k_fraction,relu|norelu
    if (key.rfind("af.machine.", 0) == 0) {
        const std::string machine = key.substr(std::string("af.machine.").size());
        if (machine.empty()) throw std::invalid_argument("config: empty machine name");
        const auto parts = split(value, ',');
        if (parts.size() != 2)
            throw std::invalid_argument("config: af.machine wants 'K,relu|norelu'");
        AFParams p;
        p.k_fraction = to_f64(parts[0]);
        if (parts[1] == "relu")
            p.use_relu = true;
        else if (parts[1] == "norelu")
            p.use_relu = false;
        else
            throw std::invalid_argument("config: af.machine flag must be relu|norelu");
        cfg.af.per_machine[machine] = p;
        return;
    }

    if (key == "feature.sample_rate") cfg.feature.sample_rate = to_int(value);
    else if (key == "feature.fft_size") cfg.feature.fft_size = to_int(value);
    else if (key == "feature.win_ms") cfg.feature.win_ms = to_f64(value);
    else if (key == "feature.hop_ms") cfg.feature.hop_ms = to_f64(value);
    else if (key == "feature.n_mels") cfg.feature.n_mels = to_int(value);
    else if (key == "feature.fmin") cfg.feature.fmin = to_f64(value);
    else if (key == "feature.fmax") cfg.feature.fmax = to_f64(value);
    else if (key == "diffusion.total_steps") cfg.diffusion.total_steps = to_int(value);
    else if (key == "diffusion.reverse_start") cfg.diffusion.reverse_start = to_int(value);
    else if (key == "diffusion.schedule") cfg.diffusion.schedule = schedule_kind_from_string(value);
    else if (key == "diffusion.ddim_interval") cfg.diffusion.ddim_interval = to_int(value);
    else if (key == "diffusion.sampler") cfg.diffusion.sampler = sampler_kind_from_string(value);
    else if (key == "unet.base_channels") cfg.unet.base_channels = to_int(value);
    else if (key == "unet.channel_multipliers") cfg.unet.channel_multipliers = to_int_list(value);
    else if (key == "unet.attention_heads") cfg.unet.attention_heads = to_int(value);
    else if (key == "unet.attention_resolutions") cfg.unet.attention_resolutions = to_int_list(value);
    else if (key == "unet.input_size") cfg.unet.input_size = to_int(value);
    else if (key == "unet.time_embed_dim") cfg.unet.time_embed_dim = to_int(value);
    else if (key == "unet.groups_per_norm") cfg.unet.groups_per_norm = to_int(value);
    else if (key == "train.learning_rate") cfg.train.learning_rate = to_f64(value);
    else if (key == "train.ema_rate") cfg.train.ema_rate = to_f64(value);
    else if (key == "train.total_steps") cfg.train.total_steps = to_i64(value);
    else if (key == "train.batch_size") cfg.train.batch_size = to_int(value);
    else if (key == "train.seed") cfg.train.seed = to_u64(value);
    else if (key == "train.checkpoint_every") cfg.train.checkpoint_every = to_i64(value);
    else if (key == "train.grad_clip") cfg.train.grad_clip = to_f64(value);
    else if (key == "score.hop") cfg.score.hop = to_int(value);
    else if (key == "score.aggregate") {
        if (value == "mean") cfg.score.aggregate_max = false;
        else if (value == "max") cfg.score.aggregate_max = true;
        else throw std::invalid_argument("config: score.aggregate must be mean|max");
    }
    else if (key == "score.seed") cfg.score.seed = to_u64(value);
    else if (key == "af.k_fraction") cfg.af.defaults.k_fraction = to_f64(value);
    else if (key == "af.use_relu") cfg.af.defaults.use_relu = to_bool(value);
    else if (key == "eval.p") cfg.eval_p = to_f64(value);
    else if (key == "eval.mixed_anomalies") cfg.eval_mixed_anomalies = to_bool(value);
    else if (key == "sweep.k_min") cfg.sweep_k_min = to_f64(value);
    else if (key == "sweep.k_max") cfg.sweep_k_max = to_f64(value);
    else if (key == "sweep.k_step") cfg.sweep_k_step = to_f64(value);
    else if (key == "run.jobs") cfg.jobs = to_int(value);
    else if (key == "paths.dataset") cfg.dataset_path = value;
    else if (key == "paths.run_dir") cfg.run_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("config: cannot open " + path);
    RunConfig cfg = default_run_config();
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                     ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        try {
            parse_config_line(cfg, key, value);
        } catch (const std::exception& e) {
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                     ": " + e.what());
        }
    }
    apply_env_overrides(cfg);
    return cfg;
}

void apply_env_overrides(RunConfig& cfg) {
    if (const char* v = std::getenv("ANODIFF_DATASET")) cfg.dataset_path = v;
    if (const char* v = std::getenv("ANODIFF_RUN_DIR")) cfg.run_dir = v;
}

std::string dump_run_config(const RunConfig& cfg) {
    std::ostringstream os;
    os.precision(12);
    auto list = [](const std::vector<int>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
        return s;
    };
    os << "feature.sample_rate = " << cfg.feature.sample_rate << "\n";
    os << "feature.fft_size = " << cfg.feature.fft_size << "\n";
    os << "feature.win_ms = " << cfg.feature.win_ms << "\n";
    os << "feature.hop_ms = " << cfg.feature.hop_ms << "\n";
    os << "feature.n_mels = " << cfg.feature.n_mels << "\n";
    os << "feature.fmin = " << cfg.feature.fmin << "\n";
    os << "feature.fmax = " << cfg.feature.fmax << "\n";
    os << "diffusion.total_steps = " << cfg.diffusion.total_steps << "\n";
    os << "diffusion.reverse_start = " << cfg.diffusion.reverse_start << "\n";
    os << "diffusion.schedule = " << to_string(cfg.diffusion.schedule) << "\n";
    os << "diffusion.ddim_interval = " << cfg.diffusion.ddim_interval << "\n";
    os << "diffusion.sampler = " << to_string(cfg.diffusion.sampler) << "\n";
    os << "unet.base_channels = " << cfg.unet.base_channels << "\n";
    os << "unet.channel_multipliers = " << list(cfg.unet.channel_multipliers) << "\n";
    os << "unet.attention_heads = " << cfg.unet.attention_heads << "\n";
    os << "unet.attention_resolutions = " << list(cfg.unet.attention_resolutions) << "\n";
    os << "unet.input_size = " << cfg.unet.input_size << "\n";
    os << "unet.time_embed_dim = " << cfg.unet.time_embed_dim << "\n";
    os << "unet.groups_per_norm = " << cfg.unet.groups_per_norm << "\n";
    os << "train.learning_rate = " << cfg.train.learning_rate << "\n";
    os << "train.ema_rate = " << cfg.train.ema_rate << "\n";
    os << "train.total_steps = " << cfg.train.total_steps << "\n";
    os << "train.batch_size = " << cfg.train.batch_size << "\n";
    os << "train.seed = " << cfg.train.seed << "\n";
    os << "train.checkpoint_every = " << cfg.train.checkpoint_every << "\n";
    os << "train.grad_clip = " << cfg.train.grad_clip << "\n";
    os << "score.hop = " << cfg.score.hop << "\n";
    os << "score.aggregate = " << (cfg.score.aggregate_max ? "max" : "mean") << "\n";
    os << "score.seed = " << cfg.score.seed << "\n";
    os << "af.k_fraction = " << cfg.af.defaults.k_fraction << "\n";
    os << "af.use_relu = " << (cfg.af.defaults.use_relu ? "true" : "false") << "\n";
    for (const auto& [m, p] : cfg.af.per_machine)
        os << "af.machine." << m << " = " << p.k_fraction << ","
           << (p.use_relu ? "relu" : "norelu") << "\n";
    os << "eval.p = " << cfg.eval_p << "\n";
    os << "eval.mixed_anomalies = " << (cfg.eval_mixed_anomalies ? "true" : "false") << "\n";
    os << "sweep.k_min = " << cfg.sweep_k_min << "\n";
    os << "sweep.k_max = " << cfg.sweep_k_max << "\n";
    os << "sweep.k_step = " << cfg.sweep_k_step << "\n";
    os << "run.jobs = " << cfg.jobs << "\n";
    os << "paths.dataset = " << cfg.dataset_path << "\n";
    os << "paths.run_dir = " << cfg.run_dir << "\n";
    return os.str();
}

void write_config_snapshot(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("config: cannot write snapshot " + path);
    out << dump_run_config(cfg);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["feature"] = {{"sample_rate", cfg.feature.sample_rate},
                    {"fft_size", cfg.feature.fft_size},
                    {"win_ms", cfg.feature.win_ms},
                    {"hop_ms", cfg.feature.hop_ms},
                    {"n_mels", cfg.feature.n_mels},
                    {"fmin", cfg.feature.fmin},
                    {"fmax", cfg.feature.fmax}};
    j["diffusion"] = {{"total_steps", cfg.diffusion.total_steps},
                      {"reverse_start", cfg.diffusion.reverse_start},
                      {"schedule", to_string(cfg.diffusion.schedule)},
                      {"ddim_interval", cfg.diffusion.ddim_interval},
                      {"sampler", to_string(cfg.diffusion.sampler)}};
    j["train"] = {{"learning_rate", cfg.train.learning_rate},
                  {"ema_rate", cfg.train.ema_rate},
                  {"total_steps", cfg.train.total_steps},
                  {"batch_size", cfg.train.batch_size},
                  {"seed", cfg.train.seed},
                  {"checkpoint_every", cfg.train.checkpoint_every},
                  {"grad_clip", cfg.train.grad_clip}};
    return j;
}

}  // namespace anodiff
