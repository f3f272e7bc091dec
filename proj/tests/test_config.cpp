#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "anodiff/util/config.hpp"

using namespace anodiff;
namespace fs = std::filesystem;

namespace {
std::string write_file(const std::string& name, const std::string& body) {
    auto p = fs::temp_directory_path() / name;
    std::ofstream out(p);
    out << body;
    return p.string();
}
}  // namespace

TEST_CASE("defaults mirror the published hyper-parameter table") {
    RunConfig cfg = default_run_config();
    CHECK(cfg.diffusion.total_steps == 1000);
    CHECK(cfg.diffusion.reverse_start == 280);
    CHECK(cfg.diffusion.schedule == ScheduleKind::sigmoid);
    CHECK(cfg.diffusion.ddim_interval == 4);
    CHECK(cfg.unet.base_channels == 64);
    CHECK(cfg.unet.channel_multipliers == std::vector<int>{1, 2, 4, 8});
    CHECK(cfg.unet.attention_heads == 4);
    CHECK(cfg.unet.attention_resolutions == std::vector<int>{32});
    CHECK(cfg.train.learning_rate == 1e-4);
    CHECK(cfg.train.ema_rate == 0.995);
    CHECK(cfg.train.total_steps == 64000);
    CHECK(cfg.train.batch_size == 24);
    CHECK(cfg.feature.n_mels == 128);
    CHECK(cfg.feature.sample_rate == 16000);
    CHECK(cfg.score.hop == 5);
    CHECK(cfg.eval_p == 0.1);
    cfg.validate();
}

TEST_CASE("config file parsing, comments, per-machine af entries") {
    const auto path = write_file("anodiff_cfg_ok.cfg", R"(
# comment line
diffusion.reverse_start = 140   # trailing comment
train.batch_size = 8
af.k_fraction = 0.25
af.use_relu = true
af.machine.bearing = 0.06,relu
af.machine.fan = 0.5,norelu
unet.channel_multipliers = 1,2
unet.base_channels = 16
unet.attention_resolutions = 16
unet.input_size = 32
feature.n_mels = 32
)");
    RunConfig cfg = load_run_config(path);
    CHECK(cfg.diffusion.reverse_start == 140);
    CHECK(cfg.train.batch_size == 8);
    CHECK(cfg.af.defaults.k_fraction == 0.25);
    CHECK(cfg.af.defaults.use_relu);
    CHECK(cfg.af.per_machine.at("bearing").k_fraction == 0.06);
    CHECK(cfg.af.per_machine.at("bearing").use_relu);
    CHECK(!cfg.af.per_machine.at("fan").use_relu);
    cfg.validate();
}

TEST_CASE("unknown keys are rejected with location info") {
    const auto path = write_file("anodiff_cfg_bad.cfg", "trian.batch_size = 8\n");
    CHECK_THROWS_WITH_AS(load_run_config(path),
                         doctest::Contains("unknown key"), std::runtime_error);
}

TEST_CASE("validation catches cross-module inconsistencies") {
    RunConfig cfg = default_run_config();
    cfg.feature.n_mels = 64;  // != unet.input_size
    CHECK_THROWS(cfg.validate());
    cfg = default_run_config();
    cfg.score.hop = 0;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("toy profile swaps in the desk-scale geometry") {
    RunConfig cfg = default_run_config();
    cfg.apply_toy_profile();
    CHECK(cfg.unet.input_size == 32);
    CHECK(cfg.unet.base_channels == 16);
    CHECK(cfg.feature.n_mels == 32);
    CHECK(cfg.train.total_steps <= 2000);
    cfg.validate();
}

TEST_CASE("dump/parse round trip preserves every field") {
    RunConfig cfg = default_run_config();
    cfg.diffusion.reverse_start = 99;
    cfg.af.per_machine["gearbox"] = {0.33, true};
    cfg.train.seed = 424242;
    cfg.dataset_path = "/data/x";
    const std::string text = dump_run_config(cfg);

    const auto path = write_file("anodiff_cfg_rt.cfg", text);
    // guard against env bleed-through
    unsetenv("ANODIFF_DATASET");
    unsetenv("ANODIFF_RUN_DIR");
    RunConfig rt = load_run_config(path);
    CHECK(dump_run_config(rt) == text);
}

TEST_CASE("environment variables override the path entries only") {
    RunConfig cfg = default_run_config();
    cfg.dataset_path = "/from/file";
    setenv("ANODIFF_DATASET", "/from/env", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.dataset_path == "/from/env");
    unsetenv("ANODIFF_DATASET");
}
