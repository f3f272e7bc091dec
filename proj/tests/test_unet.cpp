#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "anodiff/nn/unet.hpp"
#include "anodiff/util/rng.hpp"

using namespace anodiff;
using namespace anodiff::nn;

namespace {

// architecture arithmetic, written out independently of the registration code
int64_t lin_params(int64_t i, int64_t o) { return o * i + o; }
int64_t conv_params(int64_t ci, int64_t co, int64_t k) { return co * ci * k * k + co; }
int64_t norm_params(int64_t c) { return 2 * c; }
int64_t res_params(int64_t ci, int64_t co, int64_t ed) {
    int64_t n = norm_params(ci) + conv_params(ci, co, 3) + lin_params(ed, co) +
                norm_params(co) + conv_params(co, co, 3);
    if (ci != co) n += conv_params(ci, co, 1);
    return n;
}
int64_t attn_params(int64_t c) {
    return norm_params(c) + conv_params(c, 3 * c, 1) + conv_params(c, c, 1);
}

int64_t expected_param_count(const UNetConfig& cfg) {
    const int64_t ed = cfg.embed_dim();
    int64_t total = lin_params(cfg.base_channels, ed) + lin_params(ed, ed) +
                    conv_params(1, cfg.base_channels, 3);
    const int n = cfg.stages();
    int64_t ch = cfg.base_channels;
    for (int i = 0; i < n; ++i) {
        const int64_t co = cfg.stage_channels(i);
        total += res_params(ch, co, ed) + res_params(co, co, ed);
        if (cfg.attn_at(cfg.stage_size(i))) total += attn_params(co);
        if (i < n - 1) total += conv_params(co, co, 3);
        ch = co;
    }
    for (int i = n - 2; i >= 0; --i) {
        const int64_t chi = cfg.stage_channels(i), chd = cfg.stage_channels(i + 1);
        total += conv_params(chd, chd, 3) + res_params(chd + chi, chi, ed) +
                 res_params(chi, chi, ed);
        if (cfg.attn_at(cfg.stage_size(i))) total += attn_params(chi);
    }
    total += norm_params(cfg.stage_channels(0)) + conv_params(cfg.stage_channels(0), 1, 3);
    return total;
}

FTensor randn_win(Rng& rng, int w) {
    FTensor t(w, w);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.normal());
    return t;
}

}  // namespace

TEST_CASE("parameter count matches architecture arithmetic") {
    for (const auto& cfg : {UNetConfig::tiny(), UNetConfig::toy(), UNetConfig{}}) {
        UNet<float> net(cfg);
        CHECK(net.param_count() == expected_param_count(cfg));
    }
}

TEST_CASE("same seed gives bit-identical parameters") {
    UNet<float> net(UNetConfig::tiny());
    std::vector<float> a, b;
    net.init_weights(123, a);
    net.init_weights(123, b);
    CHECK(a == b);
    std::vector<float> c;
    net.init_weights(124, c);
    CHECK(a != c);
}

TEST_CASE("freshly initialized net outputs exactly zero (zero-init head)") {
    UNet<float> net(UNetConfig::tiny());
    auto params = init_params(net, 9);
    Rng rng(10);
    FTensor x = randn_win(rng, 16);
    FTensor y = net.forward(params.weights.data(), x, 500);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(y[i] == 0.0f);
    // ema starts as an exact copy
    CHECK(params.ema == params.weights);
}

TEST_CASE("forward preserves shape and stays finite for large inputs") {
    UNet<float> net(UNetConfig::toy());
    auto params = init_params(net, 1);
    // perturb so outputs are non-zero
    Rng rng(2);
    for (auto& w : params.weights) w += static_cast<float>(rng.normal() * 0.05);
    FTensor x(32, 32);
    for (int64_t i = 0; i < x.numel(); ++i) x[i] = static_cast<float>((i % 21) - 10);
    FTensor y = net.forward(params.weights.data(), x, 1000);
    CHECK(y.dim(0) == 32);
    CHECK(y.dim(1) == 32);
    for (int64_t i = 0; i < y.numel(); ++i) CHECK(std::isfinite(y[i]));
}

TEST_CASE("use of ema vs live weights selects different parameter sets") {
    UNet<float> net(UNetConfig::tiny());
    auto params = init_params(net, 5);
    Rng rng(6);
    FTensor x = randn_win(rng, 16);
    // diverge the live weights; ema stays at init
    for (auto& w : params.weights) w += 0.1f;
    FTensor live = net.forward(params.weights.data(), x, 3);
    FTensor ema = net.forward(params.ema.data(), x, 3);
    bool differ = false;
    for (int64_t i = 0; i < live.numel(); ++i) differ = differ || live[i] != ema[i];
    CHECK(differ);
}

TEST_CASE("timestep conditioning changes the output of a perturbed net") {
    UNet<float> net(UNetConfig::tiny());
    auto params = init_params(net, 5);
    Rng rng(6);
    for (auto& w : params.weights) w += static_cast<float>(rng.normal() * 0.1);
    FTensor x = randn_win(rng, 16);
    FTensor y1 = net.forward(params.weights.data(), x, 10);
    FTensor y2 = net.forward(params.weights.data(), x, 900);
    double diff = 0;
    for (int64_t i = 0; i < y1.numel(); ++i)
        diff += std::abs(static_cast<double>(y1[i]) - y2[i]);
    CHECK(diff > 1e-6);
}

TEST_CASE("forward rejects wrong input sizes and negative timesteps") {
    UNet<float> net(UNetConfig::tiny());
    auto params = init_params(net, 5);
    FTensor bad(8, 8);
    CHECK_THROWS(net.forward(params.weights.data(), bad, 1));
    FTensor ok(16, 16);
    CHECK_THROWS(net.forward(params.weights.data(), ok, -1));
}

TEST_CASE("config validation rejects inconsistent geometry") {
    UNetConfig c = UNetConfig::tiny();
    c.input_size = 15;
    CHECK_THROWS(c.validate());
    c = UNetConfig::tiny();
    c.attention_resolutions = {5};
    CHECK_THROWS(c.validate());
    c = UNetConfig::tiny();
    c.base_channels = 7;
    CHECK_THROWS(c.validate());
    c = UNetConfig::tiny();
    c.channel_multipliers = {};
    CHECK_THROWS(c.validate());
}

TEST_CASE("float and double instantiations agree closely") {
    UNet<float> netf(UNetConfig::tiny());
    UNet<double> netd(UNetConfig::tiny());
    std::vector<float> wf;
    netf.init_weights(77, wf);
    std::vector<double> wd(wf.begin(), wf.end());
    Rng rng(78);
    for (size_t i = 0; i < wf.size(); ++i) {
        const float delta = static_cast<float>(rng.normal() * 0.05);
        wf[i] += delta;
        wd[i] = wf[i];
    }
    FTensor xf(16, 16);
    for (int64_t i = 0; i < xf.numel(); ++i) xf[i] = static_cast<float>(rng.normal());
    DTensor xd = xf.cast<double>();
    FTensor yf = netf.forward(wf.data(), xf, 42);
    DTensor yd = netd.forward(wd.data(), xd, 42);
    for (int64_t i = 0; i < yf.numel(); ++i)
        CHECK(std::abs(static_cast<double>(yf[i]) - yd[i]) < 2e-4);
}
