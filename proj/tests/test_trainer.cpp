#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "anodiff/train/trainer.hpp"
#include "anodiff/util/rng.hpp"

using namespace anodiff;

namespace {

std::string temp_dir(const std::string& tag) {
    auto p = std::filesystem::temp_directory_path() / ("anodiff_test_" + tag);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p.string();
}

FTensor random_window(Rng& rng, int w, double lo = 0.0, double hi = 1.0) {
    FTensor t(w, w);
    for (int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<float>(lo + (hi - lo) * rng.uniform01());
    return t;
}

}  // namespace

TEST_CASE("adam with zero gradients leaves weights unchanged") {
    AdamState st;
    std::vector<float> w = {1.0f, -2.0f, 0.5f};
    const auto w0 = w;
    std::vector<float> g(3, 0.0f);
    for (int i = 0; i < 5; ++i) adam_step(st, w, g, 1e-2);
    CHECK(w == w0);
}

TEST_CASE("adam first step moves weights by ~lr against the gradient sign") {
    AdamState st;
    std::vector<float> w = {0.0f};
    std::vector<float> g = {3.7f};
    adam_step(st, w, g, 1e-3);
    // bias-corrected first step is lr * g / (|g| + eps) ~= lr
    CHECK(w[0] == doctest::Approx(-1e-3).epsilon(1e-3));
}

TEST_CASE("ema update arithmetic") {
    std::vector<float> ema = {1.0f}, w = {0.0f};
    ema_update(ema, w, 0.995);
    CHECK(ema[0] == doctest::Approx(0.995f));

    // rate 0 copies the weights, rate ~1 freezes the ema
    std::vector<float> e2 = {1.0f};
    ema_update(e2, w, 0.0);
    CHECK(e2[0] == 0.0f);

    // equal weights are a fixed point
    std::vector<float> e3 = {0.25f}, w3 = {0.25f};
    ema_update(e3, w3, 0.995);
    CHECK(e3[0] == 0.25f);
}

TEST_CASE("ema converges geometrically to frozen weights") {
    std::vector<float> ema = {1.0f}, w = {0.0f};
    const double rate = 0.9;
    for (int k = 1; k <= 20; ++k) {
        ema_update(ema, w, rate);
        CHECK(std::abs(ema[0]) <= std::pow(rate, k) + 1e-6);
    }
}

TEST_CASE("batch index stream is deterministic, covers the dataset per epoch") {
    const auto a = batch_indices(7, 3, 4, 10);
    const auto b = batch_indices(7, 3, 4, 10);
    CHECK(a == b);

    // one epoch = dataset_size consecutive draws, a permutation
    std::vector<bool> seen(10, false);
    for (int step = 0; step < 5; ++step)
        for (int64_t i : batch_indices(7, step, 2, 10)) {
            CHECK(!seen[static_cast<size_t>(i)]);
            seen[static_cast<size_t>(i)] = true;
        }
    for (bool s : seen) CHECK(s);

    // different epochs shuffle differently
    const auto e0 = batch_indices(7, 0, 10, 10);
    const auto e1 = batch_indices(7, 1, 10, 10);
    CHECK(e0 != e1);
}

TEST_CASE("initial loss is near 1 with a zero-init output conv") {
    // E||eps - 0||^2 = 1 per pixel; batch * W^2 = 4 * 256 >= 1e3 samples
    nn::UNet<float> net(nn::UNetConfig::tiny());
    DiffusionConfig dc;
    auto sched = build_schedule(dc);
    TrainConfig tc;
    tc.batch_size = 4;
    tc.seed = 11;
    tc.jobs = 2;
    tc.learning_rate = 1e-4;

    TrainState st;
    st.params = nn::init_params(net, tc.seed);
    st.opt.m.assign(static_cast<size_t>(net.param_count()), 0.0f);
    st.opt.v.assign(static_cast<size_t>(net.param_count()), 0.0f);

    Rng rng(12);
    std::vector<FTensor> data;
    for (int i = 0; i < 4; ++i) data.push_back(random_window(rng, 16));
    std::vector<const FTensor*> batch;
    for (auto& d : data) batch.push_back(&d);

    const double loss = train_step(net, st, batch, sched, tc);
    CHECK(std::abs(loss - 1.0) < 0.1);
    CHECK(st.step == 1);
}

TEST_CASE("training a single repeated window drives the loss down") {
    nn::UNet<float> net(nn::UNetConfig::tiny());
    DiffusionConfig dc;
    auto sched = build_schedule(dc);
    TrainConfig tc;
    tc.batch_size = 4;
    tc.seed = 21;
    tc.jobs = 2;
    tc.learning_rate = 3e-4;

    TrainState st;
    st.params = nn::init_params(net, tc.seed);
    st.opt.m.assign(static_cast<size_t>(net.param_count()), 0.0f);
    st.opt.v.assign(static_cast<size_t>(net.param_count()), 0.0f);

    Rng rng(22);
    FTensor window = random_window(rng, 16);
    std::vector<const FTensor*> batch(4, &window);

    double last = 0.0;
    for (int i = 0; i < 500; ++i) last = train_step(net, st, batch, sched, tc);
    CHECK(last < 0.5);
}

TEST_CASE("train_loop is reproducible and resume matches uninterrupted run") {
    nn::UNet<float> net(nn::UNetConfig::tiny());
    DiffusionConfig dc;
    auto sched = build_schedule(dc);
    TrainConfig tc;
    tc.batch_size = 3;
    tc.total_steps = 12;
    tc.checkpoint_every = 6;
    tc.seed = 31;
    tc.jobs = 2;

    Rng rng(32);
    std::vector<FTensor> data;
    for (int i = 0; i < 7; ++i) data.push_back(random_window(rng, 16));

    const auto dir_a = temp_dir("loop_a");
    const auto dir_b = temp_dir("loop_b");
    auto ra = train_loop(net, data, sched, tc, dir_a, {});
    auto rb = train_loop(net, data, sched, tc, dir_b, {});
    REQUIRE(ra.log.size() == rb.log.size());
    for (size_t i = 0; i < ra.log.size(); ++i) CHECK(ra.log[i].loss == rb.log[i].loss);

    // resume from the mid checkpoint and compare the final weights bitwise
    const auto dir_c = temp_dir("loop_c");
    auto rc = train_loop(net, data, sched, tc, dir_c, {}, dir_a + "/ckpt_6.bin");
    CHECK(rc.log.size() == 6);
    for (size_t i = 0; i < rc.log.size(); ++i)
        CHECK(rc.log[i].loss == ra.log[i + 6].loss);

    auto cka = load_checkpoint(ra.final_checkpoint);
    auto ckc = load_checkpoint(rc.final_checkpoint);
    CHECK(cka.params.weights == ckc.params.weights);
    CHECK(cka.params.ema == ckc.params.ema);
    CHECK(cka.adam_m == ckc.adam_m);

    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
    std::filesystem::remove_all(dir_c);
}

TEST_CASE("checkpoints round-trip bit-exactly") {
    nn::UNet<float> net(nn::UNetConfig::tiny());
    Checkpoint ck;
    ck.unet = net.config();
    ck.params = nn::init_params(net, 55);
    ck.params.step = 777;
    ck.has_adam = true;
    ck.adam_m.assign(ck.params.weights.size(), 0.25f);
    ck.adam_v.assign(ck.params.weights.size(), 0.5f);
    ck.extra = {{"note", "roundtrip"}};

    const auto dir = temp_dir("ckpt");
    const std::string path = dir + "/c.bin";
    save_checkpoint(path, ck);
    auto rt = load_checkpoint(path);
    CHECK(rt.params.weights == ck.params.weights);
    CHECK(rt.params.ema == ck.params.ema);
    CHECK(rt.params.step == 777);
    CHECK(rt.adam_m == ck.adam_m);
    CHECK(rt.adam_v == ck.adam_v);
    CHECK(rt.unet.input_size == 16);
    CHECK(rt.extra.at("note") == "roundtrip");
    std::filesystem::remove_all(dir);
}

TEST_CASE("empty dataset and bad config are rejected") {
    nn::UNet<float> net(nn::UNetConfig::tiny());
    DiffusionConfig dc;
    auto sched = build_schedule(dc);
    TrainConfig tc;
    std::vector<FTensor> empty;
    CHECK_THROWS(train_loop(net, empty, sched, tc, temp_dir("bad"), {}));

    TrainConfig bad;
    bad.ema_rate = 1.5;
    CHECK_THROWS(bad.validate());
    bad = TrainConfig{};
    bad.learning_rate = 0;
    CHECK_THROWS(bad.validate());
}
