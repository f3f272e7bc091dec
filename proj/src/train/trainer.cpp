#include "anodiff/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "anodiff/diffusion/sampler.hpp"
#include "anodiff/util/csv.hpp"
#include "anodiff/util/rng.hpp"
#include "anodiff/util/threading.hpp"

namespace anodiff {

void TrainConfig::validate() const {
    if (!(learning_rate > 0)) throw std::invalid_argument("train: learning_rate must be > 0");
    if (!(ema_rate > 0 && ema_rate < 1))
        throw std::invalid_argument("train: ema_rate must be in (0,1)");
    if (batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (total_steps < 1) throw std::invalid_argument("train: total_steps must be >= 1");
    if (checkpoint_every < 1) throw std::invalid_argument("train: checkpoint_every must be >= 1");
    if (grad_clip < 0) throw std::invalid_argument("train: grad_clip must be >= 0");
}

void adam_step(AdamState& st, std::vector<float>& w, const std::vector<float>& g,
               double lr) {
    if (st.m.size() != w.size()) st.m.assign(w.size(), 0.0f);
    if (st.v.size() != w.size()) st.v.assign(w.size(), 0.0f);
    ++st.steps;
    const double b1 = st.beta1, b2 = st.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(st.steps));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(st.steps));
    for (size_t i = 0; i < w.size(); ++i) {
        const double gi = g[i];
        const double m = b1 * st.m[i] + (1.0 - b1) * gi;
        const double v = b2 * st.v[i] + (1.0 - b2) * gi * gi;
        st.m[i] = static_cast<float>(m);
        st.v[i] = static_cast<float>(v);
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        w[i] = static_cast<float>(w[i] - lr * mhat / (std::sqrt(vhat) + st.eps));
    }
}

void ema_update(std::vector<float>& ema, const std::vector<float>& w, double rate) {
    if (ema.size() != w.size()) throw std::invalid_argument("ema: size mismatch");
    const float r = static_cast<float>(rate);
    for (size_t i = 0; i < w.size(); ++i)
        ema[i] = r * ema[i] + (1.0f - r) * w[i];
}

std::vector<int64_t> batch_indices(uint64_t seed, int64_t step, int batch_size,
                                   int64_t dataset_size) {
    std::vector<int64_t> idx(static_cast<size_t>(batch_size));
    int64_t cached_epoch = -1;
    std::vector<int64_t> perm;
    for (int j = 0; j < batch_size; ++j) {
        const int64_t global = step * batch_size + j;
        const int64_t epoch = global / dataset_size;
        if (epoch != cached_epoch) {
            perm.resize(static_cast<size_t>(dataset_size));
            std::iota(perm.begin(), perm.end(), 0);
            Rng rng(Rng::derive(seed, 0x0dafull) + static_cast<uint64_t>(epoch));
            for (int64_t i = dataset_size - 1; i > 0; --i)
                std::swap(perm[static_cast<size_t>(i)],
                          perm[static_cast<size_t>(rng.uniform_int(0, i))]);
            cached_epoch = epoch;
        }
        idx[static_cast<size_t>(j)] = perm[static_cast<size_t>(global % dataset_size)];
    }
    return idx;
}

double train_step(const nn::UNet<float>& net, TrainState& st,
                  const std::vector<const FTensor*>& batch,
                  const NoiseSchedule& sched, const TrainConfig& cfg) {
    const int B = static_cast<int>(batch.size());
    if (B == 0) throw std::invalid_argument("train: empty batch");
    const int W = net.config().input_size;
    const int64_t px = static_cast<int64_t>(W) * W;
    const int64_t n_total = static_cast<int64_t>(B) * px;
    const int T = sched.total_steps();

    // Draw all stochastic inputs up front from a per-step stream.
    Rng rng(Rng::derive(cfg.seed, 0x401feull) + static_cast<uint64_t>(st.step));
    std::vector<int> ts(static_cast<size_t>(B));
    std::vector<FTensor> eps(static_cast<size_t>(B));
    std::vector<FTensor> xt(static_cast<size_t>(B));
    for (int i = 0; i < B; ++i) {
        ts[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(1, T));
        FTensor& e = eps[static_cast<size_t>(i)];
        e.resize({W, W});
        rng.fill_normal(e.data(), e.numel());
        const double abar = sched.alpha_bar[static_cast<size_t>(ts[static_cast<size_t>(i)])];
        const float cs = static_cast<float>(std::sqrt(abar));
        const float cn = static_cast<float>(std::sqrt(1.0 - abar));
        FTensor& x = xt[static_cast<size_t>(i)];
        x.resize({W, W});
        const FTensor& x0 = *batch[static_cast<size_t>(i)];
        for (int64_t j = 0; j < px; ++j) x[j] = cs * x0[j] + cn * e[j];
    }

    const int jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();
    const int chunks = std::max(1, std::min(jobs, B));
    std::vector<std::vector<float>> grad_buf(static_cast<size_t>(chunks));
    std::vector<double> losses(static_cast<size_t>(B), 0.0);
    const float* weights = st.params.weights.data();
    const double g_scale = 2.0 / static_cast<double>(n_total);

    parallel_chunks(B, chunks, [&](int chunk, int64_t begin, int64_t end) {
        auto& g = grad_buf[static_cast<size_t>(chunk)];
        g.assign(static_cast<size_t>(net.param_count()), 0.0f);
        nn::UNetCache<float> cache;
        for (int64_t i = begin; i < end; ++i) {
            const FTensor pred =
                net.forward(weights, xt[static_cast<size_t>(i)], ts[static_cast<size_t>(i)], &cache);
            FTensor diff(W, W);
            const FTensor& e = eps[static_cast<size_t>(i)];
            double sq = 0.0;
            for (int64_t j = 0; j < px; ++j) {
                const float d = pred[j] - e[j];
                diff[j] = static_cast<float>(d * g_scale);
                sq += static_cast<double>(d) * d;
            }
            losses[static_cast<size_t>(i)] = sq;
            net.backward(weights, cache, diff, g.data());
        }
    });

    // fixed-order reduction keeps runs reproducible for a given jobs setting
    std::vector<float>& grads = grad_buf[0];
    for (int c = 1; c < chunks; ++c)
        kern::add(static_cast<int64_t>(grads.size()), grad_buf[static_cast<size_t>(c)].data(),
                  grads.data());

    double loss = 0.0;
    for (double l : losses) loss += l;
    loss /= static_cast<double>(n_total);
    if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at step " + std::to_string(st.step) +
                                 " (diverged or bad input)");

    if (cfg.grad_clip > 0) {
        const double norm =
            std::sqrt(static_cast<double>(kern::sqsum(static_cast<int64_t>(grads.size()), grads.data())));
        if (norm > cfg.grad_clip)
            kern::scale(static_cast<int64_t>(grads.size()),
                        static_cast<float>(cfg.grad_clip / norm), grads.data());
    }

    adam_step(st.opt, st.params.weights, grads, cfg.learning_rate);
    ema_update(st.params.ema, st.params.weights, cfg.ema_rate);
    ++st.step;
    st.params.step = st.step;
    return loss;
}

namespace {

void write_checkpoint_file(const std::string& path, const nn::UNet<float>& net,
                           const TrainState& st, const nlohmann::json& echo) {
    Checkpoint ck;
    ck.unet = net.config();
    ck.params = st.params;
    ck.has_adam = true;
    ck.adam_m = st.opt.m;
    ck.adam_v = st.opt.v;
    ck.extra = echo;
    save_checkpoint(path, ck);
}

}  // namespace

TrainLoopResult train_loop(const nn::UNet<float>& net,
                           const std::vector<FTensor>& windows,
                           const NoiseSchedule& sched, const TrainConfig& cfg,
                           const std::string& run_dir, const nlohmann::json& config_echo,
                           const std::string& resume_from) {
    cfg.validate();
    if (windows.empty()) throw std::invalid_argument("train: empty dataset");
    namespace fs = std::filesystem;
    fs::create_directories(run_dir);

    TrainState st;
    if (resume_from.empty()) {
        st.params = nn::init_params(net, cfg.seed);
        st.opt.m.assign(static_cast<size_t>(net.param_count()), 0.0f);
        st.opt.v.assign(static_cast<size_t>(net.param_count()), 0.0f);
    } else {
        Checkpoint ck = load_checkpoint(resume_from);
        if (ck.params.weights.size() != static_cast<size_t>(net.param_count()))
            throw std::runtime_error("train: checkpoint does not match network");
        if (!ck.has_adam)
            throw std::runtime_error("train: checkpoint has no optimizer state to resume");
        st.params = std::move(ck.params);
        st.opt.m = std::move(ck.adam_m);
        st.opt.v = std::move(ck.adam_v);
        st.opt.steps = st.params.step;
        st.step = st.params.step;
    }

    const std::string log_path = run_dir + "/train_log.csv";
    std::ofstream log(log_path, resume_from.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("train: cannot write " + log_path);
    if (resume_from.empty()) log << "step,loss,wall_ms\n";

    TrainLoopResult result;
    std::vector<const FTensor*> batch(static_cast<size_t>(cfg.batch_size));
    while (st.step < cfg.total_steps) {
        const auto t0 = std::chrono::steady_clock::now();
        const auto idx = batch_indices(cfg.seed, st.step, cfg.batch_size,
                                       static_cast<int64_t>(windows.size()));
        for (int j = 0; j < cfg.batch_size; ++j)
            batch[static_cast<size_t>(j)] = &windows[static_cast<size_t>(idx[static_cast<size_t>(j)])];
        const double loss = train_step(net, st, batch, sched, cfg);
        const double ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        log << st.step << ',' << fmt_double(loss, 9) << ',' << fmt_double(ms, 6) << '\n';
        result.log.push_back({st.step, loss, ms});
        if (st.step % cfg.checkpoint_every == 0 && st.step < cfg.total_steps) {
            write_checkpoint_file(run_dir + "/ckpt_" + std::to_string(st.step) + ".bin", net,
                                  st, config_echo);
            log.flush();
        }
    }

    result.final_checkpoint = run_dir + "/ckpt_" + std::to_string(st.step) + ".bin";
    write_checkpoint_file(result.final_checkpoint, net, st, config_echo);
    return result;
}

}  // namespace anodiff
