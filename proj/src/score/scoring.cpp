#include "anodiff/score/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <stdexcept>

#include <json.hpp>

#include "anodiff/eval/metrics.hpp"

namespace anodiff {

void AFConfig::validate() const {
    auto check = [](const AFParams& p) {
        if (!(p.k_fraction > 0.0 && p.k_fraction <= 1.0))
            throw std::invalid_argument("af: k_fraction must be in (0,1]");
    };
    check(defaults);
    for (const auto& [k, v] : per_machine) check(v);
}

namespace {

int64_t topk_count(double k_fraction, int64_t n) {
    int64_t k = static_cast<int64_t>(std::llround(k_fraction * static_cast<double>(n)));
    return std::clamp<int64_t>(k, 1, n);
}

// Sum of the k largest activations, accumulated in descending order so the
// result is bit-identical to a full-sort reference.
double topk_sum(std::vector<double>& act, int64_t k) {
    const int64_t n = static_cast<int64_t>(act.size());
    if (k < n)
        std::nth_element(act.begin(), act.begin() + k - 1, act.end(), std::greater<>());
    std::sort(act.begin(), act.begin() + k, std::greater<>());
    double s = 0.0;
    for (int64_t i = 0; i < k; ++i) s += act[static_cast<size_t>(i)];
    return s;
}

}  // namespace

std::pair<double, AnomalyMap> af_score(const DTensor& x, const DTensor& xhat,
                                       const AFParams& af) {
    if (!x.same_shape(xhat)) throw std::invalid_argument("af_score: shape mismatch");
    if (!(af.k_fraction > 0.0 && af.k_fraction <= 1.0))
        throw std::invalid_argument("af_score: k_fraction must be in (0,1]");
    const int64_t n = x.numel();
    AnomalyMap map;
    map.residual.resize(x.dims());
    map.filtered.resize(x.dims());

    std::vector<double> act(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) {
        const double d = x[i] - xhat[i];
        map.residual[i] = d;
        act[static_cast<size_t>(i)] = af.use_relu ? std::max(d, 0.0) : std::abs(d);
    }
    const int64_t k = topk_count(af.k_fraction, n);

    std::vector<double> sorted = act;
    const double total = topk_sum(sorted, k);
    const double kth = sorted[static_cast<size_t>(k - 1)];

    // mask: everything above the k-th value, then ties in scan order
    int64_t remaining = k;
    for (int64_t i = 0; i < n; ++i)
        if (act[static_cast<size_t>(i)] > kth) {
            map.filtered[i] = act[static_cast<size_t>(i)];
            --remaining;
        }
    for (int64_t i = 0; i < n && remaining > 0; ++i)
        if (act[static_cast<size_t>(i)] == kth && map.filtered[i] == 0.0) {
            map.filtered[i] = act[static_cast<size_t>(i)];
            --remaining;
        }
    return {total / static_cast<double>(n), std::move(map)};
}

double af_score_from_residual(const DTensor& residual, const AFParams& af) {
    const int64_t n = residual.numel();
    std::vector<double> act(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i)
        act[static_cast<size_t>(i)] =
            af.use_relu ? std::max(residual[i], 0.0) : std::abs(residual[i]);
    return topk_sum(act, topk_count(af.k_fraction, n)) / static_cast<double>(n);
}

double mae_score(const DTensor& x, const DTensor& xhat) {
    if (!x.same_shape(xhat)) throw std::invalid_argument("mae_score: shape mismatch");
    double s = 0.0;
    for (int64_t i = 0; i < x.numel(); ++i) s += std::abs(x[i] - xhat[i]);
    return s / static_cast<double>(x.numel());
}

double mae_score_from_residual(const DTensor& residual) {
    double s = 0.0;
    for (int64_t i = 0; i < residual.numel(); ++i) s += std::abs(residual[i]);
    return s / static_cast<double>(residual.numel());
}

DenoiserFn make_denoiser(const nn::UNet<float>& net,
                         const std::vector<float>& ema_weights) {
    if (ema_weights.size() != static_cast<size_t>(net.param_count()))
        throw std::invalid_argument("denoiser: weight count mismatch");
    const float* w = ema_weights.data();
    const nn::UNet<float>* n = &net;
    return [n, w](const DTensor& x_t, int t) -> DTensor {
        FTensor xf = x_t.cast<float>();
        FTensor ef = n->forward(w, xf, t);
        return ef.cast<double>();
    };
}

namespace {
double aggregate(const std::vector<double>& v, bool use_max) {
    if (v.empty()) return 0.0;
    if (use_max) return *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}
}  // namespace

ClipScore score_clip(const FBankFeature& f, const nn::UNet<float>& net,
                     const std::vector<float>& ema_weights, const DiffusionConfig& dcfg,
                     const NoiseSchedule& sched, const AFParams& af,
                     const ScoreOptions& opts) {
    const int W = net.config().input_size;
    if (W != f.n_mels)
        throw std::invalid_argument("score: model input size " + std::to_string(W) +
                                    " != feature mel count " + std::to_string(f.n_mels));
    const WindowBatch wb = slide_windows(f, W, opts.hop);
    const DenoiserFn den = make_denoiser(net, ema_weights);

    ClipScore out;
    out.clip_id = f.clip_id;
    out.seed = opts.seed;
    for (size_t i = 0; i < wb.windows.size(); ++i) {
        const DTensor x0 = wb.windows[i].cast<double>();
        const uint64_t wseed = Rng::derive(opts.seed, static_cast<uint64_t>(i));
        ReconstructResult rec = reconstruct(x0, dcfg, sched, den, wseed);
        out.denoiser_calls = rec.denoiser_calls;

        DTensor residual(x0.dims());
        for (int64_t j = 0; j < x0.numel(); ++j) residual[j] = x0[j] - rec.x0_hat[j];

        out.window_scores.push_back(af_score_from_residual(residual, af));
        out.window_mae.push_back(mae_score_from_residual(residual));
        out.origins.push_back(wb.origin_frames[i]);
        if (opts.keep_maps) {
            auto [s, map] = af_score(x0, rec.x0_hat, af);
            map.window_origin = wb.origin_frames[i];
            out.maps.push_back(std::move(map));
        }
        if (opts.keep_residuals) out.residuals.push_back(std::move(residual));
    }
    out.score = aggregate(out.window_scores, opts.aggregate_max);
    out.mae = aggregate(out.window_mae, opts.aggregate_max);
    return out;
}

std::vector<SweepRow> af_sweep(const std::vector<ResidualCacheEntry>& cache,
                               const std::vector<double>& k_values,
                               const std::vector<bool>& relu_options, double pauc_p,
                               bool aggregate_max) {
    if (cache.empty()) throw std::invalid_argument("sweep: empty residual cache");

    std::vector<std::string> machines;
    for (const auto& e : cache)
        if (std::find(machines.begin(), machines.end(), e.machine_type) == machines.end())
            machines.push_back(e.machine_type);
    std::sort(machines.begin(), machines.end());

    std::vector<SweepRow> rows;
    for (const std::string& machine : machines) {
        for (bool relu : relu_options) {
            for (double k : k_values) {
                AFParams af{k, relu};
                std::vector<double> src_n, src_a, tgt_n, tgt_a, all_n, all_a;
                for (const auto& e : cache) {
                    if (e.machine_type != machine) continue;
                    if (e.label != "normal" && e.label != "anomaly") continue;
                    std::vector<double> ws;
                    ws.reserve(e.residuals.size());
                    for (const auto& r : e.residuals)
                        ws.push_back(af_score_from_residual(r, af));
                    const double s = aggregate(ws, aggregate_max);
                    const bool anom = e.label == "anomaly";
                    (anom ? all_a : all_n).push_back(s);
                    if (e.domain == "source") (anom ? src_a : src_n).push_back(s);
                    if (e.domain == "target") (anom ? tgt_a : tgt_n).push_back(s);
                }
                SweepRow row;
                row.machine_type = machine;
                row.k_fraction = k;
                row.use_relu = relu;
                row.auc_all = (!all_n.empty() && !all_a.empty()) ? auc(all_n, all_a) : 0.0;
                row.sauc = (!src_n.empty() && !src_a.empty()) ? auc(src_n, src_a) : 0.0;
                row.tauc = (!tgt_n.empty() && !tgt_a.empty()) ? auc(tgt_n, tgt_a) : 0.0;
                row.pauc = (!all_n.empty() && !all_a.empty()) ? pauc(all_n, all_a, pauc_p) : 0.0;
                rows.push_back(row);
            }
        }
    }
    return rows;
}

// ---- residual cache I/O ----

namespace {
constexpr char kCacheMagic[4] = {'A', 'D', 'R', 'C'};
constexpr uint32_t kCacheVersion = 1;
}  // namespace

void save_residual_cache(const std::string& path,
                         const std::vector<ResidualCacheEntry>& cache) {
    nlohmann::json dir = nlohmann::json::array();
    for (const auto& e : cache) {
        nlohmann::json je = {{"clip_id", e.clip_id},
                             {"machine_type", e.machine_type},
                             {"domain", e.domain},
                             {"label", e.label},
                             {"windows", nlohmann::json::array()}};
        for (const auto& r : e.residuals)
            je["windows"].push_back({r.dim(0), r.dim(1)});
        dir.push_back(std::move(je));
    }
    const std::string hs = dir.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cache: cannot write " + path);
    out.write(kCacheMagic, 4);
    out.write(reinterpret_cast<const char*>(&kCacheVersion), sizeof(kCacheVersion));
    const uint64_t hlen = hs.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const auto& e : cache)
        for (const auto& r : e.residuals)
            out.write(reinterpret_cast<const char*>(r.data()),
                      static_cast<std::streamsize>(r.numel() * sizeof(double)));
    if (!out) throw std::runtime_error("cache: write failed: " + path);
}

std::vector<ResidualCacheEntry> load_residual_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cache: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    uint32_t ver = 0;
    in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
    if (!in || std::memcmp(magic, kCacheMagic, 4) != 0 || ver != kCacheVersion)
        throw std::runtime_error("cache: bad header: " + path);
    uint64_t hlen = 0;
    in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    const nlohmann::json dir = nlohmann::json::parse(hs);

    std::vector<ResidualCacheEntry> cache;
    for (const auto& je : dir) {
        ResidualCacheEntry e;
        e.clip_id = je.at("clip_id").get<std::string>();
        e.machine_type = je.at("machine_type").get<std::string>();
        e.domain = je.at("domain").get<std::string>();
        e.label = je.at("label").get<std::string>();
        for (const auto& shape : je.at("windows")) {
            DTensor r(shape[0].get<int64_t>(), shape[1].get<int64_t>());
            in.read(reinterpret_cast<char*>(r.data()),
                    static_cast<std::streamsize>(r.numel() * sizeof(double)));
            if (!in) throw std::runtime_error("cache: truncated data: " + path);
            e.residuals.push_back(std::move(r));
        }
        cache.push_back(std::move(e));
    }
    return cache;
}

}  // namespace anodiff
