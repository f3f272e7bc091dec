// anodiff: diffusion-based anomalous sound detection pipeline.
// Subcommands: generate | train | score | eval | sweep | viz | bench

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include "anodiff/audio/features.hpp"
#include "anodiff/audio/wav.hpp"
#include "anodiff/data/dataset.hpp"
#include "anodiff/data/synth.hpp"
#include "anodiff/diffusion/sampler.hpp"
#include "anodiff/eval/metrics.hpp"
#include "anodiff/nn/checkpoint.hpp"
#include "anodiff/score/scoring.hpp"
#include "anodiff/train/trainer.hpp"
#include "anodiff/util/config.hpp"
#include "anodiff/util/csv.hpp"
#include "anodiff/util/pgm.hpp"
#include "anodiff/util/threading.hpp"

namespace fs = std::filesystem;
using namespace anodiff;

namespace {

// exit code 2: usage / configuration problems; 1: internal failures
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

RunConfig load_config_or_default(const std::string& path, bool toy) {
    RunConfig cfg = path.empty() ? default_run_config() : load_run_config(path);
    if (path.empty()) apply_env_overrides(cfg);
    if (toy) cfg.apply_toy_profile();
    return cfg;
}

std::vector<ClipMeta> scan_or_die(const std::string& root, const std::string& machine,
                                  const std::string& split) {
    if (root.empty()) throw UsageError("no dataset path (flag --data or paths.dataset)");
    if (!fs::is_directory(root)) throw UsageError("dataset directory not found: " + root);
    std::vector<std::string> warnings;
    auto clips = scan_dataset(root, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::vector<ClipMeta> out;
    for (auto& c : clips) {
        if (!machine.empty() && c.machine_type != machine) continue;
        if (!split.empty() && c.split != split) continue;
        out.push_back(std::move(c));
    }
    if (out.empty())
        throw UsageError("no clips in " + root + " for split '" + split + "'" +
                         (machine.empty() ? "" : " machine '" + machine + "'"));
    return out;
}

FBankFeature clip_feature(const ClipMeta& meta, const FeatureConfig& fc) {
    const Waveform w = load_wav(meta.path, fc.sample_rate);
    return extract_fbank(w, fc, meta.clip_id);
}

double clip_seconds(const ClipMeta& meta, int sample_rate) {
    const Waveform w = load_wav(meta.path, sample_rate);
    return static_cast<double>(w.samples.size()) / sample_rate;
}

// ---------------- generate ----------------

int cmd_generate(const std::string& out, SynthSpec spec) {
    if (out.empty()) throw UsageError("generate: --out is required");
    auto mf = synth_generate(spec, out);
    std::cout << "generated " << mf.clips.size() << " clips under " << out << "\n"
              << "manifest: " << mf.manifest_csv << "\n"
              << "masks:    " << mf.masks_csv << "\n";
    return 0;
}

// ---------------- train ----------------

int cmd_train(RunConfig cfg, const std::string& machine, const std::string& resume) {
    cfg.validate();
    auto clips = scan_or_die(cfg.dataset_path, machine, "train");

    // training windows: non-overlapping (hop = window) per the training recipe
    std::vector<std::vector<FTensor>> per_clip(clips.size());
    const int jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();
    parallel_chunks(static_cast<int64_t>(clips.size()), jobs,
                    [&](int, int64_t b, int64_t e) {
                        for (int64_t i = b; i < e; ++i) {
                            auto f = clip_feature(clips[static_cast<size_t>(i)], cfg.feature);
                            auto wb = slide_windows(f, cfg.unet.input_size, cfg.unet.input_size);
                            per_clip[static_cast<size_t>(i)] = std::move(wb.windows);
                        }
                    });
    std::vector<FTensor> windows;
    for (auto& pc : per_clip)
        for (auto& w : pc) windows.push_back(std::move(w));
    std::cout << "training on " << clips.size() << " clips, " << windows.size()
              << " windows\n";

    nn::UNet<float> net(cfg.unet);
    std::cout << "model parameters: " << net.param_count() << "\n";
    auto sched = build_schedule(cfg.diffusion);
    cfg.train.jobs = jobs;

    fs::create_directories(cfg.run_dir);
    write_config_snapshot(cfg, cfg.run_dir + "/config_snapshot.cfg");
    auto res = train_loop(net, windows, sched, cfg.train, cfg.run_dir,
                          run_config_to_json(cfg), resume);
    std::cout << "final checkpoint: " << res.final_checkpoint << "\n"
              << "log: " << cfg.run_dir << "/train_log.csv\n";
    return 0;
}

// ---------------- score ----------------

struct ScoredClip {
    ClipMeta meta;
    ClipScore result;
    AFParams af;
    double wall_ms = 0.0;
    double seconds = 0.0;
};

std::vector<ScoredClip> run_scoring(const RunConfig& cfg, const Checkpoint& ck,
                                    const std::vector<ClipMeta>& clips,
                                    bool keep_residuals) {
    nn::UNet<float> net(ck.unet);
    if (ck.params.weights.size() != static_cast<size_t>(net.param_count()))
        throw UsageError("checkpoint parameter count does not match its config");
    if (net.config().input_size != cfg.feature.n_mels)
        throw UsageError("checkpoint input size " +
                         std::to_string(net.config().input_size) +
                         " != feature.n_mels " + std::to_string(cfg.feature.n_mels) +
                         " (config/checkpoint mismatch)");
    auto sched = build_schedule(cfg.diffusion);

    std::vector<ScoredClip> out(clips.size());
    const int jobs = cfg.jobs > 0 ? cfg.jobs : default_jobs();
    std::mutex io_mutex;
    parallel_chunks(static_cast<int64_t>(clips.size()), jobs, [&](int, int64_t b, int64_t e) {
        for (int64_t i = b; i < e; ++i) {
            const auto& meta = clips[static_cast<size_t>(i)];
            const auto t0 = std::chrono::steady_clock::now();
            const Waveform w = load_wav(meta.path, cfg.feature.sample_rate);
            const auto f = extract_fbank(w, cfg.feature, meta.clip_id);
            ScoreOptions opts = cfg.score;
            opts.seed = Rng::derive(cfg.score.seed, static_cast<uint64_t>(i));
            opts.keep_residuals = keep_residuals;
            const AFParams af = cfg.af.lookup(meta.machine_type);
            ScoredClip sc;
            sc.meta = meta;
            sc.af = af;
            sc.seconds = static_cast<double>(w.samples.size()) / cfg.feature.sample_rate;
            sc.result = score_clip(f, net, ck.params.ema, cfg.diffusion, sched, af, opts);
            sc.wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - t0)
                             .count();
            out[static_cast<size_t>(i)] = std::move(sc);
            std::lock_guard<std::mutex> lock(io_mutex);
            std::cerr << "scored " << meta.clip_id << " (" << out[static_cast<size_t>(i)].result.window_scores.size()
                      << " windows)\n";
        }
    });
    return out;
}

int cmd_score(const RunConfig& cfg, const std::string& ckpt_path,
              const std::string& machine, const std::string& out_csv,
              const std::string& cache_path) {
    if (!fs::exists(ckpt_path)) throw UsageError("checkpoint not found: " + ckpt_path);
    if (out_csv.empty()) throw UsageError("score: --out is required");
    Checkpoint ck = load_checkpoint(ckpt_path);
    auto clips = scan_or_die(cfg.dataset_path, machine, "test");
    auto scored = run_scoring(cfg, ck, clips, !cache_path.empty());

    CsvWriter csv(out_csv, {"clip_id", "machine_type", "section", "domain", "label",
                            "score", "method", "k_fraction", "use_relu", "mae",
                            "denoiser_calls_per_window", "windows", "wall_ms", "rtf",
                            "seed"});
    for (const auto& sc : scored) {
        const double rtf = sc.wall_ms / 1000.0 / sc.seconds;
        csv.row({sc.meta.clip_id, sc.meta.machine_type, sc.meta.section, sc.meta.domain,
                 sc.meta.label, fmt_double(sc.result.score, 12), "af",
                 fmt_double(sc.af.k_fraction, 6), sc.af.use_relu ? "true" : "false",
                 fmt_double(sc.result.mae, 12),
                 std::to_string(sc.result.denoiser_calls),
                 std::to_string(sc.result.window_scores.size()),
                 fmt_double(sc.wall_ms, 6), fmt_double(rtf, 6),
                 std::to_string(sc.result.seed)});
    }
    std::cout << "wrote " << scored.size() << " rows to " << out_csv << "\n";

    if (!cache_path.empty()) {
        std::vector<ResidualCacheEntry> cache;
        for (auto& sc : scored) {
            ResidualCacheEntry e;
            e.clip_id = sc.meta.clip_id;
            e.machine_type = sc.meta.machine_type;
            e.domain = sc.meta.domain;
            e.label = sc.meta.label;
            e.residuals = std::move(sc.result.residuals);
            cache.push_back(std::move(e));
        }
        save_residual_cache(cache_path, cache);
        std::cout << "residual cache: " << cache_path << "\n";
    }
    return 0;
}

// ---------------- eval ----------------

int cmd_eval(const std::string& scores_csv, const std::string& manifest_csv, double p,
             bool mixed, const std::string& out_csv) {
    if (!fs::exists(scores_csv)) throw UsageError("scores file not found: " + scores_csv);
    CsvTable t = read_csv(scores_csv);
    const int c_id = t.col("clip_id"), c_machine = t.col("machine_type"),
              c_score = t.col("score");
    const int c_section = t.has_col("section") ? t.col("section") : -1;
    const int c_domain = t.has_col("domain") ? t.col("domain") : -1;
    const int c_label = t.has_col("label") ? t.col("label") : -1;

    // optional manifest join fills/overrides domain and label by clip_id
    std::map<std::string, std::pair<std::string, std::string>> truth;
    if (!manifest_csv.empty()) {
        CsvTable m = read_csv(manifest_csv);
        const int m_id = m.col("clip_id"), m_dom = m.col("domain"), m_lab = m.col("label");
        for (const auto& r : m.rows)
            truth[r[static_cast<size_t>(m_id)]] = {r[static_cast<size_t>(m_dom)],
                                                   r[static_cast<size_t>(m_lab)]};
    }

    std::vector<ScoreRecord> records;
    int skipped = 0;
    for (const auto& r : t.rows) {
        ScoreRecord rec;
        rec.clip_id = r[static_cast<size_t>(c_id)];
        rec.machine_type = r[static_cast<size_t>(c_machine)];
        rec.section = c_section >= 0 ? r[static_cast<size_t>(c_section)] : "00";
        rec.domain = c_domain >= 0 ? r[static_cast<size_t>(c_domain)] : "";
        rec.label = c_label >= 0 ? r[static_cast<size_t>(c_label)] : "";
        rec.score = std::stod(r[static_cast<size_t>(c_score)]);
        if (auto it = truth.find(rec.clip_id); it != truth.end()) {
            rec.domain = it->second.first;
            rec.label = it->second.second;
        }
        if (rec.label != "normal" && rec.label != "anomaly") {
            ++skipped;
            continue;
        }
        records.push_back(std::move(rec));
    }
    if (records.empty()) throw UsageError("eval: no labeled records (need a manifest?)");
    if (skipped) std::cerr << "warning: skipped " << skipped << " unlabeled rows\n";

    auto rep = evaluate(records, p, mixed);
    for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";

    std::printf("%-16s %-8s %8s %8s %8s\n", "machine", "section", "sAUC", "tAUC", "pAUC");
    for (const auto& m : rep.per_machine)
        std::printf("%-16s %-8s %8.4f %8.4f %8.4f\n", m.machine_type.c_str(),
                    m.section.c_str(), m.sauc, m.tauc, m.pauc);
    std::printf("hmean over %zu metrics: %.4f\n", rep.per_machine.size() * 3, rep.hmean);

    if (!out_csv.empty()) {
        CsvWriter csv(out_csv, {"machine_type", "section", "sauc", "tauc", "pauc",
                                "n_source_normal", "n_source_anomaly", "n_target_normal",
                                "n_target_anomaly"});
        for (const auto& m : rep.per_machine)
            csv.row({m.machine_type, m.section, fmt_double(m.sauc, 9),
                     fmt_double(m.tauc, 9), fmt_double(m.pauc, 9),
                     std::to_string(m.n_source_normal), std::to_string(m.n_source_anomaly),
                     std::to_string(m.n_target_normal), std::to_string(m.n_target_anomaly)});
        csv.row({"hmean", "", fmt_double(rep.hmean, 9), "", "", "", "", "", ""});
    }
    return 0;
}

// ---------------- sweep ----------------

int cmd_sweep(const std::string& cache_path, const std::string& out_csv, double k_min,
              double k_max, double k_step, double p, const std::string& relu_mode) {
    if (!fs::exists(cache_path)) throw UsageError("residual cache not found: " + cache_path);
    if (out_csv.empty()) throw UsageError("sweep: --out is required");
    auto cache = load_residual_cache(cache_path);

    std::vector<double> ks;
    for (double k = k_min; k <= k_max + 1e-12; k += k_step) ks.push_back(k);
    std::vector<bool> relus;
    if (relu_mode == "both") relus = {false, true};
    else if (relu_mode == "on") relus = {true};
    else if (relu_mode == "off") relus = {false};
    else throw UsageError("sweep: --relu must be both|on|off");

    auto rows = af_sweep(cache, ks, relus, p);
    CsvWriter csv(out_csv, {"machine_type", "k_fraction", "use_relu", "sauc", "tauc",
                            "pauc", "auc_all"});
    for (const auto& r : rows)
        csv.row({r.machine_type, fmt_double(r.k_fraction, 6), r.use_relu ? "true" : "false",
                 fmt_double(r.sauc, 9), fmt_double(r.tauc, 9), fmt_double(r.pauc, 9),
                 fmt_double(r.auc_all, 9)});
    std::cout << "wrote " << rows.size() << " sweep rows to " << out_csv << "\n";
    return 0;
}

// ---------------- viz ----------------

int cmd_viz(const RunConfig& cfg, const std::string& ckpt_path, const std::string& clip,
            const std::string& out_dir) {
    if (!fs::exists(ckpt_path)) throw UsageError("checkpoint not found: " + ckpt_path);
    if (!fs::exists(clip)) throw UsageError("clip not found: " + clip);
    if (out_dir.empty()) throw UsageError("viz: --out is required");
    fs::create_directories(out_dir);

    Checkpoint ck = load_checkpoint(ckpt_path);
    nn::UNet<float> net(ck.unet);
    if (net.config().input_size != cfg.feature.n_mels)
        throw UsageError("checkpoint/feature geometry mismatch");
    auto sched = build_schedule(cfg.diffusion);

    const Waveform w = load_wav(clip, cfg.feature.sample_rate);
    const std::string clip_id = fs::path(clip).stem().string();
    const auto f = extract_fbank(w, cfg.feature, clip_id);
    const int W = net.config().input_size;

    // non-overlapping windows stitch back into a clip-level image
    const auto wb = slide_windows(f, W, W);
    const auto den = make_denoiser(net, ck.params.ema);
    ClipMeta meta;
    parse_clip_name(fs::path(clip).filename().string(), meta);
    const AFParams af = cfg.af.lookup(meta.machine_type.empty() ? "" : meta.machine_type);

    DTensor original(W, f.n_frames), recon(W, f.n_frames), mae_map(W, f.n_frames),
        af_map(W, f.n_frames);
    for (size_t i = 0; i < wb.windows.size(); ++i) {
        const DTensor x0 = wb.windows[i].cast<double>();
        auto rec = reconstruct(x0, cfg.diffusion, sched, den,
                               Rng::derive(cfg.score.seed, static_cast<uint64_t>(i)));
        auto [s, map] = af_score(x0, rec.x0_hat, af);
        const int base = wb.origin_frames[i];
        for (int m = 0; m < W; ++m)
            for (int j = 0; j < W && base + j < f.n_frames; ++j) {
                original.at(m, base + j) = x0.at(m, j);
                recon.at(m, base + j) = rec.x0_hat.at(m, j);
                mae_map.at(m, base + j) = std::abs(map.residual.at(m, j));
                af_map.at(m, base + j) = map.filtered.at(m, j);
            }
    }

    // shared intensity scale per pair
    double flo = 1e300, fhi = -1e300, mhi = 0.0;
    for (int64_t i = 0; i < original.numel(); ++i) {
        flo = std::min({flo, original[i], recon[i]});
        fhi = std::max({fhi, original[i], recon[i]});
        mhi = std::max({mhi, mae_map[i], af_map[i]});
    }
    write_pgm(out_dir + "/" + clip_id + "_original.pgm", original, flo, fhi);
    write_pgm(out_dir + "/" + clip_id + "_reconstruction.pgm", recon, flo, fhi);
    write_pgm(out_dir + "/" + clip_id + "_mae_map.pgm", mae_map, 0.0, mhi);
    write_pgm(out_dir + "/" + clip_id + "_af_map.pgm", af_map, 0.0, mhi);

    auto write_matrix_csv = [&](const std::string& name, const DTensor& m) {
        std::ofstream out(out_dir + "/" + clip_id + "_" + name + ".csv");
        out.precision(9);
        for (int64_t r = 0; r < m.dim(0); ++r) {
            for (int64_t c = 0; c < m.dim(1); ++c) out << (c ? "," : "") << m.at(r, c);
            out << '\n';
        }
    };
    write_matrix_csv("original", original);
    write_matrix_csv("reconstruction", recon);
    write_matrix_csv("mae_map", mae_map);
    write_matrix_csv("af_map", af_map);
    std::cout << "wrote 4 graymaps + 4 csv matrices for " << clip_id << " under "
              << out_dir << "\n";
    return 0;
}

// ---------------- schedule export ----------------

int cmd_export_schedule(const RunConfig& cfg, const std::string& out_csv) {
    auto s = build_schedule(cfg.diffusion);
    CsvWriter csv(out_csv, {"t", "beta", "alpha", "alpha_bar", "beta_tilde"});
    for (int t = 0; t <= s.total_steps(); ++t)
        csv.row({std::to_string(t), fmt_double(s.beta[static_cast<size_t>(t)], 12),
                 fmt_double(s.alpha[static_cast<size_t>(t)], 12),
                 fmt_double(s.alpha_bar[static_cast<size_t>(t)], 12),
                 fmt_double(s.beta_tilde[static_cast<size_t>(t)], 12)});
    std::cout << "wrote " << to_string(cfg.diffusion.schedule) << " schedule ("
              << s.total_steps() << " steps) to " << out_csv << "\n";
    return 0;
}

// ---------------- bench ----------------

int cmd_bench(RunConfig cfg, const std::string& ckpt_path, const std::string& machine,
              const std::string& out_csv, int n_clips) {
    if (!fs::exists(ckpt_path)) throw UsageError("checkpoint not found: " + ckpt_path);
    Checkpoint ck = load_checkpoint(ckpt_path);
    auto clips = scan_or_die(cfg.dataset_path, machine, "test");
    clips.resize(std::min<size_t>(clips.size(), static_cast<size_t>(n_clips)));

    struct Row {
        std::string sampler;
        int calls_per_window = 0;
        int64_t total_calls = 0;
        double wall_s = 0.0, audio_s = 0.0, rtf = 0.0, mean_score = 0.0;
    };
    std::vector<Row> rows;
    for (auto sampler : {SamplerKind::ddpm, SamplerKind::ddim}) {
        cfg.diffusion.sampler = sampler;
        Row row;
        row.sampler = to_string(sampler);
        const auto t0 = std::chrono::steady_clock::now();
        auto scored = run_scoring(cfg, ck, clips, false);
        row.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();
        for (const auto& sc : scored) {
            row.calls_per_window = sc.result.denoiser_calls;
            row.total_calls += sc.result.denoiser_calls *
                               static_cast<int64_t>(sc.result.window_scores.size());
            row.audio_s += sc.seconds;
            row.mean_score += sc.result.score / static_cast<double>(scored.size());
        }
        row.rtf = row.wall_s / row.audio_s;
        rows.push_back(row);
        std::printf("%s: %d calls/window, %lld total, %.2f s wall, RTF %.3f\n",
                    row.sampler.c_str(), row.calls_per_window,
                    static_cast<long long>(row.total_calls), row.wall_s, row.rtf);
    }
    const double call_ratio =
        static_cast<double>(rows[0].calls_per_window) / rows[1].calls_per_window;
    const double wall_ratio = rows[0].wall_s / rows[1].wall_s;
    std::printf("ddpm/ddim call ratio %.3f, wall ratio %.3f\n", call_ratio, wall_ratio);

    if (!out_csv.empty()) {
        CsvWriter csv(out_csv, {"sampler", "calls_per_window", "total_calls", "wall_s",
                                "audio_s", "rtf", "mean_score"});
        for (const auto& r : rows)
            csv.row({r.sampler, std::to_string(r.calls_per_window),
                     std::to_string(r.total_calls), fmt_double(r.wall_s, 6),
                     fmt_double(r.audio_s, 6), fmt_double(r.rtf, 6),
                     fmt_double(r.mean_score, 12)});
        csv.row({"ratio_ddpm_over_ddim", fmt_double(call_ratio, 6), "",
                 fmt_double(wall_ratio, 6), "", "", ""});
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"diffusion-based anomalous sound detection"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, ckpt, machine, cache, resume;
    std::string manifest, relu_mode = "both", clip, sampler_override;
    bool toy = false, mixed = false;
    int jobs = 0, bench_clips = 1, hop_override = -1;
    int64_t steps = -1;
    uint64_t seed = UINT64_MAX;
    double p = -1.0, k_min = -1, k_max = -1, k_step = -1;

    SynthSpec synth;
    std::string synth_kind = "added_tone";

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file");
        cmd->add_flag("--toy", toy, "use the desk-scale toy model profile");
        cmd->add_option("--jobs", jobs, "worker threads (default: cores)");
        cmd->add_option("--seed", seed, "override the config seed");
    };

    auto* g = app.add_subcommand("generate", "write a synthetic corpus");
    g->add_option("--out", out_path, "output directory")->required();
    g->add_option("--normal-train", synth.n_normal_train);
    g->add_option("--normal-test", synth.n_normal_test);
    g->add_option("--anomaly-test", synth.n_anomaly_test);
    g->add_option("--kind", synth_kind, "added_tone|dropped_band|transient_click");
    g->add_option("--gen-seed", synth.seed);
    g->add_option("--machine", synth.machine_type);
    g->add_option("--noise-floor", synth.noise_floor);
    g->add_option("--clip-seconds", synth.clip_seconds);

    auto* t = app.add_subcommand("train", "train the denoiser on normal clips");
    add_common(t);
    t->add_option("--data", data_dir, "dataset root");
    t->add_option("--machine", machine, "machine-type filter");
    t->add_option("--out", out_path, "run directory");
    t->add_option("--steps", steps, "override train.total_steps");
    t->add_option("--resume", resume, "checkpoint to resume from");

    auto* s = app.add_subcommand("score", "score test clips against a checkpoint");
    add_common(s);
    s->add_option("--ckpt", ckpt, "checkpoint path")->required();
    s->add_option("--data", data_dir, "dataset root");
    s->add_option("--machine", machine, "machine-type filter");
    s->add_option("--out", out_path, "output score CSV")->required();
    s->add_option("--cache", cache, "write residual cache for sweep/analysis");
    s->add_option("--sampler", sampler_override, "ddpm|ddim override");
    s->add_option("--hop", hop_override, "test window hop override");

    auto* e = app.add_subcommand("eval", "compute sAUC/tAUC/pAUC and hmean");
    e->add_option("--scores", clip, "score CSV")->required();
    e->add_option("--manifest", manifest, "manifest CSV with labels");
    e->add_option("--p", p, "pAUC false-positive budget (default 0.1)");
    e->add_flag("--mixed-anomalies", mixed, "pool anomalies across domains");
    e->add_option("--out", out_path, "report CSV");

    auto* sw = app.add_subcommand("sweep", "AF (K, ReLU) grid over cached residuals");
    sw->add_option("--cache", cache, "residual cache from score")->required();
    sw->add_option("--out", out_path, "sweep CSV")->required();
    sw->add_option("--k-min", k_min);
    sw->add_option("--k-max", k_max);
    sw->add_option("--k-step", k_step);
    sw->add_option("--p", p, "pAUC budget");
    sw->add_option("--relu", relu_mode, "both|on|off");

    auto* v = app.add_subcommand("viz", "write original/reconstruction/map graymaps");
    add_common(v);
    v->add_option("--ckpt", ckpt, "checkpoint path")->required();
    v->add_option("--clip", clip, "wav file")->required();
    v->add_option("--out", out_path, "output directory")->required();

    auto* sch = app.add_subcommand("schedule", "export the noise-schedule tables as CSV");
    add_common(sch);
    sch->add_option("--out", out_path, "output CSV")->required();
    std::string schedule_kind_override;
    sch->add_option("--schedule", schedule_kind_override, "linear|sigmoid override");

    auto* b = app.add_subcommand("bench", "ddpm vs ddim call counts and wall time");
    add_common(b);
    b->add_option("--ckpt", ckpt, "checkpoint path")->required();
    b->add_option("--data", data_dir, "dataset root");
    b->add_option("--machine", machine, "machine-type filter");
    b->add_option("--out", out_path, "timing CSV");
    b->add_option("--clips", bench_clips, "clips to score per sampler");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        if (err.get_exit_code() == 0) return app.exit(err);  // --help
        app.exit(err);
        return 2;
    }

    try {
        if (g->parsed()) {
            synth.anomaly_kind = anomaly_kind_from_string(synth_kind);
            return cmd_generate(out_path, synth);
        }

        RunConfig cfg = load_config_or_default(config_path, toy);
        if (jobs > 0) cfg.jobs = jobs;
        if (seed != UINT64_MAX) {
            cfg.train.seed = seed;
            cfg.score.seed = seed;
        }
        if (!data_dir.empty()) cfg.dataset_path = data_dir;
        if (p > 0) cfg.eval_p = p;

        if (t->parsed()) {
            if (steps > 0) cfg.train.total_steps = steps;
            if (!out_path.empty()) cfg.run_dir = out_path;
            return cmd_train(cfg, machine, resume);
        }
        if (s->parsed()) {
            if (!sampler_override.empty())
                cfg.diffusion.sampler = sampler_kind_from_string(sampler_override);
            if (hop_override > 0) cfg.score.hop = hop_override;
            cfg.validate();
            return cmd_score(cfg, ckpt, machine, out_path, cache);
        }
        if (e->parsed())
            return cmd_eval(clip, manifest, cfg.eval_p, mixed || cfg.eval_mixed_anomalies,
                            out_path);
        if (sw->parsed())
            return cmd_sweep(cache, out_path, k_min > 0 ? k_min : cfg.sweep_k_min,
                             k_max > 0 ? k_max : cfg.sweep_k_max,
                             k_step > 0 ? k_step : cfg.sweep_k_step, cfg.eval_p, relu_mode);
        if (v->parsed()) {
            cfg.validate();
            return cmd_viz(cfg, ckpt, clip, out_path);
        }
        if (sch->parsed()) {
            if (!schedule_kind_override.empty())
                cfg.diffusion.schedule = schedule_kind_from_string(schedule_kind_override);
            return cmd_export_schedule(cfg, out_path);
        }
        if (b->parsed()) {
            cfg.validate();
            return cmd_bench(cfg, ckpt, machine, out_path, bench_clips);
        }
        return 2;
    } catch (const UsageError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "internal error: " << err.what() << "\n";
        return 1;
    }
}
