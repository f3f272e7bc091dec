#include "anodiff/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "anodiff/audio/wav.hpp"
#include "anodiff/util/csv.hpp"
#include "anodiff/util/rng.hpp"

namespace anodiff {

namespace fs = std::filesystem;

AnomalyKind anomaly_kind_from_string(const std::string& s) {
    if (s == "added_tone") return AnomalyKind::added_tone;
    if (s == "dropped_band") return AnomalyKind::dropped_band;
    if (s == "transient_click") return AnomalyKind::transient_click;
    throw std::invalid_argument("synth: unknown anomaly kind '" + s + "'");
}

const char* to_string(AnomalyKind k) {
    switch (k) {
        case AnomalyKind::added_tone: return "added_tone";
        case AnomalyKind::dropped_band: return "dropped_band";
        default: return "transient_click";
    }
}

void SynthSpec::validate() const {
    if (n_normal_train < 1 || n_normal_test < 1 || n_anomaly_test < 1)
        throw std::invalid_argument("synth: clip counts must be >= 1");
    if (base_tones.empty()) throw std::invalid_argument("synth: need base tones");
    for (double f : base_tones)
        if (!(f > 0 && f < sample_rate / 2.0))
            throw std::invalid_argument("synth: tone frequency must be below Nyquist");
    if (noise_floor < 0) throw std::invalid_argument("synth: noise_floor must be >= 0");
    if (clip_seconds < 0.5) throw std::invalid_argument("synth: clips must be >= 0.5 s");
    if (sample_rate <= 0) throw std::invalid_argument("synth: bad sample rate");
}

namespace {

constexpr double kToneAmp = 0.2;
constexpr double kAmpJitter = 0.1;
constexpr double kRampSec = 0.005;
constexpr double kBurstT0 = 0.3, kBurstT1 = 0.7;  // fraction of clip
constexpr double kToneMaskHz = 120.0;

// A dropped_band anomaly silences the lowest base tone, where the mel grid
// is densest and the notch spans the most filterbank rows.
size_t dropped_tone_index(const SynthSpec& spec) {
    size_t best = 0;
    for (size_t j = 1; j < spec.base_tones.size(); ++j)
        if (spec.base_tones[j] < spec.base_tones[best]) best = j;
    return best;
}

double anomaly_tone_hz(const SynthSpec& spec) {
    double f = 3011.0;
    const double cap = 0.45 * spec.sample_rate;
    auto near_base = [&](double x) {
        for (double b : spec.base_tones)
            if (std::abs(x - b) < 150.0) return true;
        return false;
    };
    while (near_base(f) && f < cap) f += 277.0;
    return std::min(f, cap);
}

// linear on/off ramps inside [t0, t1] keep the support exact
double burst_gate(double t, double t0, double t1) {
    if (t < t0 || t > t1) return 0.0;
    if (t < t0 + kRampSec) return (t - t0) / kRampSec;
    if (t > t1 - kRampSec) return (t1 - t) / kRampSec;
    return 1.0;
}

}  // namespace

std::vector<float> synth_base_waveform(const SynthSpec& spec, uint64_t clip_seed) {
    const int64_t n = static_cast<int64_t>(std::llround(spec.clip_seconds * spec.sample_rate));
    Rng rng(clip_seed);
    const size_t nt = spec.base_tones.size();
    std::vector<double> amp(nt), phase(nt);
    for (size_t j = 0; j < nt; ++j) {
        amp[j] = kToneAmp * (1.0 + kAmpJitter * (2.0 * rng.uniform01() - 1.0));
        phase[j] = 2.0 * M_PI * rng.uniform01();
    }
    std::vector<float> out(static_cast<size_t>(n));
    const double dt = 1.0 / spec.sample_rate;
    for (int64_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (size_t j = 0; j < nt; ++j)
            s += amp[j] * std::sin(2.0 * M_PI * spec.base_tones[j] * (i * dt) + phase[j]);
        s += spec.noise_floor * rng.normal();
        out[static_cast<size_t>(i)] = static_cast<float>(s);
    }
    return out;
}

std::vector<float> synth_apply_anomaly(const SynthSpec& spec, uint64_t clip_seed,
                                       const std::vector<float>& base,
                                       AnomalyMask& mask_out) {
    const double dur = spec.clip_seconds;
    const double t0 = kBurstT0 * dur, t1 = kBurstT1 * dur;
    const double dt = 1.0 / spec.sample_rate;
    std::vector<float> out = base;

    if (spec.anomaly_kind == AnomalyKind::added_tone) {
        const double f = anomaly_tone_hz(spec);
        Rng rng(Rng::derive(clip_seed, 0xadd0ull));
        const double phase = 2.0 * M_PI * rng.uniform01();
        for (size_t i = 0; i < out.size(); ++i) {
            const double t = static_cast<double>(i) * dt;
            const double g = burst_gate(t, t0, t1);
            if (g > 0)
                out[i] += static_cast<float>(
                    g * kToneAmp * std::sin(2.0 * M_PI * f * t + phase));
        }
        mask_out = {t0, t1, f - kToneMaskHz, f + kToneMaskHz};
    } else if (spec.anomaly_kind == AnomalyKind::dropped_band) {
        // re-derive the gated tone exactly as the base generator drew it
        Rng rng(clip_seed);
        const size_t nt = spec.base_tones.size();
        std::vector<double> amp(nt), phase(nt);
        for (size_t j = 0; j < nt; ++j) {
            amp[j] = kToneAmp * (1.0 + kAmpJitter * (2.0 * rng.uniform01() - 1.0));
            phase[j] = 2.0 * M_PI * rng.uniform01();
        }
        const size_t j = dropped_tone_index(spec);
        const double f = spec.base_tones[j];
        for (size_t i = 0; i < out.size(); ++i) {
            const double t = static_cast<double>(i) * dt;
            const double g = burst_gate(t, t0, t1);
            if (g > 0)
                out[i] -= static_cast<float>(
                    g * amp[j] * std::sin(2.0 * M_PI * f * t + phase[j]));
        }
        mask_out = {t0, t1, f - kToneMaskHz, f + kToneMaskHz};
    } else {
        Rng rng(Rng::derive(clip_seed, 0xc11cull));
        const double click_len = 0.004, period = 0.25, amp = 0.4;
        for (double tc = t0; tc + click_len <= t1; tc += period) {
            const int64_t i0 = static_cast<int64_t>(tc * spec.sample_rate);
            const int64_t i1 = i0 + static_cast<int64_t>(click_len * spec.sample_rate);
            for (int64_t i = i0; i < i1 && i < static_cast<int64_t>(out.size()); ++i)
                out[static_cast<size_t>(i)] += static_cast<float>(amp * rng.normal());
        }
        mask_out = {t0, t1, 0.0, spec.sample_rate / 2.0};
    }
    return out;
}

SynthManifest synth_generate(const SynthSpec& spec, const std::string& out_dir) {
    spec.validate();
    const fs::path root(out_dir);
    const fs::path mdir = root / spec.machine_type;
    fs::create_directories(mdir / "train");
    fs::create_directories(mdir / "test");

    SynthManifest mf;
    char name[128];

    auto emit = [&](const std::string& split, const std::string& domain,
                    const std::string& label, int idx, const std::vector<float>& wav) {
        std::snprintf(name, sizeof(name), "section_00_%s_%s_%s_%04d_syn.wav",
                      domain.c_str(), split.c_str(), label.c_str(), idx);
        const fs::path p = mdir / split / name;
        write_wav16(p.string(), wav, spec.sample_rate);
        ClipMeta m;
        m.path = p.string();
        m.clip_id = fs::path(name).stem().string();
        m.machine_type = spec.machine_type;
        m.section = "00";
        m.domain = domain;
        m.split = split;
        m.label = label;
        mf.clips.push_back(m);
        return m.clip_id;
    };

    for (int k = 0; k < spec.n_normal_train; ++k) {
        const auto wav = synth_base_waveform(spec, Rng::derive(spec.seed, 1000000 + static_cast<uint64_t>(k)));
        emit("train", "source", "normal", k, wav);
    }
    for (int k = 0; k < spec.n_normal_test; ++k) {
        const auto wav = synth_base_waveform(spec, Rng::derive(spec.seed, 2000000 + static_cast<uint64_t>(k)));
        emit("test", k % 2 == 0 ? "source" : "target", "normal", k, wav);
    }
    for (int k = 0; k < spec.n_anomaly_test; ++k) {
        const uint64_t base_seed = Rng::derive(spec.seed, 2000000 + static_cast<uint64_t>(k));
        const auto base = synth_base_waveform(spec, base_seed);
        AnomalyMask mask;
        const auto wav = synth_apply_anomaly(spec, base_seed, base, mask);
        const auto id = emit("test", k % 2 == 0 ? "source" : "target", "anomaly", k, wav);
        mf.masks[id] = mask;
    }

    mf.manifest_csv = (root / "manifest.csv").string();
    {
        CsvWriter w(mf.manifest_csv, {"clip_id", "path", "machine_type", "section",
                                      "domain", "split", "label"});
        for (const auto& c : mf.clips)
            w.row({c.clip_id, fs::relative(c.path, root).string(), c.machine_type,
                   c.section, c.domain, c.split, c.label});
    }
    mf.masks_csv = (root / "masks.csv").string();
    {
        CsvWriter w(mf.masks_csv, {"clip_id", "kind", "t0", "t1", "f_lo", "f_hi"});
        for (const auto& [id, m] : mf.masks)
            w.row({id, to_string(spec.anomaly_kind), fmt_double(m.t0, 6),
                   fmt_double(m.t1, 6), fmt_double(m.f_lo, 6), fmt_double(m.f_hi, 6)});
    }
    return mf;
}

}  // namespace anodiff
