#pragma once

// Self-contained synthetic corpus for desk-scale training and testing:
// normal clips are tone stacks with amplitude jitter over a Gaussian noise
// floor; anomalies add a tone burst, silence one tone, or inject periodic
// clicks. Every anomaly with index < n_normal_test shares its base signal
// with the test normal of the same index, so the waveforms differ only on
// the perturbation's support.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "anodiff/data/dataset.hpp"

namespace anodiff {

enum class AnomalyKind { added_tone, dropped_band, transient_click };

AnomalyKind anomaly_kind_from_string(const std::string& s);
const char* to_string(AnomalyKind k);

struct SynthSpec {
    int n_normal_train = 100;
    int n_normal_test = 20;
    int n_anomaly_test = 20;
    std::vector<double> base_tones = {220.0, 450.0, 930.0, 1700.0};
    AnomalyKind anomaly_kind = AnomalyKind::added_tone;
    double noise_floor = 0.01;  // Gaussian noise std
    uint64_t seed = 1;
    double clip_seconds = 2.0;
    int sample_rate = 16000;
    std::string machine_type = "synth";

    void validate() const;
};

// Ground-truth time-frequency support of one injected anomaly.
struct AnomalyMask {
    double t0 = 0.0, t1 = 0.0;    // seconds
    double f_lo = 0.0, f_hi = 0.0;  // Hz
};

struct SynthManifest {
    std::vector<ClipMeta> clips;
    std::map<std::string, AnomalyMask> masks;  // clip_id -> mask (anomalies only)
    std::string manifest_csv;
    std::string masks_csv;
};

// Writes WAVs + manifest.csv + masks.csv under out_dir; byte-identical for a
// fixed spec.
SynthManifest synth_generate(const SynthSpec& spec, const std::string& out_dir);

// Exposed for the pairing/property tests.
std::vector<float> synth_base_waveform(const SynthSpec& spec, uint64_t clip_seed);
std::vector<float> synth_apply_anomaly(const SynthSpec& spec, uint64_t clip_seed,
                                       const std::vector<float>& base,
                                       AnomalyMask& mask_out);

}  // namespace anodiff
