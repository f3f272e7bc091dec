#pragma once

#include <string>
#include <vector>

namespace anodiff {

struct Waveform {
    std::vector<float> samples;  // mono, normalized to +-1.0
    int sample_rate = 0;
};

// Reads a RIFF WAV (PCM 16-bit or IEEE float 32-bit). Multi-channel input is
// down-mixed by channel mean. If required_rate > 0 a differing file rate is a
// "sample-rate mismatch" error; resampling is never performed.
Waveform load_wav(const std::string& path, int required_rate = 0);

// 16-bit PCM mono writer, samples clamped to +-1.0.
void write_wav16(const std::string& path, const std::vector<float>& samples,
                 int sample_rate);

}  // namespace anodiff
