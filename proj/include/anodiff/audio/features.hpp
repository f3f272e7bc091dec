#pragma once

#include <complex>
#include <string>
#include <vector>

#include "anodiff/audio/wav.hpp"
#include "anodiff/tensor.hpp"

namespace anodiff {

struct FeatureConfig {
    int sample_rate = 16000;
    int fft_size = 1024;
    double win_ms = 25.0;
    double hop_ms = 10.0;
    int n_mels = 128;
    double fmin = 0.0;
    double fmax = 8000.0;

    int win_samples() const;
    int hop_samples() const;
    void validate() const;
};

// Normalized log-mel matrix for one clip: n_mels rows x n_frames columns,
// values min-max scaled to [0,1] per clip (all-zero when the clip is flat).
struct FBankFeature {
    FTensor values;
    int n_mels = 0;
    int n_frames = 0;
    std::string clip_id;
};

struct WindowBatch {
    std::vector<FTensor> windows;  // square window x window patches
    std::vector<int> origin_frames;
    std::string clip_id;
};

namespace dsp {
// In-place radix-2 complex FFT; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a);
std::vector<double> hann_window(int n);  // periodic
}  // namespace dsp

// HTK mel scale helpers and the triangular filterbank (peak height 1,
// n_mels filters linearly spaced in mel between fmin and fmax).
double hz_to_mel(double hz);
double mel_to_hz(double mel);
std::vector<double> mel_filter_centers(const FeatureConfig& cfg);  // n_mels + 2 edge/center points
DTensor mel_filterbank(const FeatureConfig& cfg);  // n_mels x (fft_size/2 + 1)

// |STFT| -> mel -> ln(x + 1e-10) -> per-clip min-max.
FBankFeature extract_fbank(const Waveform& w, const FeatureConfig& cfg,
                           const std::string& clip_id = "");

// Cuts square windows along time; the tail is covered by reflect-padding up
// to the next window boundary. `window` must equal the mel dimension.
WindowBatch slide_windows(const FBankFeature& f, int window, int hop);

// Number of windows slide_windows produces for a clip of n_frames frames.
int window_count(int n_frames, int window, int hop);

}  // namespace anodiff
