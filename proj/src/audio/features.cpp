#include "anodiff/audio/features.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace anodiff {

int FeatureConfig::win_samples() const {
    return static_cast<int>(std::lround(win_ms * sample_rate / 1000.0));
}

int FeatureConfig::hop_samples() const {
    return static_cast<int>(std::lround(hop_ms * sample_rate / 1000.0));
}

void FeatureConfig::validate() const {
    if (sample_rate <= 0) throw std::invalid_argument("feature: sample_rate must be > 0");
    if (fft_size <= 0 || (fft_size & (fft_size - 1)) != 0)
        throw std::invalid_argument("feature: fft_size must be a power of two");
    if (win_samples() <= 0 || win_samples() > fft_size)
        throw std::invalid_argument("feature: window must fit in fft_size");
    if (hop_samples() <= 0) throw std::invalid_argument("feature: hop must be > 0");
    if (n_mels <= 0) throw std::invalid_argument("feature: n_mels must be > 0");
    if (!(fmin >= 0) || !(fmax > fmin) || fmax > sample_rate / 2.0)
        throw std::invalid_argument("feature: need 0 <= fmin < fmax <= nyquist");
}

namespace dsp {

void fft_inplace(std::vector<std::complex<double>>& a) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: size must be a power of two");
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * M_PI / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

std::vector<double> hann_window(int n) {
    std::vector<double> w(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
    return w;
}

}  // namespace dsp

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_filter_centers(const FeatureConfig& cfg) {
    const double mlo = hz_to_mel(cfg.fmin), mhi = hz_to_mel(cfg.fmax);
    std::vector<double> pts(static_cast<size_t>(cfg.n_mels) + 2);
    for (int i = 0; i < cfg.n_mels + 2; ++i)
        pts[static_cast<size_t>(i)] =
            mel_to_hz(mlo + (mhi - mlo) * i / (cfg.n_mels + 1));
    return pts;
}

DTensor mel_filterbank(const FeatureConfig& cfg) {
    cfg.validate();
    const int n_bins = cfg.fft_size / 2 + 1;
    const auto pts = mel_filter_centers(cfg);
    DTensor fb(cfg.n_mels, n_bins);
    for (int m = 0; m < cfg.n_mels; ++m) {
        const double fl = pts[static_cast<size_t>(m)];
        const double fc = pts[static_cast<size_t>(m) + 1];
        const double fr = pts[static_cast<size_t>(m) + 2];
        for (int k = 0; k < n_bins; ++k) {
            const double f = static_cast<double>(k) * cfg.sample_rate / cfg.fft_size;
            double w = 0.0;
            if (f > fl && f < fc)
                w = (f - fl) / (fc - fl);
            else if (f >= fc && f < fr)
                w = (fr - f) / (fr - fc);
            fb.at(m, k) = w;
        }
    }
    return fb;
}

FBankFeature extract_fbank(const Waveform& w, const FeatureConfig& cfg,
                           const std::string& clip_id) {
    cfg.validate();
    if (w.sample_rate != cfg.sample_rate)
        throw std::invalid_argument("feature: sample-rate mismatch");
    const int win = cfg.win_samples();
    const int hop = cfg.hop_samples();
    const int64_t len = static_cast<int64_t>(w.samples.size());
    if (len < win)
        throw std::invalid_argument("feature: clip shorter than one analysis window");

    const int n_frames = static_cast<int>((len - win) / hop + 1);
    const int n_bins = cfg.fft_size / 2 + 1;
    const auto hann = dsp::hann_window(win);
    const DTensor fb = mel_filterbank(cfg);

    DTensor mel(cfg.n_mels, n_frames);
    std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size));
    std::vector<double> mag(static_cast<size_t>(n_bins));
    for (int t = 0; t < n_frames; ++t) {
        const int64_t off = static_cast<int64_t>(t) * hop;
        for (int i = 0; i < win; ++i)
            buf[static_cast<size_t>(i)] = {
                w.samples[static_cast<size_t>(off + i)] * hann[static_cast<size_t>(i)], 0.0};
        std::fill(buf.begin() + win, buf.end(), std::complex<double>{0.0, 0.0});
        dsp::fft_inplace(buf);
        for (int k = 0; k < n_bins; ++k) mag[static_cast<size_t>(k)] = std::abs(buf[static_cast<size_t>(k)]);
        for (int m = 0; m < cfg.n_mels; ++m) {
            const double* frow = &fb.at(m, 0);
            double acc = 0.0;
            for (int k = 0; k < n_bins; ++k) acc += frow[k] * mag[static_cast<size_t>(k)];
            mel.at(m, t) = std::log(acc + 1e-10);
        }
    }

    double lo = mel[0], hi = mel[0];
    for (int64_t i = 1; i < mel.numel(); ++i) {
        lo = std::min(lo, mel[i]);
        hi = std::max(hi, mel[i]);
    }

    FBankFeature out;
    out.n_mels = cfg.n_mels;
    out.n_frames = n_frames;
    out.clip_id = clip_id;
    out.values.resize({cfg.n_mels, n_frames});
    if (hi > lo) {
        const double inv = 1.0 / (hi - lo);
        for (int64_t i = 0; i < mel.numel(); ++i)
            out.values[i] = static_cast<float>((mel[i] - lo) * inv);
    }  // degenerate clip stays all-zero
    return out;
}

int window_count(int n_frames, int window, int hop) {
    if (n_frames <= window) return 1;
    return static_cast<int>(
               (static_cast<int64_t>(n_frames) - window + hop - 1) / hop) + 1;
}

namespace {
// index j folded back into [0, n) by reflection without edge repetition
int64_t reflect_index(int64_t j, int64_t n) {
    if (n == 1) return 0;
    const int64_t period = 2 * (n - 1);
    int64_t m = j % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}
}  // namespace

WindowBatch slide_windows(const FBankFeature& f, int window, int hop) {
    if (window <= 0 || hop <= 0)
        throw std::invalid_argument("windows: window and hop must be > 0");
    if (window != f.n_mels)
        throw std::invalid_argument("windows: window must equal the mel dimension (" +
                                    std::to_string(f.n_mels) + ")");
    const int n = window_count(f.n_frames, window, hop);
    WindowBatch batch;
    batch.clip_id = f.clip_id;
    batch.windows.reserve(static_cast<size_t>(n));
    batch.origin_frames.reserve(static_cast<size_t>(n));
    for (int k = 0; k < n; ++k) {
        const int64_t start = static_cast<int64_t>(k) * hop;
        FTensor win(window, window);
        for (int m = 0; m < window; ++m)
            for (int j = 0; j < window; ++j)
                win.at(m, j) = f.values.at(m, reflect_index(start + j, f.n_frames));
        batch.windows.push_back(std::move(win));
        batch.origin_frames.push_back(static_cast<int>(start));
    }
    return batch;
}

}  // namespace anodiff
