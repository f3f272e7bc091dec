#include "anodiff/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace anodiff {

namespace {

uint32_t read_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t read_u16(std::istream& in) {
    unsigned char b[2];
    in.read(reinterpret_cast<char*>(b), 2);
    return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void write_bytes(std::ostream& out, const void* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void write_u32(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    write_bytes(out, b, 4);
}

void write_u16(std::ostream& out, uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff)};
    write_bytes(out, b, 2);
}

}  // namespace

Waveform load_wav(const std::string& path, int required_rate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("wav: cannot open " + path);

    char tag[4];
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "RIFF", 4) != 0)
        throw std::runtime_error("wav: not a RIFF file: " + path);
    read_u32(in);  // riff size
    in.read(tag, 4);
    if (!in || std::memcmp(tag, "WAVE", 4) != 0)
        throw std::runtime_error("wav: not a WAVE file: " + path);

    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t rate = 0;
    bool have_fmt = false;
    std::vector<char> data;

    while (in.read(tag, 4)) {
        uint32_t size = read_u32(in);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            format = read_u16(in);
            channels = read_u16(in);
            rate = read_u32(in);
            read_u32(in);  // byte rate
            read_u16(in);  // block align
            bits = read_u16(in);
            if (size > 16) in.seekg(size - 16, std::ios::cur);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data.resize(size);
            in.read(data.data(), size);
            if (static_cast<uint32_t>(in.gcount()) != size)
                throw std::runtime_error("wav: truncated data chunk: " + path);
        } else {
            in.seekg(size + (size & 1), std::ios::cur);  // chunks are word-aligned
        }
    }
    if (!have_fmt || data.empty())
        throw std::runtime_error("wav: missing fmt/data chunk: " + path);
    if (channels == 0) throw std::runtime_error("wav: zero channels: " + path);

    const bool pcm16 = (format == 1 && bits == 16);
    const bool f32 = (format == 3 && bits == 32);
    if (!pcm16 && !f32)
        throw std::runtime_error("wav: unsupported encoding (PCM16/float32 only): " + path);
    if (required_rate > 0 && static_cast<int>(rate) != required_rate)
        throw std::runtime_error("wav: sample-rate mismatch (" + std::to_string(rate) +
                                 " != " + std::to_string(required_rate) + "): " + path);

    const size_t bytes_per_sample = pcm16 ? 2 : 4;
    const size_t frame_bytes = bytes_per_sample * channels;
    const size_t n_frames = data.size() / frame_bytes;
    if (n_frames == 0) throw std::runtime_error("wav: empty audio: " + path);

    Waveform w;
    w.sample_rate = static_cast<int>(rate);
    w.samples.resize(n_frames);
    const double inv_ch = 1.0 / channels;
    for (size_t f = 0; f < n_frames; ++f) {
        double acc = 0.0;
        for (size_t c = 0; c < channels; ++c) {
            const char* p = data.data() + f * frame_bytes + c * bytes_per_sample;
            if (pcm16) {
                int16_t s;
                std::memcpy(&s, p, 2);
                acc += s / 32768.0;
            } else {
                float s;
                std::memcpy(&s, p, 4);
                acc += s;
            }
        }
        w.samples[f] = static_cast<float>(acc * inv_ch);
    }
    return w;
}

void write_wav16(const std::string& path, const std::vector<float>& samples,
                 int sample_rate) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("wav: cannot write " + path);

    const uint32_t data_bytes = static_cast<uint32_t>(samples.size() * 2);
    write_bytes(out, "RIFF", 4);
    write_u32(out, 36 + data_bytes);
    write_bytes(out, "WAVE", 4);
    write_bytes(out, "fmt ", 4);
    write_u32(out, 16);
    write_u16(out, 1);  // PCM
    write_u16(out, 1);  // mono
    write_u32(out, static_cast<uint32_t>(sample_rate));
    write_u32(out, static_cast<uint32_t>(sample_rate * 2));
    write_u16(out, 2);
    write_u16(out, 16);
    write_bytes(out, "data", 4);
    write_u32(out, data_bytes);
    for (float s : samples) {
        const double v = std::clamp(static_cast<double>(s), -1.0, 1.0);
        const int16_t q = static_cast<int16_t>(std::lrint(v * 32767.0));
        char b[2] = {static_cast<char>(q & 0xff), static_cast<char>((q >> 8) & 0xff)};
        write_bytes(out, b, 2);
    }
    if (!out) throw std::runtime_error("wav: write failed: " + path);
}

}  // namespace anodiff
