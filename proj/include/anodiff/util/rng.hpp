#pragma once

// Seedable generator wrapper. Gaussian draws use Box-Muller on top of
// mt19937_64 so streams are bit-identical across standard libraries
// (std::normal_distribution is not portable).

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace anodiff {

class Rng {
public:
    Rng() : engine_(0xa5d1ffull) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    // [0, 1)
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // standard normal
    double normal() {
        // u1 in (0,1] so log is finite
        double u1 = 1.0 - uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // inclusive range
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // rejection sampling keeps the distribution exact
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    template <typename T>
    void fill_normal(T* p, int64_t n) {
        for (int64_t i = 0; i < n; ++i) p[i] = static_cast<T>(normal());
    }

    uint64_t raw() { return engine_(); }

    std::string state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void set_state(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
    }

    // Stable stream splitting (per-clip / per-window seeds).
    static uint64_t derive(uint64_t seed, uint64_t salt) {
        uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace anodiff
