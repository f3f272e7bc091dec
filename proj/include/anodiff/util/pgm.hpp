#pragma once

// Binary portable graymap (P5) output for feature and anomaly-map images.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>

#include "anodiff/tensor.hpp"

namespace anodiff {

// Writes a rows x cols matrix mapped linearly from [vmin, vmax] to 0..255.
// Row 0 of the matrix becomes the bottom image row so frequency axes read
// upward in viewers.
inline void write_pgm(const std::string& path, const DTensor& m, double vmin,
                      double vmax) {
    if (m.ndim() != 2) throw std::invalid_argument("pgm: matrix expected");
    const int64_t rows = m.dim(0), cols = m.dim(1);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("pgm: cannot write " + path);
    out << "P5\n" << cols << " " << rows << "\n255\n";
    const double range = vmax - vmin;
    std::string buf(static_cast<size_t>(cols), '\0');
    for (int64_t r = rows - 1; r >= 0; --r) {
        for (int64_t c = 0; c < cols; ++c) {
            double v = range > 0 ? (m.at(r, c) - vmin) / range : 0.0;
            v = std::clamp(v, 0.0, 1.0);
            buf[static_cast<size_t>(c)] =
                static_cast<char>(static_cast<uint8_t>(v * 255.0 + 0.5));
        }
        out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
}

}  // namespace anodiff
