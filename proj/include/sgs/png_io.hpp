#pragma once

#include "sgs/image.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sgs {

// Minimal PNG codec over zlib: 8-bit grayscale / RGB / RGBA, non-interlaced.
// The encoder always emits filter 0 scanlines with a fixed compression level,
// so identical pixels give identical files (dataset hashing relies on this).

void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);

std::vector<uint8_t> encode_png(const std::vector<uint8_t>& pixels, int w, int h, int channels);
std::vector<uint8_t> decode_png(const std::vector<uint8_t>& file, int& w, int& h, int& channels);

} // namespace sgs
