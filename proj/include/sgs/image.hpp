#pragma once

#include "sgs/common.hpp"

#include <cstdint>
#include <vector>

namespace sgs {

/// Dense H x W x C image, doubles in [0,1], row-major interleaved channels.
struct Image {
    int height = 0, width = 0, channels = 0;
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c), data(size_t(h) * w * c, fill) {}

    double& at(int y, int x, int c) { return data[(size_t(y) * width + x) * channels + c]; }
    const double& at(int y, int x, int c) const {
        return data[(size_t(y) * width + x) * channels + c];
    }

    size_t pixel_count() const { return size_t(height) * width; }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }
};

inline uint8_t to_u8(double v) {
    double q = std::round(std::min(1.0, std::max(0.0, v)) * 255.0);
    return uint8_t(q);
}

std::vector<uint8_t> image_to_bytes(const Image& img);
Image image_from_bytes(const std::vector<uint8_t>& bytes, int h, int w, int c);

/// Elementwise |a - b| summed (debug/test helper).
double image_abs_diff(const Image& a, const Image& b);

} // namespace sgs
