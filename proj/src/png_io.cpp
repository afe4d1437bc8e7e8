#include "sgs/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace sgs {

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

uint32_t get_u32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_chunk(std::vector<uint8_t>& out, const char type[4], const std::vector<uint8_t>& payload) {
    put_u32(out, uint32_t(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = crc32(0, out.data() + start, uInt(out.size() - start));
    put_u32(out, crc);
}

uint8_t paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return uint8_t(a);
    if (pb <= pc) return uint8_t(b);
    return uint8_t(c);
}

} // namespace

std::vector<uint8_t> encode_png(const std::vector<uint8_t>& pixels, int w, int h, int channels) {
    if (w <= 0 || h <= 0) fail("IoError", "empty image");
    if (pixels.size() != size_t(w) * h * channels) fail("IoError", "pixel buffer size mismatch");
    uint8_t color_type;
    switch (channels) {
        case 1: color_type = 0; break;
        case 3: color_type = 2; break;
        case 4: color_type = 6; break;
        default: fail("IoError", "unsupported channel count");
    }

    // Raw stream: filter byte 0 before each scanline.
    const size_t stride = size_t(w) * channels;
    std::vector<uint8_t> raw((stride + 1) * h);
    for (int y = 0; y < h; ++y) {
        raw[y * (stride + 1)] = 0;
        std::memcpy(&raw[y * (stride + 1) + 1], &pixels[y * stride], stride);
    }

    uLongf bound = compressBound(uLong(raw.size()));
    std::vector<uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 6) != Z_OK)
        fail("IoError", "deflate failed");
    compressed.resize(bound);

    std::vector<uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<uint8_t> ihdr;
    put_u32(ihdr, uint32_t(w));
    put_u32(ihdr, uint32_t(h));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(color_type);
    ihdr.push_back(0); // compression
    ihdr.push_back(0); // filter method
    ihdr.push_back(0); // no interlace
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});
    return out;
}

std::vector<uint8_t> decode_png(const std::vector<uint8_t>& file, int& w, int& h, int& channels) {
    static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (file.size() < 8 || std::memcmp(file.data(), sig, 8) != 0) fail("IoError", "not a PNG file");

    size_t pos = 8;
    w = h = channels = 0;
    int bit_depth = 0;
    std::vector<uint8_t> idat;
    while (pos + 8 <= file.size()) {
        uint32_t len = get_u32(&file[pos]);
        if (pos + 12 + len > file.size()) fail("IoError", "truncated chunk");
        const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
        const uint8_t* payload = &file[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            w = int(get_u32(payload));
            h = int(get_u32(payload + 4));
            bit_depth = payload[8];
            switch (payload[9]) {
                case 0: channels = 1; break;
                case 2: channels = 3; break;
                case 6: channels = 4; break;
                default: fail("IoError", "unsupported PNG color type");
            }
            if (bit_depth != 8) fail("IoError", "unsupported PNG bit depth");
            if (payload[12] != 0) fail("IoError", "interlaced PNG not supported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (w <= 0 || h <= 0 || idat.empty()) fail("IoError", "missing IHDR/IDAT");

    const size_t stride = size_t(w) * channels;
    std::vector<uint8_t> raw((stride + 1) * h);
    uLongf raw_len = uLongf(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
        raw_len != raw.size())
        fail("IoError", "inflate failed");

    std::vector<uint8_t> pixels(stride * h);
    const int bpp = channels;
    for (int y = 0; y < h; ++y) {
        uint8_t filter = raw[y * (stride + 1)];
        const uint8_t* src = &raw[y * (stride + 1) + 1];
        uint8_t* dst = &pixels[y * stride];
        const uint8_t* up = y > 0 ? &pixels[(y - 1) * stride] : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= size_t(bpp) ? dst[i - bpp] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= size_t(bpp)) ? up[i - bpp] : 0;
            int val = src[i];
            switch (filter) {
                case 0: break;
                case 1: val += a; break;
                case 2: val += b; break;
                case 3: val += (a + b) / 2; break;
                case 4: val += paeth(a, b, c); break;
                default: fail("IoError", "unknown PNG filter");
            }
            dst[i] = uint8_t(val);
        }
    }
    return pixels;
}

std::vector<uint8_t> image_to_bytes(const Image& img) {
    std::vector<uint8_t> bytes(img.data.size());
    for (size_t i = 0; i < img.data.size(); ++i) bytes[i] = to_u8(img.data[i]);
    return bytes;
}

Image image_from_bytes(const std::vector<uint8_t>& bytes, int h, int w, int c) {
    Image img(h, w, c);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = bytes[i] / 255.0;
    return img;
}

double image_abs_diff(const Image& a, const Image& b) {
    if (!a.same_shape(b)) fail("DimensionMismatch", "image shapes differ");
    double s = 0;
    for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s;
}

void write_png(const std::string& path, const Image& img) {
    auto file = encode_png(image_to_bytes(img), img.width, img.height, img.channels);
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(file.data()), std::streamsize(file.size()));
    if (!out) fail("IoError", "short write: " + path);
}

Image read_png(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot open: " + path);
    std::vector<uint8_t> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    int w, h, c;
    auto pixels = decode_png(file, w, h, c);
    return image_from_bytes(pixels, h, w, c);
}

} // namespace sgs
