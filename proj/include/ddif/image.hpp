#pragma once

#include <cstdint>
#include <vector>

#include "ddif/errors.hpp"

namespace ddif {

// Row-major H x W x C raster with pixel values in [0, 1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;

    static Image filled(int h, int w, int c, double value) {
        Image img;
        img.height = h;
        img.width = w;
        img.channels = c;
        img.pixels.assign(static_cast<std::size_t>(h) * w * c, value);
        return img;
    }

    double& at(int y, int x, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
};

inline void check_image(const Image& img) {
    if (img.height <= 0 || img.width <= 0 || img.channels <= 0) {
        throw ShapeError("image: non-positive dimensions");
    }
    std::size_t expect = static_cast<std::size_t>(img.height) * img.width * img.channels;
    if (img.pixels.size() != expect) throw ShapeError("image: pixel buffer size mismatch");
}

// C_L x H_L x W_L latent grid, channel-major.
struct LatentTensor {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;

    double& at(int c, int y, int x) {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

inline void check_latent(const LatentTensor& t) {
    if (t.channels <= 0 || t.height <= 0 || t.width <= 0) {
        throw ShapeError("latent: non-positive dimensions");
    }
    std::size_t expect = static_cast<std::size_t>(t.channels) * t.height * t.width;
    if (t.values.size() != expect) throw ShapeError("latent: value buffer size mismatch");
}

// H x W grid of {0, 1} bytes.
struct BinaryMask {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    static BinaryMask filled(int h, int w, std::uint8_t v) {
        BinaryMask m;
        m.height = h;
        m.width = w;
        m.values.assign(static_cast<std::size_t>(h) * w, v);
        return m;
    }

    std::uint8_t& at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const {
        return values[static_cast<std::size_t>(y) * width + x];
    }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (std::uint8_t v : values) n += v;
        return n;
    }
};

inline void check_mask(const BinaryMask& m) {
    if (m.height <= 0 || m.width <= 0) throw ShapeError("mask: non-positive dimensions");
    if (m.values.size() != static_cast<std::size_t>(m.height) * m.width) {
        throw ShapeError("mask: buffer size mismatch");
    }
    for (std::uint8_t v : m.values) {
        if (v > 1) throw ShapeError("mask: values must be 0 or 1");
    }
}

}  // namespace ddif
