#pragma once

#include <vector>

#include "ddif/image.hpp"

namespace ddif {

struct BlurConfig {
    double sigma = 2.0;
    int radius = 6;

    // Default strength scales with the image: sigma = width / 32,
    // radius = ceil(3 * sigma).
    static BlurConfig for_width(int image_width);
};

// Normalized 1-D Gaussian taps of length 2 * radius + 1.
// Requires sigma > 0 and radius >= 1.
std::vector<double> gaussian_kernel(double sigma, int radius);

// Separable Gaussian blur (horizontal pass, then vertical) per channel
// with mirrored (reflect) edge handling. Output stays in [0, 1].
Image blur(const Image& img, const BlurConfig& cfg);

// (1 - m) * original + m * blur(original) per pixel. Pixels with m == 0
// are copied bit-exactly from the original.
Image redact(const Image& original, const BinaryMask& mask, const BlurConfig& cfg);

}  // namespace ddif
