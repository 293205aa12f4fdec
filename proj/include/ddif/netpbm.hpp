#pragma once

#include <string>

#include "ddif/image.hpp"

namespace ddif {

// Binary netpbm I/O, maxval 255. Pixels quantize round-half-up:
// byte = clamp(floor(v * 255 + 0.5)); loading maps byte / 255 back.

// P6; image must have 3 channels.
void save_ppm(const Image& img, const std::string& path);
Image load_ppm(const std::string& path);

// P5; image must have 1 channel.
void save_pgm(const Image& img, const std::string& path);
Image load_pgm(const std::string& path);

// Mask as P5 with values {0, 255}.
void save_mask_pgm(const BinaryMask& mask, const std::string& path);

std::uint8_t quantize_pixel(double v);

}  // namespace ddif
