#include "ddif/redaction.hpp"

#include <algorithm>
#include <cmath>

namespace ddif {

BlurConfig BlurConfig::for_width(int image_width) {
    if (image_width <= 0) throw ShapeError("BlurConfig::for_width: non-positive width");
    BlurConfig cfg;
    cfg.sigma = static_cast<double>(image_width) / 32.0;
    cfg.radius = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.sigma)));
    return cfg;
}

std::vector<double> gaussian_kernel(double sigma, int radius) {
    if (!(sigma > 0.0)) throw ParamError("gaussian_kernel: sigma must be > 0");
    if (radius < 1) throw ParamError("gaussian_kernel: radius must be >= 1");
    std::vector<double> k(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-0.5 * (static_cast<double>(i) * i) / (sigma * sigma));
        k[i + radius] = v;
        total += v;
    }
    for (double& v : k) v /= total;
    return k;
}

namespace {

// Mirror an arbitrary index into [0, n): ... 2 1 0 | 0 1 2 ... n-1 | n-1 n-2 ...
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

}  // namespace

Image blur(const Image& img, const BlurConfig& cfg) {
    check_image(img);
    std::vector<double> kernel = gaussian_kernel(cfg.sigma, cfg.radius);
    int r = cfg.radius;

    Image horiz = img;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) {
                    acc += kernel[t + r] * img.at(y, reflect_index(x + t, img.width), c);
                }
                horiz.at(y, x, c) = acc;
            }
        }
    }

    Image out = horiz;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            for (int c = 0; c < img.channels; ++c) {
                double acc = 0.0;
                for (int t = -r; t <= r; ++t) {
                    acc += kernel[t + r] * horiz.at(reflect_index(y + t, img.height), x, c);
                }
                out.at(y, x, c) = std::clamp(acc, 0.0, 1.0);
            }
        }
    }
    return out;
}

Image redact(const Image& original, const BinaryMask& mask, const BlurConfig& cfg) {
    check_image(original);
    check_mask(mask);
    if (mask.height != original.height || mask.width != original.width) {
        throw ShapeError("redact: mask dimensions do not match image");
    }

    Image blurred = blur(original, cfg);
    Image out = original;  // unmasked pixels keep their exact bits
    for (int y = 0; y < original.height; ++y) {
        for (int x = 0; x < original.width; ++x) {
            if (mask.at(y, x) == 0) continue;
            for (int c = 0; c < original.channels; ++c) {
                out.at(y, x, c) = blurred.at(y, x, c);
            }
        }
    }
    return out;
}

}  // namespace ddif
