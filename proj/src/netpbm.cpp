#include "ddif/netpbm.hpp"

#include <cmath>
#include <fstream>

namespace ddif {

std::uint8_t quantize_pixel(double v) {
    double q = std::floor(v * 255.0 + 0.5);
    if (q < 0.0) q = 0.0;
    if (q > 255.0) q = 255.0;
    return static_cast<std::uint8_t>(q);
}

namespace {

void write_netpbm(const Image& img, const std::string& path, const char* magic) {
    check_image(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << magic << '\n' << img.width << ' ' << img.height << '\n' << 255 << '\n';
    std::string bytes;
    bytes.reserve(img.pixels.size());
    for (double v : img.pixels) bytes.push_back(static_cast<char>(quantize_pixel(v)));
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path);
}

// Reads one whitespace-delimited token, skipping '#' comments.
std::string next_token(std::istream& in, const std::string& path) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    if (tok.empty()) throw ParseError("netpbm " + path + ": truncated header");
    return tok;
}

Image read_netpbm(const std::string& path, const char* magic, int channels) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);

    if (next_token(f, path) != magic) {
        throw ParseError("netpbm " + path + ": expected magic " + magic);
    }
    int w = std::stoi(next_token(f, path));
    int h = std::stoi(next_token(f, path));
    int maxval = std::stoi(next_token(f, path));
    if (w <= 0 || h <= 0) throw ParseError("netpbm " + path + ": bad dimensions");
    if (maxval != 255) throw ParseError("netpbm " + path + ": only maxval 255 is supported");
    // Exactly one whitespace byte separates the header from the raster;
    // next_token already consumed it.

    std::size_t count = static_cast<std::size_t>(w) * h * channels;
    std::string bytes(count, '\0');
    f.read(bytes.data(), static_cast<std::streamsize>(count));
    if (static_cast<std::size_t>(f.gcount()) != count) {
        throw ParseError("netpbm " + path + ": truncated raster");
    }

    Image img = Image::filled(h, w, channels, 0.0);
    for (std::size_t i = 0; i < count; ++i) {
        img.pixels[i] = static_cast<double>(static_cast<std::uint8_t>(bytes[i])) / 255.0;
    }
    return img;
}

}  // namespace

void save_ppm(const Image& img, const std::string& path) {
    if (img.channels != 3) throw ShapeError("save_ppm: need a 3-channel image");
    write_netpbm(img, path, "P6");
}

Image load_ppm(const std::string& path) { return read_netpbm(path, "P6", 3); }

void save_pgm(const Image& img, const std::string& path) {
    if (img.channels != 1) throw ShapeError("save_pgm: need a 1-channel image");
    write_netpbm(img, path, "P5");
}

Image load_pgm(const std::string& path) { return read_netpbm(path, "P5", 1); }

void save_mask_pgm(const BinaryMask& mask, const std::string& path) {
    check_mask(mask);
    Image img = Image::filled(mask.height, mask.width, 1, 0.0);
    for (std::size_t i = 0; i < mask.values.size(); ++i) {
        img.pixels[i] = mask.values[i] ? 1.0 : 0.0;
    }
    write_netpbm(img, path, "P5");
}

}  // namespace ddif
