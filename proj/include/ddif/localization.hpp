#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ddif/image.hpp"
#include "ddif/numerics.hpp"

namespace ddif {

// N x N grid of non-negative patch sensitivities, row-major.
struct SensitivityMap {
    int grid_size = 0;
    std::vector<double> grid;

    double& at(int i, int j) { return grid[static_cast<std::size_t>(i) * grid_size + j]; }
    double at(int i, int j) const { return grid[static_cast<std::size_t>(i) * grid_size + j]; }
};

struct LocalizationConfig {
    int grid_size = 8;      // N; latent H and W must be divisible by it
    double beta = 1.0;      // perturbation strength
    int hist_levels = 256;  // K for Otsu binarization
    std::uint64_t seed = 0;
};

// Decoder-side interface the localization stage drives. Implementations
// must be deterministic given their arguments.
class GeneratorBackend {
  public:
    virtual ~GeneratorBackend() = default;
    virtual Image generate(const Embedding& prompt_embedding, std::uint64_t seed) = 0;
    virtual LatentTensor encode(const Image& img) = 0;
    virtual Image decode(const LatentTensor& latent) = 0;
    virtual Embedding image_embed(const Image& img) = 0;
};

// Pass-through wrapper that counts calls; the harness uses it to verify
// the decode budget (N^2 per flagged prompt).
class InstrumentedBackend : public GeneratorBackend {
  public:
    explicit InstrumentedBackend(GeneratorBackend& inner) : inner_(inner) {}

    Image generate(const Embedding& e, std::uint64_t seed) override {
        ++generate_calls;
        return inner_.generate(e, seed);
    }
    LatentTensor encode(const Image& img) override {
        ++encode_calls;
        return inner_.encode(img);
    }
    Image decode(const LatentTensor& latent) override {
        ++decode_calls;
        return inner_.decode(latent);
    }
    Embedding image_embed(const Image& img) override {
        ++image_embed_calls;
        return inner_.image_embed(img);
    }

    void reset_counts() { generate_calls = encode_calls = decode_calls = image_embed_calls = 0; }

    std::uint64_t generate_calls = 0;
    std::uint64_t encode_calls = 0;
    std::uint64_t decode_calls = 0;
    std::uint64_t image_embed_calls = 0;

  private:
    GeneratorBackend& inner_;
};

// Stage 2 core: for every patch (i, j) of the N x N latent partition, add
// beta-scaled Gaussian noise drawn from substream (seed, i*N+j) inside the
// patch, decode, and record the drop in cosine similarity to the
// reference (clamped at zero). The baseline term is the embedding of the
// unperturbed baseline_image, computed once. Exactly N^2 decodes.
SensitivityMap sensitivity_map(const LatentTensor& latent, const Image& baseline_image,
                               const Embedding& reference, GeneratorBackend& backend,
                               const LocalizationConfig& cfg);

struct OtsuResult {
    int threshold_level;             // t* in [1, levels-1]; 0 for a constant input
    std::vector<std::uint8_t> mask;  // one {0,1} flag per input value
};

// Otsu's threshold over min-max normalized integer levels 0..levels-1.
// For each candidate t in 1..levels-1, class 0 holds levels <= t and
// class 1 the rest; class means are taken over the raw values and an
// empty class forces sigma_b^2 to 0. Smallest maximizer wins ties; the
// mask flags values whose level exceeds t*. A constant input yields an
// all-zero mask.
OtsuResult otsu_threshold(std::span<const double> values, int levels);

// Convenience wrapper for a sensitivity map; returns the grid mask.
struct GridOtsuResult {
    int threshold_level;
    BinaryMask mask;  // grid_size x grid_size
};
GridOtsuResult otsu_threshold(const SensitivityMap& map, int levels);

// Nearest-neighbor upsampling of an N x N grid mask to target_h x target_w
// pixels: pixel (y, x) copies grid cell (y * N / target_h, x * N / target_w).
// Requires target dimensions >= the grid size.
BinaryMask upsample_mask(const BinaryMask& grid_mask, int target_h, int target_w);

}  // namespace ddif
