#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ddif/image.hpp"
#include "ddif/localization.hpp"
#include "ddif/numerics.hpp"
#include "ddif/rng.hpp"

namespace ddif {

// Closed synthetic world: a handful of orthonormal concept directions in
// embedding space, a renderer that stamps one signature pattern per active
// concept at a fixed per-concept location, a block codec standing in for
// the latent space, and an image embedder that reads the patterns back.
// Everything is deterministic given the spec seed.
struct ToySpec {
    int embed_dim = 64;
    int image_size = 64;
    int latent_downsample = 4;
    std::uint64_t seed = 0;
    std::vector<std::string> concept_labels = {"benign", "violence", "explicit"};
    double render_threshold = 0.15;  // minimum axis projection that draws a blob
    int blob_radius = 10;
    double blob_intensity = 0.45;       // pattern amplitude at projection 1
    double pattern_wavelength = 16.0;   // ring period in pixels
    double background_amplitude = 0.04;
};

struct Blob {
    std::string concept_label;
    int center_y = 0;
    int center_x = 0;
    int radius = 0;
    double intensity = 0.0;
};

// Ground truth for one generated image. harmful marks every pixel inside
// a malicious concept's blob.
struct PlantedScene {
    int height = 0;
    int width = 0;
    std::vector<Blob> blobs;
    BinaryMask harmful;
};

class ToyWorld {
  public:
    explicit ToyWorld(ToySpec spec);

    const ToySpec& spec() const { return spec_; }
    const std::vector<Embedding>& concept_axes() const { return axes_; }
    const Embedding& axis_of(const std::string& label) const;
    std::pair<int, int> slot_center(std::size_t concept_index) const;

    // Unit-norm weighted sum of concept axes plus Gaussian jitter whose
    // expected norm equals noise_level. Weights must be non-negative and
    // not all zero; unknown labels are rejected.
    Embedding text_encode(const std::map<std::string, double>& mix, double noise_level,
                          Rng& rng) const;

    // Renders every concept whose axis projection exceeds the render
    // threshold onto a low-amplitude background. The scene records blob
    // geometry and the harmful pixel set.
    std::pair<Image, PlantedScene> generate_scene(const Embedding& prompt_embedding,
                                                  std::uint64_t seed) const;

    // Block-average downsample to a single-channel latent, and its
    // block-replication inverse (clamped to [0, 1], 3 output channels).
    LatentTensor encode_image(const Image& img) const;
    Image decode_latent(const LatentTensor& latent) const;

    // Mean-removed normalized correlation of each concept's window against
    // its signature template, combined as sum_c corr_c * axis_c plus a
    // fixed context component on an extra orthonormal axis. Without the
    // anchor, cosine against a single concept axis would only see the sign
    // of corr_c, not its size.
    Embedding image_embed(const Image& img) const;

  private:
    double template_value(int dy, int dx) const;

    ToySpec spec_;
    std::vector<Embedding> axes_;
    Embedding context_axis_;  // orthogonal to every concept axis; zero if no room
    std::vector<std::pair<int, int>> slots_;  // (center_y, center_x) per concept
    std::vector<double> template_centered_;   // shared pattern, mean removed
    double template_norm_ = 0.0;
    int window_ = 0;  // template side length, 2 * blob_radius + 1
};

// GeneratorBackend adapter over a ToyWorld.
class ToyBackend : public GeneratorBackend {
  public:
    explicit ToyBackend(const ToyWorld& world) : world_(world) {}

    Image generate(const Embedding& e, std::uint64_t seed) override {
        return world_.generate_scene(e, seed).first;
    }
    LatentTensor encode(const Image& img) override { return world_.encode_image(img); }
    Image decode(const LatentTensor& latent) override { return world_.decode_latent(latent); }
    Embedding image_embed(const Image& img) override { return world_.image_embed(img); }

    const ToyWorld& world() const { return world_; }

  private:
    const ToyWorld& world_;
};

}  // namespace ddif
