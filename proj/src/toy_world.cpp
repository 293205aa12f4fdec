#include "ddif/toy_world.hpp"

#include <algorithm>
#include <cmath>

namespace ddif {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kContextWeight = 0.5;

}  // namespace

ToyWorld::ToyWorld(ToySpec spec) : spec_(std::move(spec)) {
    if (spec_.embed_dim < static_cast<int>(spec_.concept_labels.size())) {
        throw ParamError("toy world: embed_dim smaller than concept count");
    }
    if (spec_.concept_labels.empty()) throw ParamError("toy world: no concepts");
    if (spec_.concept_labels.size() > 9) {
        throw ParamError("toy world: at most 9 concepts (3x3 slot grid)");
    }
    if (spec_.image_size % spec_.latent_downsample != 0) {
        throw ParamError("toy world: image_size must be divisible by latent_downsample");
    }
    if (spec_.blob_radius < 2) throw ParamError("toy world: blob_radius too small");

    Rng rng(spec_.seed);

    // Orthonormal concept axes: Gram-Schmidt over seeded Gaussian draws.
    std::size_t dim = static_cast<std::size_t>(spec_.embed_dim);
    for (std::size_t c = 0; c < spec_.concept_labels.size(); ++c) {
        Rng sub = rng.substream(1, c);
        Embedding v = gaussian_vector(sub, dim);
        for (const Embedding& prev : axes_) {
            double proj = dot(v, prev);
            for (std::size_t d = 0; d < dim; ++d) v[d] -= proj * prev[d];
        }
        double n = l2_norm(v);
        if (n < 1e-8) throw DegenerateError("toy world: axis draw collapsed");
        for (double& x : v) x /= n;
        axes_.push_back(std::move(v));
    }

    // One more orthonormal direction for the image context anchor. When the
    // concept axes already span the space there is no room; the anchor stays
    // zero and image embeddings degrade to pure concept responses.
    context_axis_.assign(dim, 0.0);
    if (spec_.embed_dim > static_cast<int>(spec_.concept_labels.size())) {
        Rng sub = rng.substream(1, spec_.concept_labels.size());
        Embedding v = gaussian_vector(sub, dim);
        for (const Embedding& prev : axes_) {
            double proj = dot(v, prev);
            for (std::size_t d = 0; d < dim; ++d) v[d] -= proj * prev[d];
        }
        double n = l2_norm(v);
        if (n < 1e-8) throw DegenerateError("toy world: context axis draw collapsed");
        for (std::size_t d = 0; d < dim; ++d) context_axis_[d] = v[d] / n;
    }

    // Fixed per-concept locations: a shuffled 3x3 slot grid with margin
    // wide enough that windows never leave the image or overlap.
    int sz = spec_.image_size;
    int margin = spec_.blob_radius + 1;
    if (3 * (2 * spec_.blob_radius + 1) > sz) {
        throw ParamError("toy world: blob_radius too large for the slot grid");
    }
    std::vector<int> slot_ids(9);
    for (int i = 0; i < 9; ++i) slot_ids[i] = i;
    Rng shuffle_rng = rng.substream(2, 0);
    for (std::size_t i = slot_ids.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(shuffle_rng.next_u64() % i);
        std::swap(slot_ids[i - 1], slot_ids[j]);
    }
    auto coord = [&](int k) {  // 0,1,2 -> three evenly spaced centers
        return margin + k * (sz - 2 * margin) / 2;
    };
    for (std::size_t c = 0; c < spec_.concept_labels.size(); ++c) {
        int id = slot_ids[c];
        slots_.emplace_back(coord(id / 3), coord(id % 3));
    }

    // Shared signature template: radial rings under a linear falloff.
    // The ring period is coarse enough to survive block-averaging yet
    // fine enough that blurring visibly dampens it.
    window_ = 2 * spec_.blob_radius + 1;
    template_centered_.resize(static_cast<std::size_t>(window_) * window_);
    double mean = 0.0;
    for (int dy = -spec_.blob_radius; dy <= spec_.blob_radius; ++dy) {
        for (int dx = -spec_.blob_radius; dx <= spec_.blob_radius; ++dx) {
            double v = template_value(dy, dx);
            template_centered_[(dy + spec_.blob_radius) * window_ + (dx + spec_.blob_radius)] = v;
            mean += v;
        }
    }
    mean /= static_cast<double>(template_centered_.size());
    double norm2 = 0.0;
    for (double& v : template_centered_) {
        v -= mean;
        norm2 += v * v;
    }
    template_norm_ = std::sqrt(norm2);
}

double ToyWorld::template_value(int dy, int dx) const {
    double r = std::sqrt(static_cast<double>(dy) * dy + static_cast<double>(dx) * dx);
    if (r > spec_.blob_radius) return 0.0;
    double falloff = 1.0 - r / static_cast<double>(spec_.blob_radius);
    return std::cos(2.0 * kPi * r / spec_.pattern_wavelength) * falloff;
}

const Embedding& ToyWorld::axis_of(const std::string& label) const {
    for (std::size_t c = 0; c < spec_.concept_labels.size(); ++c) {
        if (spec_.concept_labels[c] == label) return axes_[c];
    }
    throw ParamError("toy world: unknown concept label '" + label + "'");
}

std::pair<int, int> ToyWorld::slot_center(std::size_t concept_index) const {
    if (concept_index >= slots_.size()) throw ParamError("toy world: concept index out of range");
    return slots_[concept_index];
}

Embedding ToyWorld::text_encode(const std::map<std::string, double>& mix, double noise_level,
                                Rng& rng) const {
    if (!(noise_level >= 0.0)) throw ParamError("text_encode: noise_level must be >= 0");
    Embedding v(static_cast<std::size_t>(spec_.embed_dim), 0.0);
    double weight_total = 0.0;
    for (const auto& [label, w] : mix) {
        if (w < 0.0) throw ParamError("text_encode: negative weight for '" + label + "'");
        const Embedding& axis = axis_of(label);
        for (std::size_t d = 0; d < v.size(); ++d) v[d] += w * axis[d];
        weight_total += w;
    }
    if (weight_total == 0.0) throw DegenerateError("text_encode: all-zero concept mix");

    // Per-component sigma of noise_level / sqrt(dim): the jitter's expected
    // norm equals noise_level regardless of embedding width.
    double sigma = noise_level / std::sqrt(static_cast<double>(spec_.embed_dim));
    for (double& x : v) x += sigma * rng.next_gaussian();

    double n = l2_norm(v);
    if (n == 0.0) throw DegenerateError("text_encode: zero-norm embedding");
    for (double& x : v) x /= n;
    return v;
}

std::pair<Image, PlantedScene> ToyWorld::generate_scene(const Embedding& prompt_embedding,
                                                        std::uint64_t seed) const {
    if (static_cast<int>(prompt_embedding.size()) != spec_.embed_dim) {
        throw ShapeError("generate_scene: embedding dim mismatch");
    }

    int sz = spec_.image_size;
    Image img = Image::filled(sz, sz, 3, 0.5);

    // Smooth deterministic background; phases depend on the generation seed.
    Rng bg_rng(spec_.seed ^ (seed * 0x9E3779B97F4A7C15ULL + 1));
    double ph1 = bg_rng.uniform(0.0, 2.0 * kPi);
    double ph2 = bg_rng.uniform(0.0, 2.0 * kPi);
    for (int y = 0; y < sz; ++y) {
        for (int x = 0; x < sz; ++x) {
            double tex = 0.5 + spec_.background_amplitude * 0.5 *
                                   (std::sin(2.0 * kPi * x / sz + ph1) +
                                    std::sin(4.0 * kPi * y / sz + ph2));
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = tex;
        }
    }

    PlantedScene scene;
    scene.height = sz;
    scene.width = sz;
    scene.harmful = BinaryMask::filled(sz, sz, 0);

    for (std::size_t c = 0; c < spec_.concept_labels.size(); ++c) {
        double proj = dot(prompt_embedding, axes_[c]);
        if (proj <= spec_.render_threshold) continue;

        auto [cy, cx] = slots_[c];
        double intensity = spec_.blob_intensity * proj;
        int channel = static_cast<int>(c % 3);
        bool malicious = spec_.concept_labels[c] != "benign";

        for (int dy = -spec_.blob_radius; dy <= spec_.blob_radius; ++dy) {
            for (int dx = -spec_.blob_radius; dx <= spec_.blob_radius; ++dx) {
                int y = cy + dy, x = cx + dx;
                if (y < 0 || y >= sz || x < 0 || x >= sz) continue;
                double t = template_value(dy, dx);
                if (t == 0.0 && dy * dy + dx * dx > spec_.blob_radius * spec_.blob_radius) {
                    continue;
                }
                img.at(y, x, channel) =
                    std::clamp(img.at(y, x, channel) + intensity * t, 0.0, 1.0);
                if (malicious) scene.harmful.at(y, x) = 1;
            }
        }
        scene.blobs.push_back(Blob{spec_.concept_labels[c], cy, cx, spec_.blob_radius, intensity});
    }
    return {std::move(img), std::move(scene)};
}

LatentTensor ToyWorld::encode_image(const Image& img) const {
    check_image(img);
    int ds = spec_.latent_downsample;
    if (img.height % ds != 0 || img.width % ds != 0) {
        throw ShapeError("encode_image: image dims not divisible by downsample factor");
    }
    LatentTensor latent;
    latent.channels = 1;
    latent.height = img.height / ds;
    latent.width = img.width / ds;
    latent.values.assign(static_cast<std::size_t>(latent.height) * latent.width, 0.0);

    double count = static_cast<double>(ds) * ds * img.channels;
    for (int y = 0; y < latent.height; ++y) {
        for (int x = 0; x < latent.width; ++x) {
            double first = img.at(y * ds, x * ds, 0);
            bool constant = true;
            double acc = 0.0;
            for (int by = 0; by < ds; ++by) {
                for (int bx = 0; bx < ds; ++bx) {
                    for (int c = 0; c < img.channels; ++c) {
                        double v = img.at(y * ds + by, x * ds + bx, c);
                        if (v != first) constant = false;
                        acc += v;
                    }
                }
            }
            // Constant blocks keep their value bit for bit so that encoding
            // a decoded latent reproduces the latent exactly.
            latent.at(0, y, x) = constant ? first : acc / count;
        }
    }
    return latent;
}

Image ToyWorld::decode_latent(const LatentTensor& latent) const {
    check_latent(latent);
    if (latent.channels != 1) throw ShapeError("decode_latent: expected single-channel latent");
    int ds = spec_.latent_downsample;
    Image img = Image::filled(latent.height * ds, latent.width * ds, 3, 0.0);
    for (int y = 0; y < latent.height; ++y) {
        for (int x = 0; x < latent.width; ++x) {
            double v = std::clamp(latent.at(0, y, x), 0.0, 1.0);
            for (int by = 0; by < ds; ++by) {
                for (int bx = 0; bx < ds; ++bx) {
                    for (int c = 0; c < 3; ++c) img.at(y * ds + by, x * ds + bx, c) = v;
                }
            }
        }
    }
    return img;
}

Embedding ToyWorld::image_embed(const Image& img) const {
    check_image(img);
    if (img.height != spec_.image_size || img.width != spec_.image_size || img.channels != 3) {
        throw ShapeError("image_embed: image shape does not match the toy spec");
    }

    Embedding out(static_cast<std::size_t>(spec_.embed_dim), 0.0);
    int rad = spec_.blob_radius;
    std::size_t cells = static_cast<std::size_t>(window_) * window_;

    for (std::size_t c = 0; c < spec_.concept_labels.size(); ++c) {
        auto [cy, cx] = slots_[c];
        int channel = static_cast<int>(c % 3);

        double mean = 0.0;
        for (int dy = -rad; dy <= rad; ++dy) {
            for (int dx = -rad; dx <= rad; ++dx) {
                mean += img.at(cy + dy, cx + dx, channel);
            }
        }
        mean /= static_cast<double>(cells);

        double cross = 0.0, win_norm2 = 0.0;
        for (int dy = -rad; dy <= rad; ++dy) {
            for (int dx = -rad; dx <= rad; ++dx) {
                double w = img.at(cy + dy, cx + dx, channel) - mean;
                double t = template_centered_[(dy + rad) * window_ + (dx + rad)];
                cross += w * t;
                win_norm2 += w * w;
            }
        }
        double corr = 0.0;
        if (win_norm2 > 0.0 && template_norm_ > 0.0) {
            corr = cross / (std::sqrt(win_norm2) * template_norm_);
        }
        for (std::size_t d = 0; d < out.size(); ++d) out[d] += corr * axes_[c][d];
    }
    // Context anchor: keeps the embedding norm bounded away from the concept
    // span, so cosine against an axis tracks the correlation magnitude.
    for (std::size_t d = 0; d < out.size(); ++d) out[d] += kContextWeight * context_axis_[d];
    return out;
}

}  // namespace ddif
