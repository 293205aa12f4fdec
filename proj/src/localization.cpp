#include "ddif/localization.hpp"

#include <algorithm>
#include <cmath>

#include "ddif/rng.hpp"

namespace ddif {

SensitivityMap sensitivity_map(const LatentTensor& latent, const Image& baseline_image,
                               const Embedding& reference, GeneratorBackend& backend,
                               const LocalizationConfig& cfg) {
    check_latent(latent);
    check_image(baseline_image);
    if (cfg.grid_size <= 0) throw ParamError("sensitivity_map: grid_size must be >= 1");
    if (!(cfg.beta >= 0.0)) throw ParamError("sensitivity_map: beta must be >= 0");
    if (latent.height % cfg.grid_size != 0 || latent.width % cfg.grid_size != 0) {
        throw ShapeError("sensitivity_map: latent dims not divisible by grid size");
    }
    if (l2_norm(reference) == 0.0) {
        throw DegenerateError("sensitivity_map: zero-norm reference");
    }

    const int n = cfg.grid_size;
    const int patch_h = latent.height / n;
    const int patch_w = latent.width / n;

    double baseline = cosine_similarity(backend.image_embed(baseline_image), reference);

    Rng rng(cfg.seed);
    SensitivityMap map;
    map.grid_size = n;
    map.grid.assign(static_cast<std::size_t>(n) * n, 0.0);

    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            // Noise comes from a per-patch substream, so the map does not
            // depend on patch evaluation order.
            Rng patch_rng = rng.substream(static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(j));
            LatentTensor perturbed = latent;
            for (int c = 0; c < latent.channels; ++c) {
                for (int y = i * patch_h; y < (i + 1) * patch_h; ++y) {
                    for (int x = j * patch_w; x < (j + 1) * patch_w; ++x) {
                        perturbed.at(c, y, x) += cfg.beta * patch_rng.next_gaussian();
                    }
                }
            }
            Image decoded = backend.decode(perturbed);
            double perturbed_sim = cosine_similarity(backend.image_embed(decoded), reference);
            map.at(i, j) = std::max(0.0, baseline - perturbed_sim);
        }
    }
    return map;
}

OtsuResult otsu_threshold(std::span<const double> values, int levels) {
    if (values.empty()) throw ShapeError("otsu_threshold: empty input");
    if (levels < 2) throw ParamError("otsu_threshold: need at least 2 levels");

    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }

    OtsuResult res;
    res.mask.assign(values.size(), 0);
    if (lo == hi) {
        res.threshold_level = 0;  // constant input: nothing to separate
        return res;
    }

    // Min-max quantization into integer levels 0..levels-1.
    std::vector<int> level(values.size());
    double scale = static_cast<double>(levels - 1) / (hi - lo);
    for (std::size_t i = 0; i < values.size(); ++i) {
        int q = static_cast<int>(std::floor((values[i] - lo) * scale + 0.5));
        level[i] = std::clamp(q, 0, levels - 1);
    }

    // Per-level population and raw-value sums (accumulated in input order).
    std::vector<double> count(static_cast<std::size_t>(levels), 0.0);
    std::vector<double> sum(static_cast<std::size_t>(levels), 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) {
        count[level[i]] += 1.0;
        sum[level[i]] += values[i];
    }

    const double total_count = static_cast<double>(values.size());
    double total_sum = 0.0;
    for (int k = 0; k < levels; ++k) total_sum += sum[k];

    int best_t = 1;
    double best_var = -1.0;
    double c0 = 0.0, s0 = 0.0;
    for (int t = 1; t < levels; ++t) {
        // Class 0 holds levels <= t; accumulate level t's stats first.
        c0 += count[t - 1];
        s0 += sum[t - 1];
        double c0_t = c0 + count[t];
        double s0_t = s0 + sum[t];
        double c1_t = total_count - c0_t;
        double var;
        if (c0_t == 0.0 || c1_t == 0.0) {
            var = 0.0;  // empty class: no between-class separation
        } else {
            double a0 = c0_t / total_count;
            double a1 = c1_t / total_count;
            double mu0 = s0_t / c0_t;
            double mu1 = (total_sum - s0_t) / c1_t;
            double diff = mu0 - mu1;
            var = a0 * a1 * diff * diff;
        }
        if (var > best_var) {  // strict: ties keep the smallest t
            best_var = var;
            best_t = t;
        }
    }

    res.threshold_level = best_t;
    for (std::size_t i = 0; i < values.size(); ++i) {
        res.mask[i] = level[i] > best_t ? 1 : 0;
    }
    return res;
}

GridOtsuResult otsu_threshold(const SensitivityMap& map, int levels) {
    if (map.grid_size <= 0 ||
        map.grid.size() != static_cast<std::size_t>(map.grid_size) * map.grid_size) {
        throw ShapeError("otsu_threshold: malformed sensitivity map");
    }
    OtsuResult flat = otsu_threshold(std::span<const double>(map.grid), levels);
    GridOtsuResult res;
    res.threshold_level = flat.threshold_level;
    res.mask.height = map.grid_size;
    res.mask.width = map.grid_size;
    res.mask.values = std::move(flat.mask);
    return res;
}

BinaryMask upsample_mask(const BinaryMask& grid_mask, int target_h, int target_w) {
    check_mask(grid_mask);
    if (target_h < grid_mask.height || target_w < grid_mask.width) {
        throw ShapeError("upsample_mask: target smaller than grid");
    }
    BinaryMask out = BinaryMask::filled(target_h, target_w, 0);
    for (int y = 0; y < target_h; ++y) {
        int gy = static_cast<int>(static_cast<std::int64_t>(y) * grid_mask.height / target_h);
        for (int x = 0; x < target_w; ++x) {
            int gx = static_cast<int>(static_cast<std::int64_t>(x) * grid_mask.width / target_w);
            out.at(y, x) = grid_mask.at(gy, gx);
        }
    }
    return out;
}

}  // namespace ddif
