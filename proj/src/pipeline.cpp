#include "ddif/pipeline.hpp"

namespace ddif {

PipelineResult run_pipeline(const Embedding& raw_embedding, const PipelineArtifacts& artifacts,
                            GeneratorBackend& backend, const SanitizeConfig& cfg) {
    PipelineResult res;
    res.decision = safety_score(raw_embedding, artifacts.projection, artifacts.scorer,
                                artifacts.bank, cfg.safety);
    res.image = backend.generate(raw_embedding, cfg.gen_seed);
    if (res.decision.route == Route::benign_path) return res;

    Embedding reference =
        reference_embedding(artifacts.bank, res.decision.malicious_neighbors, cfg.safety.gamma);
    LatentTensor latent = backend.encode(res.image);
    res.sensitivity = sensitivity_map(latent, res.image, reference, backend, cfg.localization);
    res.grid_mask = otsu_threshold(*res.sensitivity, cfg.localization.hist_levels);
    res.pixel_mask = upsample_mask(res.grid_mask->mask, res.image.height, res.image.width);

    BlurConfig blur_cfg = cfg.blur.sigma > 0.0 ? cfg.blur : BlurConfig::for_width(res.image.width);
    res.image = redact(res.image, *res.pixel_mask, blur_cfg);
    return res;
}

}  // namespace ddif
