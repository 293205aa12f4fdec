#pragma once

#include <cstdint>
#include <optional>

#include "ddif/localization.hpp"
#include "ddif/redaction.hpp"
#include "ddif/safety.hpp"

namespace ddif {

// Everything the trained pipeline needs at inference time.
struct PipelineArtifacts {
    MlpParams projection;
    MlpParams scorer;
    ConceptBank bank;
};

struct SanitizeConfig {
    PipelineConfig safety;
    LocalizationConfig localization;
    // blur.sigma <= 0 means "derive from the generated image width".
    BlurConfig blur{0.0, 0};
    std::uint64_t gen_seed = 0;
};

struct PipelineResult {
    Image image;
    SafetyDecision decision;
    // Populated only on the unsafe path.
    std::optional<SensitivityMap> sensitivity;
    std::optional<GridOtsuResult> grid_mask;
    std::optional<BinaryMask> pixel_mask;
};

// Score, generate, and (only when flagged) localize and blur. The benign
// path returns the backend's generation untouched; the unsafe path costs
// exactly grid_size^2 extra decodes.
PipelineResult run_pipeline(const Embedding& raw_embedding, const PipelineArtifacts& artifacts,
                            GeneratorBackend& backend, const SanitizeConfig& cfg);

}  // namespace ddif
