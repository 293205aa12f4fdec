#pragma once

#include <span>
#include <vector>

#include "ddif/concept_bank.hpp"
#include "ddif/mlp.hpp"
#include "ddif/trainer.hpp"

namespace ddif {

enum class Route { benign_path, unsafe_path };

const char* route_name(Route r);

struct DistancePair {
    double d_mal;
    double d_ben;
};

struct SafetyDecision {
    double score;  // sigmoid of the scorer logit, in (0, 1)
    DistancePair distances;
    Route route;
    // Top-k malicious neighbors, kept for the localization stage.
    std::vector<Neighbor> malicious_neighbors;
};

struct PipelineConfig {
    double tau_safe = 0.05;
    int k = 11;
    Aggregator aggregator = Aggregator::mean;
    double gamma = 0.1;  // reference embedding softmax temperature
};

// Stage 1: project the prompt embedding, retrieve top-k per polarity,
// aggregate to [d_mal, d_ben], score with the classifier and route.
// The boundary is inclusive: score == tau_safe takes the benign path.
SafetyDecision safety_score(const Embedding& raw_embedding, const MlpParams& projection,
                            const MlpParams& scorer, const ConceptBank& bank,
                            const PipelineConfig& cfg);

enum class FilterDecision { allow, discard };

// Prompt-level baseline filter: discard when the raw embedding's cosine
// to any listed unsafe concept reaches tau.
FilterDecision pairwise_filter(const Embedding& raw_embedding,
                               std::span<const Embedding> unsafe_concepts, double tau);

}  // namespace ddif
