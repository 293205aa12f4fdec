#include "ddif/safety.hpp"

namespace ddif {

const char* route_name(Route r) {
    return r == Route::benign_path ? "benign_path" : "unsafe_path";
}

SafetyDecision safety_score(const Embedding& raw_embedding, const MlpParams& projection,
                            const MlpParams& scorer, const ConceptBank& bank,
                            const PipelineConfig& cfg) {
    if (!(cfg.tau_safe >= 0.0 && cfg.tau_safe <= 1.0)) {
        throw ParamError("safety_score: tau_safe must lie in [0, 1]");
    }
    if (cfg.k <= 0) throw ParamError("safety_score: k must be >= 1");
    if (scorer.input_dim() != 2 || scorer.output_dim() != 1) {
        throw ShapeError("safety_score: scorer must map 2 features to 1 logit");
    }
    if (projection.output_dim() != bank.dim) {
        throw ShapeError("safety_score: projection output dim does not match bank dim");
    }

    Embedding z = mlp_forward(projection, raw_embedding);
    auto mal = topk_neighbors(bank, z, Polarity::malicious, cfg.k);
    auto ben = topk_neighbors(bank, z, Polarity::benign, cfg.k);

    SafetyDecision d;
    d.distances.d_mal = set_distance(mal, cfg.aggregator);
    d.distances.d_ben = set_distance(ben, cfg.aggregator);
    double logit = mlp_forward(scorer, Embedding{d.distances.d_mal, d.distances.d_ben})[0];
    d.score = sigmoid(logit);
    d.route = d.score >= cfg.tau_safe ? Route::benign_path : Route::unsafe_path;
    d.malicious_neighbors = std::move(mal);
    return d;
}

FilterDecision pairwise_filter(const Embedding& raw_embedding,
                               std::span<const Embedding> unsafe_concepts, double tau) {
    if (unsafe_concepts.empty()) {
        throw DegenerateError("pairwise_filter: empty concept list");
    }
    for (const Embedding& c : unsafe_concepts) {
        if (cosine_similarity(raw_embedding, c) >= tau) return FilterDecision::discard;
    }
    return FilterDecision::allow;
}

}  // namespace ddif
