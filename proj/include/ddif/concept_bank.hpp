#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ddif/numerics.hpp"

namespace ddif {

enum class Polarity { malicious, benign };

// Fixed label -> polarity table: the literal label "benign" is benign,
// every other concept label is malicious.
Polarity polarity_of(std::string_view concept_label);

struct ConceptEntry {
    Embedding embedding;
    std::string concept_label;
    Polarity polarity;
};

// Append-only store of labeled reference embeddings. Entries keep their
// insertion index, which doubles as the tie-break order for retrieval.
struct ConceptBank {
    int dim = 0;
    std::vector<ConceptEntry> entries;
    std::uint64_t version = 0;  // bumped by builders on every rebuild

    void add(std::string concept_label, Embedding embedding);
    std::size_t count(Polarity p) const;
};

struct Neighbor {
    std::size_t index;  // insertion index into the bank
    double similarity;  // cosine similarity to the query
};

// Top-k entries of one polarity by descending cosine similarity; ties are
// broken by ascending insertion index. Linear scan over the bank. Returns
// min(k, class size) neighbors; an empty polarity class is an error.
// exclude_exact skips entries whose embedding is bit-identical to the
// given vector (used to drop a training sample's own bank entry).
std::vector<Neighbor> topk_neighbors(const ConceptBank& bank, const Embedding& query,
                                     Polarity polarity, int k,
                                     const Embedding* exclude_exact = nullptr);

enum class Aggregator { mean, max, softmax_weighted };

const char* aggregator_name(Aggregator a);
Aggregator aggregator_from_name(const std::string& name);

// Scalar set-level similarity from neighbor similarities.
//   mean             arithmetic mean
//   max              largest similarity
//   softmax_weighted similarity-softmax-weighted mean (unit temperature)
double set_distance(std::span<const Neighbor> neighbors, Aggregator agg);

// Softmax-weighted combination of the neighbors' embeddings; weights are
// softmax(similarities / gamma). gamma must be > 0.
Embedding reference_embedding(const ConceptBank& bank, std::span<const Neighbor> neighbors,
                              double gamma);

// Bank file: header "DDIF-BANK v1 dim=<d> n=<count>", then one entry per
// line: "<concept_label>\t<v1> <v2> ... <vd>" with 17 significant digits.
// UTF-8, LF line endings.
void bank_save(const ConceptBank& bank, const std::string& path);
ConceptBank bank_load(const std::string& path);

}  // namespace ddif
