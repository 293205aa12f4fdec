#pragma once

#include <span>
#include <vector>

#include "ddif/errors.hpp"

namespace ddif {

// Prompt and image embeddings are plain double vectors; every consumer
// checks dimensions explicitly.
using Embedding = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// cos(a, b) in double precision. Throws ShapeError on dim mismatch and
// DegenerateError when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Temperature softmax with max-shift for overflow safety.
// weights_i = exp(s_i / t) / sum_j exp(s_j / t); t must be > 0.
std::vector<double> softmax(std::span<const double> scores, double temperature);

}  // namespace ddif
