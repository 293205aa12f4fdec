#include "ddif/numerics.hpp"

#include <algorithm>
#include <cmath>

namespace ddif {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("dot: size mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ShapeError("cosine_similarity: size mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
    }
    if (a.empty()) throw ShapeError("cosine_similarity: empty vectors");
    double na = l2_norm(a);
    double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) {
        throw DegenerateError("cosine_similarity: zero-norm input");
    }
    return dot(a, b) / (na * nb);
}

std::vector<double> softmax(std::span<const double> scores, double temperature) {
    if (scores.empty()) throw ShapeError("softmax: empty input");
    if (!(temperature > 0.0)) throw ParamError("softmax: temperature must be > 0");

    double hi = *std::max_element(scores.begin(), scores.end());
    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - hi) / temperature);
        total += out[i];
    }
    for (double& w : out) w /= total;
    return out;
}

}  // namespace ddif
