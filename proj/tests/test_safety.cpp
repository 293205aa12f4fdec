#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ddif/errors.hpp"
#include "ddif/safety.hpp"

#include <cmath>
#include <string>
#include <vector>

using namespace ddif;

namespace {

MlpParams identity_net(int dim) {
    MlpParams p;
    p.layer_dims = {dim, dim};
    p.activation = Activation::relu;
    p.weights = {std::vector<double>(static_cast<std::size_t>(dim) * dim, 0.0)};
    p.biases = {std::vector<double>(static_cast<std::size_t>(dim), 0.0)};
    for (int i = 0; i < dim; ++i) p.weights[0][static_cast<std::size_t>(i) * dim + i] = 1.0;
    return p;
}

// Linear scorer: logit = -6 d_mal + 6 d_ben.
MlpParams margin_scorer() {
    MlpParams p;
    p.layer_dims = {2, 1};
    p.activation = Activation::relu;
    p.weights = {{-6.0, 6.0}};
    p.biases = {{0.0}};
    return p;
}

ConceptBank axis_bank() {
    ConceptBank bank;
    bank.add("violence", {1.0, 0.0});
    bank.add("benign", {0.0, 1.0});
    return bank;
}

}  // namespace

TEST_CASE("route names") {
    CHECK(std::string(route_name(Route::benign_path)) == "benign_path");
    CHECK(std::string(route_name(Route::unsafe_path)) == "unsafe_path");
}

TEST_CASE("benign embedding takes the benign path") {
    PipelineConfig cfg;
    cfg.k = 1;
    auto d = safety_score({0.0, 1.0}, identity_net(2), margin_scorer(), axis_bank(), cfg);
    CHECK(d.distances.d_mal == doctest::Approx(0.0));
    CHECK(d.distances.d_ben == doctest::Approx(1.0));
    CHECK(d.score == doctest::Approx(1.0 / (1.0 + std::exp(-6.0))).epsilon(1e-12));
    CHECK(d.route == Route::benign_path);
    REQUIRE(d.malicious_neighbors.size() == 1);
    CHECK(d.malicious_neighbors[0].index == 0);
}

TEST_CASE("malicious embedding takes the unsafe path") {
    PipelineConfig cfg;
    cfg.k = 1;
    auto d = safety_score({1.0, 0.0}, identity_net(2), margin_scorer(), axis_bank(), cfg);
    CHECK(d.distances.d_mal == doctest::Approx(1.0));
    CHECK(d.distances.d_ben == doctest::Approx(0.0));
    CHECK(d.score == doctest::Approx(1.0 / (1.0 + std::exp(6.0))).epsilon(1e-12));
    CHECK(d.route == Route::unsafe_path);
    REQUIRE(d.malicious_neighbors.size() == 1);
    CHECK(d.malicious_neighbors[0].similarity == doctest::Approx(1.0));
}

TEST_CASE("score equal to the threshold is benign") {
    // A zero scorer pins the score to exactly 0.5.
    auto zero = mlp_zeros({2, 4, 1}, Activation::relu);
    PipelineConfig cfg;
    cfg.k = 1;
    cfg.tau_safe = 0.5;
    auto d = safety_score({1.0, 0.0}, identity_net(2), zero, axis_bank(), cfg);
    CHECK(d.score == 0.5);
    CHECK(d.route == Route::benign_path);

    cfg.tau_safe = 0.5000001;
    auto d2 = safety_score({1.0, 0.0}, identity_net(2), zero, axis_bank(), cfg);
    CHECK(d2.route == Route::unsafe_path);
}

TEST_CASE("threshold extremes") {
    PipelineConfig cfg;
    cfg.k = 1;

    cfg.tau_safe = 0.0;  // sigmoid is strictly positive, everything passes
    auto mal = safety_score({1.0, 0.0}, identity_net(2), margin_scorer(), axis_bank(), cfg);
    CHECK(mal.route == Route::benign_path);

    cfg.tau_safe = 1.0;  // sigmoid is strictly below one, everything flags
    auto ben = safety_score({0.0, 1.0}, identity_net(2), margin_scorer(), axis_bank(), cfg);
    CHECK(ben.route == Route::unsafe_path);
}

TEST_CASE("aggregator choice changes the feature") {
    ConceptBank bank;
    bank.add("violence", {1.0, 0.0});
    bank.add("explicit", {0.0, 1.0});
    bank.add("benign", {-1.0, 0.0});

    PipelineConfig cfg;
    cfg.k = 2;
    cfg.aggregator = Aggregator::mean;
    auto zero = mlp_zeros({2, 4, 1}, Activation::relu);

    auto mean_d = safety_score({1.0, 0.0}, identity_net(2), zero, bank, cfg);
    CHECK(mean_d.distances.d_mal == doctest::Approx(0.5));  // (1 + 0) / 2

    cfg.aggregator = Aggregator::max;
    auto max_d = safety_score({1.0, 0.0}, identity_net(2), zero, bank, cfg);
    CHECK(max_d.distances.d_mal == doctest::Approx(1.0));

    // k above the class size clamps.
    cfg.k = 11;
    auto clamped = safety_score({1.0, 0.0}, identity_net(2), zero, bank, cfg);
    CHECK(clamped.malicious_neighbors.size() == 2);
    CHECK(clamped.distances.d_mal == doctest::Approx(1.0));
}

TEST_CASE("safety score validates configuration") {
    PipelineConfig cfg;
    cfg.k = 1;
    auto proj = identity_net(2);
    auto scorer = margin_scorer();
    auto bank = axis_bank();

    PipelineConfig bad_tau = cfg;
    bad_tau.tau_safe = -0.1;
    CHECK_THROWS_AS(safety_score({1.0, 0.0}, proj, scorer, bank, bad_tau), ParamError);
    bad_tau.tau_safe = 1.5;
    CHECK_THROWS_AS(safety_score({1.0, 0.0}, proj, scorer, bank, bad_tau), ParamError);

    PipelineConfig bad_k = cfg;
    bad_k.k = 0;
    CHECK_THROWS_AS(safety_score({1.0, 0.0}, proj, scorer, bank, bad_k), ParamError);

    auto bad_scorer = mlp_zeros({3, 1}, Activation::relu);
    CHECK_THROWS_AS(safety_score({1.0, 0.0}, proj, bad_scorer, bank, cfg), ShapeError);

    auto proj3 = identity_net(3);
    CHECK_THROWS_AS(safety_score({1.0, 0.0, 0.0}, proj3, scorer, bank, cfg), ShapeError);

    ConceptBank no_ben;
    no_ben.add("violence", {1.0, 0.0});
    CHECK_THROWS_AS(safety_score({1.0, 0.0}, proj, scorer, no_ben, cfg), DegenerateError);
}

TEST_CASE("pairwise filter boundary is inclusive") {
    std::vector<Embedding> unsafe = {{1.0, 0.0}};

    CHECK(pairwise_filter({1.0, 0.0}, unsafe, 0.3) == FilterDecision::discard);
    CHECK(pairwise_filter({0.0, 1.0}, unsafe, 0.3) == FilterDecision::allow);
    CHECK(pairwise_filter({-1.0, 0.0}, unsafe, 0.3) == FilterDecision::allow);

    // Exactly at the threshold: discard.
    Embedding q = {0.3, 0.9539392014169456};
    double tau = cosine_similarity(q, unsafe[0]);
    CHECK(pairwise_filter(q, unsafe, tau) == FilterDecision::discard);

    // Several concepts: any hit discards.
    std::vector<Embedding> two = {{1.0, 0.0}, {0.0, 1.0}};
    CHECK(pairwise_filter({0.05, 0.999}, two, 0.3) == FilterDecision::discard);

    CHECK_THROWS_AS(pairwise_filter({1.0, 0.0}, std::span<const Embedding>{}, 0.3),
                    DegenerateError);
}
