#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ddif/concept_bank.hpp"
#include "ddif/errors.hpp"
#include "ddif/rng.hpp"
#include "ddif/trainer.hpp"
#include "test_util.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

using namespace ddif;

TEST_CASE("contrastive loss on a hand-checked batch") {
    // Two identical malicious samples plus an orthogonal benign one.
    std::vector<Embedding> z = {{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    std::vector<Label> labels = {Label::malicious, Label::malicious, Label::benign};

    auto res = contrastive_batch_loss(z, labels, 1.0);
    // Each malicious sample: -log(e / (e + e^0)) = log(1 + e^-1).
    double per = std::log(1.0 + std::exp(-1.0));
    CHECK(res.loss == doctest::Approx(2.0 * per / 3.0).epsilon(1e-12));
    CHECK(per == doctest::Approx(0.3132616875182229).epsilon(1e-12));
    REQUIRE(res.z_grads.size() == 3);
    // The benign sample sits in the malicious denominators, so it still
    // receives gradient even though its own term is zero.
    bool benign_grad = false;
    for (double g : res.z_grads[2]) benign_grad = benign_grad || (g != 0.0);
    CHECK(benign_grad);
}

TEST_CASE("samples without a same-label partner contribute nothing") {
    std::vector<Embedding> z = {{1.0, 0.0}, {0.0, 1.0}};
    std::vector<Label> labels = {Label::malicious, Label::benign};
    auto res = contrastive_batch_loss(z, labels, 0.1);
    CHECK(res.loss == 0.0);
    for (const auto& g : res.z_grads)
        for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("contrastive loss stays finite at extreme temperature") {
    std::vector<Embedding> z = {{1.0, 0.0}, {1.0, 0.0}, {-1.0, 0.0}};
    std::vector<Label> labels = {Label::malicious, Label::malicious, Label::benign};
    auto res = contrastive_batch_loss(z, labels, 0.001);
    CHECK(std::isfinite(res.loss));
    // Positive at cos 1 vs negative at cos -1: the ratio saturates.
    CHECK(res.loss == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("contrastive loss rejects malformed input") {
    std::vector<Embedding> one = {{1.0, 0.0}};
    std::vector<Label> l1 = {Label::benign};
    CHECK_THROWS_AS(contrastive_batch_loss(one, l1, 1.0), ShapeError);

    std::vector<Embedding> z = {{1.0, 0.0}, {0.0, 1.0}};
    std::vector<Label> l2 = {Label::benign};
    CHECK_THROWS_AS(contrastive_batch_loss(z, l2, 1.0), ShapeError);

    std::vector<Embedding> ragged = {{1.0, 0.0}, {1.0}};
    std::vector<Label> l3 = {Label::benign, Label::benign};
    CHECK_THROWS_AS(contrastive_batch_loss(ragged, l3, 1.0), ShapeError);

    std::vector<Label> l4 = {Label::benign, Label::malicious};
    CHECK_THROWS_AS(contrastive_batch_loss(z, l4, 0.0), ParamError);

    std::vector<Embedding> zero = {{0.0, 0.0}, {1.0, 0.0}};
    CHECK_THROWS_AS(contrastive_batch_loss(zero, l4, 1.0), DegenerateError);
}

TEST_CASE("set distance loss matches the closed form") {
    double s = std::sqrt(0.5);
    std::vector<Embedding> z = {{1.0, 0.0}, {s, s}, {0.0, 1.0}};
    std::vector<Label> labels = {Label::malicious, Label::malicious, Label::benign};
    const double tau = 0.5;

    auto term = [&](double d_same, double d_diff) {
        double as = -d_same / tau, ad = -d_diff / tau;
        double shift = std::max(as, ad);
        return std::log(std::exp(as - shift) + std::exp(ad - shift)) - (as - shift);
    };
    // Sample 0: d_same = cos to the other malicious = s, d_diff = 0.
    // Sample 1: d_same = s, d_diff = cos([s,s],[0,1]) = s.
    // Sample 2: no same-label partner, contributes zero.
    double expect = (term(s, 0.0) + term(s, s)) / 3.0;

    auto res = set_distance_batch_loss(z, labels, tau, 2);
    CHECK(res.loss == doctest::Approx(expect).epsilon(1e-12));

    // Both sets equally similar: the term is exactly log 2.
    CHECK(term(s, s) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("set distance respects the top-k cap") {
    std::vector<Embedding> z = {{1.0, 0.0}, {0.8, 0.6}, {0.6, 0.8}, {0.0, 1.0}};
    std::vector<Label> labels = {Label::malicious, Label::malicious, Label::malicious,
                                 Label::benign};
    const double tau = 1.0;

    auto term = [&](double d_same, double d_diff) {
        double as = -d_same / tau, ad = -d_diff / tau;
        double shift = std::max(as, ad);
        return std::log(std::exp(as - shift) + std::exp(ad - shift)) - (as - shift);
    };
    // k = 1 keeps only the closest same-label neighbor.
    double expect1 = (term(0.8, 0.0) + term(0.96, 0.6) + term(0.96, 0.8)) / 4.0;
    auto res1 = set_distance_batch_loss(z, labels, tau, 1);
    CHECK(res1.loss == doctest::Approx(expect1).epsilon(1e-12));

    // k = 2 averages the top two.
    double expect2 = (term(0.7, 0.0) + term(0.88, 0.6) + term(0.78, 0.8)) / 4.0;
    auto res2 = set_distance_batch_loss(z, labels, tau, 2);
    CHECK(res2.loss == doctest::Approx(expect2).epsilon(1e-12));
    CHECK(res1.loss != res2.loss);

    CHECK_THROWS_AS(set_distance_batch_loss(z, labels, tau, 0), ParamError);
}

TEST_CASE("set distance needs both sets present") {
    std::vector<Embedding> z = {{1.0, 0.0}, {0.9, 0.1}};
    std::vector<Label> labels = {Label::malicious, Label::malicious};
    auto res = set_distance_batch_loss(z, labels, 0.5, 3);
    CHECK(res.loss == 0.0);
    for (const auto& g : res.z_grads)
        for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("bce loss at the reference points") {
    auto at_zero_benign = bce_loss(0.0, Label::benign);
    CHECK(at_zero_benign.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(at_zero_benign.dlogit == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(at_zero_benign.score == 0.5);

    auto at_zero_mal = bce_loss(0.0, Label::malicious);
    CHECK(at_zero_mal.loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    CHECK(at_zero_mal.dlogit == doctest::Approx(0.5).epsilon(1e-15));

    // Confident correct prediction: tiny loss, no overflow.
    auto good = bce_loss(40.0, Label::benign);
    CHECK(good.loss < 1e-15);
    CHECK(std::isfinite(good.loss));

    // Confident wrong prediction: loss ~ |logit|, still finite.
    auto bad = bce_loss(-40.0, Label::benign);
    CHECK(bad.loss == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(std::isfinite(bce_loss(-1000.0, Label::benign).loss));

    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-3.0) == doctest::Approx(1.0 - sigmoid(3.0)).epsilon(1e-12));
    CHECK(sigmoid(1000.0) == doctest::Approx(1.0));
    CHECK(sigmoid(-1000.0) == doctest::Approx(0.0));
}

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

std::vector<PromptRecord> separable_records(int per_class, double jitter_step) {
    std::vector<PromptRecord> recs;
    for (int i = 0; i < per_class; ++i) {
        double j = jitter_step * i - jitter_step * per_class / 2.0;
        recs.push_back({"m" + std::to_string(i), {1.0, j}, Label::malicious});
        recs.push_back({"b" + std::to_string(i), {j, 1.0}, Label::benign});
    }
    return recs;
}

}  // namespace

TEST_CASE("zero scorer starts at log 2 loss") {
    auto proj = identity_net(2);
    auto recs = separable_records(3, 0.05);  // 3 malicious + 3 benign
    auto bank = build_bank_from_dataset(recs, proj);
    auto scorer = mlp_zeros({2, 4, 1}, Activation::relu);

    auto bg = classifier_batch_grads(recs, proj, bank, scorer, 2, Aggregator::mean);
    CHECK(bg.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));

    // Balanced batch and dead hidden units: only the output bias moves.
    CHECK(bg.grads.biases[1][0] == doctest::Approx(0.0).epsilon(1e-14));

    std::vector<PromptRecord> unbalanced(recs.begin(), recs.begin() + 5);
    auto bg2 = classifier_batch_grads(unbalanced, proj, bank, scorer, 2, Aggregator::mean);
    CHECK(bg2.loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(bg2.grads.biases[1][0] != 0.0);

    std::vector<PromptRecord> empty;
    CHECK_THROWS_AS(
        classifier_batch_grads(empty, proj, bank, scorer, 2, Aggregator::mean),
        DegenerateError);
}

TEST_CASE("gradient fidelity spot check") {
    auto rep = gradient_fidelity_check(8, 777);
    CHECK(rep.cases == 8);
    CHECK(rep.comparisons > 0);
    CHECK(rep.max_rel_err < 1e-4);

    CHECK_THROWS_AS(gradient_fidelity_check(0, 1), ParamError);
    CHECK_THROWS_AS(gradient_fidelity_check(1, 1, 0.0), ParamError);
}

TEST_CASE("projection training reduces the loss deterministically") {
    auto recs = separable_records(8, 0.1);
    Rng r(21);
    auto init = mlp_init({2, 4, 2}, Activation::relu, r);

    TrainConfig cfg;
    cfg.batch_size = 4;
    cfg.lr = 0.05;
    cfg.epochs = 40;
    cfg.temperature = 0.5;
    cfg.seed = 3;

    auto out = train_projection(recs, init, cfg);
    REQUIRE(out.epoch_losses.size() == 40);
    CHECK(out.epoch_losses.back() < out.epoch_losses.front());
    CHECK(out.params.weights != init.weights);

    auto again = train_projection(recs, init, cfg);
    CHECK(again.params.weights == out.params.weights);
    CHECK(again.epoch_losses == out.epoch_losses);

    TrainConfig other = cfg;
    other.seed = 4;
    auto shuffled = train_projection(recs, init, other);
    CHECK(shuffled.params.weights != out.params.weights);

    TrainConfig none = cfg;
    none.epochs = 0;
    auto idle = train_projection(recs, init, none);
    CHECK(idle.params.weights == init.weights);
    CHECK(idle.epoch_losses.empty());
}

TEST_CASE("projection training validates its inputs") {
    auto recs = separable_records(4, 0.1);
    Rng r(2);
    auto init = mlp_init({2, 4, 2}, Activation::relu, r);
    TrainConfig cfg;
    cfg.batch_size = 4;

    std::vector<PromptRecord> single;
    for (const auto& rec : recs)
        if (rec.label == Label::malicious) single.push_back(rec);
    TrainConfig small = cfg;
    small.batch_size = 2;
    CHECK_THROWS_AS(train_projection(single, init, small), DegenerateError);

    TrainConfig big = cfg;
    big.batch_size = 100;
    CHECK_THROWS_AS(train_projection(recs, init, big), ParamError);

    TrainConfig bad_lr = cfg;
    bad_lr.temperature = 0.0;
    CHECK_THROWS_AS(train_projection(recs, init, bad_lr), ParamError);

    std::vector<PromptRecord> tiny(recs.begin(), recs.begin() + 1);
    CHECK_THROWS_AS(train_projection(tiny, init, cfg), DegenerateError);

    auto wrong = mlp_init({3, 4, 2}, Activation::relu, r);
    small.batch_size = 2;
    CHECK_THROWS_AS(train_projection(recs, wrong, small), ShapeError);
}

TEST_CASE("classifier training fits separable features") {
    auto recs = separable_records(12, 0.02);
    auto proj = identity_net(2);
    auto bank = build_bank_from_dataset(recs, proj);

    Rng r(6);
    auto scorer_init = mlp_init({2, 8, 1}, Activation::relu, r);
    TrainConfig cfg;
    cfg.batch_size = 6;
    cfg.lr = 0.5;
    cfg.epochs = 60;
    cfg.seed = 5;

    auto out = train_classifier(recs, proj, bank, scorer_init, cfg, 3, Aggregator::mean);
    REQUIRE(out.epoch_losses.size() == 60);
    CHECK(out.epoch_losses.back() < out.epoch_losses.front());
    CHECK(out.epoch_losses.back() < 0.2);

    auto again = train_classifier(recs, proj, bank, scorer_init, cfg, 3, Aggregator::mean);
    CHECK(again.params.weights == out.params.weights);

    auto bad_scorer = mlp_init({3, 8, 1}, Activation::relu, r);
    CHECK_THROWS_AS(
        train_classifier(recs, proj, bank, bad_scorer, cfg, 3, Aggregator::mean),
        ShapeError);
    CHECK_THROWS_AS(
        train_classifier(recs, proj, bank, scorer_init, cfg, 0, Aggregator::mean),
        ParamError);
}

TEST_CASE("bank built from a dataset mirrors the projection") {
    auto recs = separable_records(3, 0.1);
    Rng r(9);
    auto proj = mlp_init({2, 4, 3}, Activation::tanh, r);

    auto bank = build_bank_from_dataset(recs, proj);
    CHECK(bank.dim == 3);
    CHECK(bank.version == 1);
    REQUIRE(bank.entries.size() == recs.size());
    CHECK(bank.count(Polarity::malicious) == 3);
    CHECK(bank.count(Polarity::benign) == 3);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(bank.entries[i].embedding == mlp_forward(proj, recs[i].raw_embedding));
        const char* want = recs[i].label == Label::benign ? "benign" : "malicious";
        CHECK(bank.entries[i].concept_label == want);
    }

    std::vector<PromptRecord> none;
    CHECK_THROWS_AS(build_bank_from_dataset(none, proj), DegenerateError);
}

TEST_CASE("training log csv format") {
    TempDir tmp;
    auto path = tmp.file("log.csv");
    write_training_log_csv(path, {0.5, 0.25});

    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == "epoch,mean_loss\n0,0.5\n1,0.25\n");
}
