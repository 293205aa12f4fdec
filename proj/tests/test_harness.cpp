#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ddif/errors.hpp"
#include "ddif/evaluation.hpp"
#include "ddif/pipeline.hpp"
#include "ddif/toy_world.hpp"

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

MlpParams margin_scorer() {
    MlpParams p;
    p.layer_dims = {2, 1};
    p.activation = Activation::relu;
    p.weights = {{-6.0, 6.0}};
    p.biases = {{0.0}};
    return p;
}

struct Fixture {
    ToyWorld world;
    PipelineArtifacts artifacts;
    SanitizeConfig cfg;

    explicit Fixture(std::uint64_t seed = 0) : world(make_spec(seed)) {
        artifacts.projection = identity_net(world.spec().embed_dim);
        artifacts.scorer = margin_scorer();
        for (const auto& label : world.spec().concept_labels)
            artifacts.bank.add(label, world.axis_of(label));
        cfg.safety.k = 1;
        cfg.gen_seed = 5;
    }

    static ToySpec make_spec(std::uint64_t seed) {
        ToySpec spec;
        spec.embed_dim = 16;
        spec.seed = seed;
        return spec;
    }

    Embedding prompt(const std::string& label, double noise, std::uint64_t rng_seed) const {
        Rng rng(rng_seed);
        return world.text_encode({{label, 1.0}}, noise, rng);
    }
};

}  // namespace

TEST_CASE("benign prompts pass through untouched") {
    Fixture fx;
    ToyBackend backend(fx.world);
    InstrumentedBackend counted(backend);

    auto e = fx.prompt("benign", 0.1, 77);
    auto res = run_pipeline(e, fx.artifacts, counted, fx.cfg);

    CHECK(res.decision.route == Route::benign_path);
    CHECK(!res.sensitivity.has_value());
    CHECK(!res.grid_mask.has_value());
    CHECK(!res.pixel_mask.has_value());

    auto raw = backend.generate(e, fx.cfg.gen_seed);
    CHECK(res.image.pixels == raw.pixels);

    CHECK(counted.generate_calls == 1);
    CHECK(counted.decode_calls == 0);
    CHECK(counted.encode_calls == 0);
}

TEST_CASE("flagged prompts are redacted inside the mask only") {
    Fixture fx;
    ToyBackend backend(fx.world);
    InstrumentedBackend counted(backend);

    auto e = fx.prompt("violence", 0.05, 31);
    auto res = run_pipeline(e, fx.artifacts, counted, fx.cfg);

    REQUIRE(res.decision.route == Route::unsafe_path);
    REQUIRE(res.sensitivity.has_value());
    REQUIRE(res.grid_mask.has_value());
    REQUIRE(res.pixel_mask.has_value());
    CHECK(res.sensitivity->grid_size == 8);
    CHECK(res.pixel_mask->height == 64);
    CHECK(res.pixel_mask->width == 64);
    CHECK(res.pixel_mask->popcount() > 0);

    // Exactly grid^2 decodes on top of the single generation.
    CHECK(counted.generate_calls == 1);
    CHECK(counted.decode_calls == 64);
    CHECK(counted.encode_calls == 1);

    // Unmasked pixels are bit-identical to the raw generation; something
    // inside the mask actually changed.
    auto raw = backend.generate(e, fx.cfg.gen_seed);
    bool changed = false;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            for (int c = 0; c < 3; ++c) {
                if (res.pixel_mask->at(y, x) == 0) {
                    CHECK(res.image.at(y, x, c) == raw.at(y, x, c));
                } else if (res.image.at(y, x, c) != raw.at(y, x, c)) {
                    changed = true;
                }
            }
    CHECK(changed);

    // The mask lands on the planted blob.
    auto scene = fx.world.generate_scene(e, fx.cfg.gen_seed).second;
    REQUIRE(scene.harmful.popcount() > 0);
    CHECK(harmful_coverage(*res.pixel_mask, scene.harmful) >= 0.5);
}

TEST_CASE("pipeline runs are reproducible") {
    Fixture fx;
    ToyBackend backend(fx.world);

    auto e = fx.prompt("violence", 0.05, 13);
    auto a = run_pipeline(e, fx.artifacts, backend, fx.cfg);
    auto b = run_pipeline(e, fx.artifacts, backend, fx.cfg);

    CHECK(a.image.pixels == b.image.pixels);
    CHECK(a.decision.score == b.decision.score);
    REQUIRE(a.sensitivity.has_value());
    REQUIRE(b.sensitivity.has_value());
    CHECK(a.sensitivity->grid == b.sensitivity->grid);
    CHECK(a.pixel_mask->values == b.pixel_mask->values);
}

TEST_CASE("zero threshold disables flagging") {
    Fixture fx;
    ToyBackend backend(fx.world);
    SanitizeConfig cfg = fx.cfg;
    cfg.safety.tau_safe = 0.0;

    auto e = fx.prompt("violence", 0.0, 1);
    auto res = run_pipeline(e, fx.artifacts, backend, cfg);
    CHECK(res.decision.route == Route::benign_path);
    CHECK(res.image.pixels == backend.generate(e, cfg.gen_seed).pixels);
}

TEST_CASE("pipeline surfaces bank problems") {
    Fixture fx;
    ToyBackend backend(fx.world);
    PipelineArtifacts broken = fx.artifacts;
    broken.bank = ConceptBank{};
    broken.bank.add("violence", fx.world.axis_of("violence"));

    auto e = fx.prompt("violence", 0.0, 1);
    CHECK_THROWS_AS(run_pipeline(e, broken, backend, fx.cfg), DegenerateError);
}

TEST_CASE("harmful coverage accounting") {
    auto mask = BinaryMask::filled(4, 4, 0);
    auto harmful = BinaryMask::filled(4, 4, 0);
    harmful.at(0, 0) = 1;
    harmful.at(0, 1) = 1;

    CHECK(harmful_coverage(mask, harmful) == 0.0);
    mask.at(0, 0) = 1;
    CHECK(harmful_coverage(mask, harmful) == 0.5);
    mask.at(0, 1) = 1;
    mask.at(3, 3) = 1;  // extra coverage elsewhere is not penalized here
    CHECK(harmful_coverage(mask, harmful) == 1.0);

    CHECK(harmful_coverage(mask, BinaryMask::filled(4, 4, 0)) == 1.0);
    CHECK_THROWS_AS(harmful_coverage(mask, BinaryMask::filled(2, 4, 0)), ShapeError);
}

TEST_CASE("threshold sweep moves the flag rate monotonically") {
    Fixture fx;

    std::vector<EvalPrompt> prompts;
    for (int i = 0; i < 6; ++i) {
        bool benign = i % 2 == 0;
        prompts.push_back({"p" + std::to_string(i),
                           fx.prompt(benign ? "benign" : "violence", 0.1, 100 + i),
                           benign ? Label::benign : Label::malicious});
    }

    SweepConfig sweep;
    sweep.parameter = SweepParameter::tau_safe;
    sweep.values = {0.0, 0.5, 1.0};
    sweep.base = fx.cfg;

    auto rows = eval_sweep(prompts, fx.artifacts, fx.world, sweep);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].value == 0.0);
    CHECK(rows[0].flag_rate == 0.0);
    CHECK(rows[1].flag_rate >= rows[0].flag_rate);
    CHECK(rows[2].flag_rate == 1.0);

    // Nothing flagged at tau 0: every harmful scene slips through.
    REQUIRE(rows[0].bypass_rate.has_value());
    CHECK(*rows[0].bypass_rate == 1.0);
    // Full flagging localizes the blobs, so most harmful scenes are covered.
    REQUIRE(rows[2].bypass_rate.has_value());
    CHECK(*rows[2].bypass_rate < 1.0);
}

TEST_CASE("sweep over k and degenerate cases") {
    Fixture fx;
    std::vector<EvalPrompt> benign_only = {
        {"p0", fx.prompt("benign", 0.1, 3), Label::benign},
        {"p1", fx.prompt("benign", 0.1, 4), Label::benign},
    };

    SweepConfig sweep;
    sweep.parameter = SweepParameter::top_k;
    sweep.values = {1.0, 2.0};
    sweep.base = fx.cfg;
    sweep.base.safety.tau_safe = 1.0;  // force flagging to exercise the mask path

    auto rows = eval_sweep(benign_only, fx.artifacts, fx.world, sweep);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].flag_rate == 1.0);
    // No prompt renders harmful pixels, so the bypass rate is undefined.
    CHECK(!rows[0].bypass_rate.has_value());

    SweepConfig bad = sweep;
    bad.values = {1.5};
    CHECK_THROWS_AS(eval_sweep(benign_only, fx.artifacts, fx.world, bad), ParamError);
    bad.values = {};
    CHECK_THROWS_AS(eval_sweep(benign_only, fx.artifacts, fx.world, bad), ParamError);
    std::vector<EvalPrompt> no_prompts;
    CHECK_THROWS_AS(eval_sweep(no_prompts, fx.artifacts, fx.world, sweep), ParamError);

    CHECK(sweep_parameter_from_name("tau_safe") == SweepParameter::tau_safe);
    CHECK(sweep_parameter_from_name("top_k") == SweepParameter::top_k);
    CHECK_THROWS_AS(sweep_parameter_from_name("gamma"), ParamError);
}

TEST_CASE("probe simulation separates the defenders' leakage") {
    Fixture fx;

    ProbeConfig cfg;
    cfg.budget = 12;
    cfg.runs = 4;
    cfg.seed = 9;
    cfg.pipeline = fx.cfg;

    auto filter = probe_simulation(Defender::pairwise_filter, fx.artifacts, fx.world, cfg);
    CHECK(filter.defender == Defender::pairwise_filter);
    CHECK(filter.runs == 4);
    CHECK(filter.total_queries > 0);
    CHECK(filter.total_queries <= cfg.budget * cfg.runs);
    // One explicit allow/discard bit per query.
    CHECK(filter.feedback_bits == static_cast<std::uint64_t>(filter.total_queries));
    CHECK(filter.feedback_bits_per_query() == 1.0);
    // Discarded prompts return nothing.
    CHECK(filter.images_returned < filter.total_queries);

    auto pipe = probe_simulation(Defender::sanitize_pipeline, fx.artifacts, fx.world, cfg);
    CHECK(pipe.feedback_bits == 0);
    CHECK(pipe.feedback_bits_per_query() == 0.0);
    CHECK(pipe.images_returned == pipe.total_queries);
    CHECK(pipe.image_return_rate() == 1.0);
    CHECK(pipe.median_queries > 0.0);

    auto again = probe_simulation(Defender::pairwise_filter, fx.artifacts, fx.world, cfg);
    CHECK(again.total_queries == filter.total_queries);
    CHECK(again.successes == filter.successes);
    CHECK(again.median_queries == filter.median_queries);

    ProbeConfig bad = cfg;
    bad.runs = 0;
    CHECK_THROWS_AS(probe_simulation(Defender::pairwise_filter, fx.artifacts, fx.world, bad),
                    ParamError);
    bad = cfg;
    bad.cover_concept = cfg.target_concept;
    CHECK_THROWS_AS(probe_simulation(Defender::pairwise_filter, fx.artifacts, fx.world, bad),
                    ParamError);

    CHECK(defender_from_name("pairwise_filter") == Defender::pairwise_filter);
    CHECK(defender_from_name("sanitize_pipeline") == Defender::sanitize_pipeline);
    CHECK_THROWS_AS(defender_from_name("none"), ParamError);
}
