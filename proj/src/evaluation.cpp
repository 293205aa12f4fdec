#include "ddif/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ddif/rng.hpp"

namespace ddif {

double harmful_coverage(const BinaryMask& pixel_mask, const BinaryMask& harmful) {
    check_mask(pixel_mask);
    check_mask(harmful);
    if (pixel_mask.height != harmful.height || pixel_mask.width != harmful.width) {
        throw ShapeError("harmful_coverage: mask dims differ");
    }
    std::int64_t total = 0, covered = 0;
    for (std::size_t i = 0; i < harmful.values.size(); ++i) {
        if (harmful.values[i]) {
            ++total;
            if (pixel_mask.values[i]) ++covered;
        }
    }
    if (total == 0) return 1.0;
    return static_cast<double>(covered) / static_cast<double>(total);
}

SweepParameter sweep_parameter_from_name(const std::string& name) {
    if (name == "tau_safe") return SweepParameter::tau_safe;
    if (name == "top_k") return SweepParameter::top_k;
    throw ParamError("unknown sweep parameter: " + name);
}

const char* sweep_parameter_name(SweepParameter p) {
    return p == SweepParameter::tau_safe ? "tau_safe" : "top_k";
}

std::vector<SweepRow> eval_sweep(std::span<const EvalPrompt> prompts,
                                 const PipelineArtifacts& artifacts, const ToyWorld& world,
                                 const SweepConfig& cfg) {
    if (prompts.empty()) throw ParamError("eval_sweep: no prompts");
    if (cfg.values.empty()) throw ParamError("eval_sweep: no sweep values");

    ToyBackend backend(world);
    std::vector<SweepRow> rows;
    rows.reserve(cfg.values.size());
    for (double value : cfg.values) {
        SanitizeConfig run_cfg = cfg.base;
        if (cfg.parameter == SweepParameter::tau_safe) {
            run_cfg.safety.tau_safe = value;
        } else {
            if (value < 1.0 || value != std::floor(value)) {
                throw ParamError("eval_sweep: top_k values must be positive integers");
            }
            run_cfg.safety.k = static_cast<int>(value);
        }

        int flagged = 0;
        int harmful_total = 0;
        int bypassed = 0;
        for (std::size_t i = 0; i < prompts.size(); ++i) {
            run_cfg.gen_seed = cfg.base.gen_seed + i;
            PipelineResult res =
                run_pipeline(prompts[i].embedding, artifacts, backend, run_cfg);
            if (res.decision.route == Route::unsafe_path) ++flagged;

            PlantedScene oracle =
                world.generate_scene(prompts[i].embedding, run_cfg.gen_seed).second;
            if (oracle.harmful.popcount() > 0) {
                ++harmful_total;
                double cov =
                    res.pixel_mask ? harmful_coverage(*res.pixel_mask, oracle.harmful) : 0.0;
                if (cov < cfg.min_coverage) ++bypassed;
            }
        }

        SweepRow row;
        row.value = value;
        row.flag_rate = static_cast<double>(flagged) / static_cast<double>(prompts.size());
        if (harmful_total > 0) {
            row.bypass_rate = static_cast<double>(bypassed) / static_cast<double>(harmful_total);
        }
        rows.push_back(row);
    }
    return rows;
}

Defender defender_from_name(const std::string& name) {
    if (name == "pairwise_filter") return Defender::pairwise_filter;
    if (name == "sanitize_pipeline") return Defender::sanitize_pipeline;
    throw ParamError("unknown defender: " + name);
}

const char* defender_name(Defender d) {
    return d == Defender::pairwise_filter ? "pairwise_filter" : "sanitize_pipeline";
}

ProbeReport probe_simulation(Defender defender, const PipelineArtifacts& artifacts,
                             const ToyWorld& world, const ProbeConfig& cfg) {
    if (cfg.budget < 1) throw ParamError("probe_simulation: budget must be >= 1");
    if (cfg.runs < 1) throw ParamError("probe_simulation: runs must be >= 1");
    if (cfg.target_concept == cfg.cover_concept) {
        throw ParamError("probe_simulation: target and cover concepts must differ");
    }
    // Validates both labels exist.
    (void)world.axis_of(cfg.target_concept);
    (void)world.axis_of(cfg.cover_concept);

    std::vector<Embedding> unsafe_axes;
    for (std::size_t c = 0; c < world.spec().concept_labels.size(); ++c) {
        if (polarity_of(world.spec().concept_labels[c]) == Polarity::malicious) {
            unsafe_axes.push_back(world.concept_axes()[c]);
        }
    }

    ToyBackend backend(world);
    ProbeReport rep;
    rep.defender = defender;
    rep.runs = cfg.runs;

    Rng root(cfg.seed);
    std::vector<double> per_run_queries;
    per_run_queries.reserve(cfg.runs);

    for (int r = 0; r < cfg.runs; ++r) {
        Rng run_rng = root.substream(3, static_cast<std::uint64_t>(r));
        double w_target = 1.0;
        double w_cover = 0.0;
        double queries_to_success = cfg.budget;
        bool success = false;

        for (int q = 0; q < cfg.budget && !success; ++q) {
            std::map<std::string, double> mix;
            mix[cfg.target_concept] = w_target;
            if (w_cover > 0.0) mix[cfg.cover_concept] = w_cover;
            Embedding e = world.text_encode(mix, cfg.noise_level, run_rng);
            std::uint64_t gen_seed =
                cfg.pipeline.gen_seed + static_cast<std::uint64_t>(r) * cfg.budget + q;
            ++rep.total_queries;

            if (defender == Defender::pairwise_filter) {
                FilterDecision decision = pairwise_filter(e, unsafe_axes, cfg.filter_tau);
                rep.feedback_bits += 1;  // the attacker sees allow vs discard
                if (decision == FilterDecision::discard) {
                    w_cover += 0.2;  // dilute the flagged prompt and retry
                    continue;
                }
                rep.images_returned += 1;
                PlantedScene oracle = world.generate_scene(e, gen_seed).second;
                if (oracle.harmful.popcount() > 0) {
                    success = true;  // raw image shipped with the harmful region intact
                } else {
                    w_target += 0.1;  // passed the filter but rendered nothing
                }
            } else {
                SanitizeConfig run_cfg = cfg.pipeline;
                run_cfg.gen_seed = gen_seed;
                PipelineResult res = run_pipeline(e, artifacts, backend, run_cfg);
                rep.images_returned += 1;  // the pipeline always answers with an image
                PlantedScene oracle = world.generate_scene(e, gen_seed).second;
                if (oracle.harmful.popcount() > 0) {
                    double cov =
                        res.pixel_mask ? harmful_coverage(*res.pixel_mask, oracle.harmful) : 0.0;
                    if (cov < cfg.min_coverage) {
                        success = true;
                    } else {
                        w_cover += 0.2;  // visible blur over the target region
                    }
                } else {
                    w_target += 0.1;
                }
            }
            if (success) queries_to_success = q + 1;
        }
        if (success) rep.successes += 1;
        per_run_queries.push_back(queries_to_success);
    }

    std::sort(per_run_queries.begin(), per_run_queries.end());
    std::size_t n = per_run_queries.size();
    rep.median_queries = n % 2 == 1 ? per_run_queries[n / 2]
                                    : 0.5 * (per_run_queries[n / 2 - 1] + per_run_queries[n / 2]);
    return rep;
}

}  // namespace ddif
