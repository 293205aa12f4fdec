#include "ddif/cli.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ddif/dataset.hpp"
#include "ddif/evaluation.hpp"
#include "ddif/netpbm.hpp"
#include "ddif/pipeline.hpp"
#include "ddif/reports.hpp"
#include "ddif/run_config.hpp"
#include "ddif/toy_world.hpp"
#include "ddif/trainer.hpp"

namespace ddif {
namespace {

const std::vector<std::string> kConfigKeys = {
    "toy.embed_dim",      "toy.image_size",     "toy.latent_downsample",
    "toy.seed",           "toy.concepts",       "toy.render_threshold",
    "toy.blob_radius",    "toy.blob_intensity", "toy.pattern_wavelength",
    "toy.background_amplitude",
    "data.benign_count",  "data.malicious_count", "data.noise_level",
    "data.cover_max",     "data.seed",
    "train.batch_size",   "train.lr",           "train.epochs",
    "train.temperature",  "train.seed",         "train.loss",
    "train.set_k",        "train.hidden",       "train.activation",
    "cls.batch_size",     "cls.lr",             "cls.epochs",
    "cls.seed",           "cls.hidden",         "cls.activation",
    "pipeline.tau_safe",  "pipeline.k",         "pipeline.aggregator",
    "pipeline.gamma",
    "loc.grid_size",      "loc.beta",           "loc.hist_levels",
    "loc.seed",
    "blur.sigma",         "blur.radius",
    "gen.seed",
    "sweep.parameter",    "sweep.values",       "sweep.min_coverage",
    "probe.budget",       "probe.runs",         "probe.seed",
    "probe.noise_level",  "probe.filter_tau",   "probe.target",
    "probe.cover",        "probe.min_coverage",
};

// Keys the --seed shortcut overrides all at once.
const std::vector<std::string> kSeedKeys = {
    "toy.seed", "data.seed", "train.seed", "cls.seed", "loc.seed", "gen.seed", "probe.seed",
};

struct CommonOpts {
    std::string config_path;
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& c) {
    sub->add_option("--config", c.config_path, "key=value config file");
    sub->add_option("--set", c.sets, "config override, key=value (repeatable)")
        ->take_all();
    c.seed_opt = sub->add_option("--seed", c.seed, "override every *.seed config key");
}

RunConfig resolve_config(const CommonOpts& c) {
    RunConfig cfg;
    if (!c.config_path.empty()) cfg = RunConfig::from_file(c.config_path, kConfigKeys);
    for (const auto& s : c.sets) cfg.set(s, kConfigKeys);
    if (c.seed_opt && c.seed_opt->count() > 0) {
        for (const auto& key : kSeedKeys) cfg.set_value(key, std::to_string(c.seed));
    }
    return cfg;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        std::string item = text.substr(start, comma - start);
        auto b = item.find_first_not_of(" \t");
        auto e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
        start = comma + 1;
    }
    return out;
}

double parse_double(const std::string& text, const std::string& what) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end == text.c_str() || *end != '\0' || errno == ERANGE)
        throw ParseError(what + ": not a number: '" + text + "'");
    return v;
}

ToySpec toy_spec_from(const RunConfig& cfg) {
    ToySpec s;
    s.embed_dim = cfg.get_int("toy.embed_dim", s.embed_dim);
    s.image_size = cfg.get_int("toy.image_size", s.image_size);
    s.latent_downsample = cfg.get_int("toy.latent_downsample", s.latent_downsample);
    s.seed = cfg.get_u64("toy.seed", s.seed);
    std::string concepts = cfg.get_string("toy.concepts", "benign,violence,explicit");
    s.concept_labels = split_list(concepts);
    for (const auto& l : s.concept_labels) {
        if (l.empty()) throw ParseError("toy.concepts: empty label in '" + concepts + "'");
    }
    s.render_threshold = cfg.get_double("toy.render_threshold", s.render_threshold);
    s.blob_radius = cfg.get_int("toy.blob_radius", s.blob_radius);
    s.blob_intensity = cfg.get_double("toy.blob_intensity", s.blob_intensity);
    s.pattern_wavelength = cfg.get_double("toy.pattern_wavelength", s.pattern_wavelength);
    s.background_amplitude = cfg.get_double("toy.background_amplitude", s.background_amplitude);
    return s;
}

PipelineConfig pipeline_config_from(const RunConfig& cfg) {
    PipelineConfig pc;
    pc.tau_safe = cfg.get_double("pipeline.tau_safe", pc.tau_safe);
    pc.k = cfg.get_int("pipeline.k", pc.k);
    pc.aggregator = aggregator_from_name(
        cfg.get_string("pipeline.aggregator", aggregator_name(pc.aggregator)));
    pc.gamma = cfg.get_double("pipeline.gamma", pc.gamma);
    return pc;
}

SanitizeConfig sanitize_config_from(const RunConfig& cfg) {
    SanitizeConfig sc;
    sc.safety = pipeline_config_from(cfg);
    sc.localization.grid_size = cfg.get_int("loc.grid_size", sc.localization.grid_size);
    sc.localization.beta = cfg.get_double("loc.beta", sc.localization.beta);
    sc.localization.hist_levels = cfg.get_int("loc.hist_levels", sc.localization.hist_levels);
    sc.localization.seed = cfg.get_u64("loc.seed", sc.localization.seed);
    sc.blur.sigma = cfg.get_double("blur.sigma", 0.0);  // 0 = derive from width
    sc.blur.radius = cfg.get_int("blur.radius", 0);
    if (sc.blur.sigma > 0.0 && sc.blur.radius < 1) {
        sc.blur.radius = std::max(1, static_cast<int>(std::ceil(3.0 * sc.blur.sigma)));
    }
    sc.gen_seed = cfg.get_u64("gen.seed", 0);
    return sc;
}

TrainConfig proj_train_config_from(const RunConfig& cfg) {
    TrainConfig tc;
    tc.batch_size = cfg.get_int("train.batch_size", tc.batch_size);
    tc.lr = cfg.get_double("train.lr", tc.lr);
    tc.epochs = cfg.get_int("train.epochs", tc.epochs);
    tc.temperature = cfg.get_double("train.temperature", tc.temperature);
    tc.seed = cfg.get_u64("train.seed", tc.seed);
    std::string loss = cfg.get_string("train.loss", "batch_max");
    if (loss == "batch_max") {
        tc.loss = ProjectionLoss::batch_max_contrast;
    } else if (loss == "set_distance") {
        tc.loss = ProjectionLoss::set_distance_contrast;
    } else {
        throw ParseError("train.loss: expected batch_max or set_distance, got '" + loss + "'");
    }
    tc.set_k = cfg.get_int("train.set_k", tc.set_k);
    return tc;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir + ": " + ec.message());
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void emit_manifest(const std::string& out_dir, const std::string& command, const RunConfig& cfg,
                   std::map<std::string, std::string> extra) {
    std::map<std::string, std::string> entries = cfg.consumed();
    entries["command"] = command;
    for (auto& [k, v] : extra) entries[k] = std::move(v);
    write_manifest(join_path(out_dir, "manifest.txt"), entries);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

PipelineArtifacts load_artifacts(const std::string& projection_path,
                                 const std::string& scorer_path, const std::string& bank_path) {
    PipelineArtifacts art;
    art.projection = load_mlp(projection_path);
    art.scorer = load_mlp(scorer_path);
    art.bank = bank_load(bank_path);
    return art;
}

std::map<std::string, double> parse_mix(const std::string& text) {
    std::map<std::string, double> mix;
    for (const std::string& item : split_list(text)) {
        auto colon = item.find(':');
        if (colon == std::string::npos)
            throw ParseError("--mix: expected label:weight, got '" + item + "'");
        std::string label = item.substr(0, colon);
        if (label.empty()) throw ParseError("--mix: empty label in '" + item + "'");
        if (mix.count(label)) throw ParseError("--mix: duplicate label '" + label + "'");
        mix[label] = parse_double(item.substr(colon + 1), "--mix weight");
    }
    if (mix.empty()) throw ParseError("--mix: empty mix");
    return mix;
}

Embedding read_embedding_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open embedding file: " + path);
    Embedding e;
    double v;
    while (in >> v) e.push_back(v);
    if (!in.eof()) throw ParseError(path + ": non-numeric content");
    if (e.empty()) throw ParseError(path + ": no values");
    return e;
}

// ---- subcommand bodies ------------------------------------------------

void run_gen_toy_data(const CommonOpts& common, const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    ToyWorld world(toy_spec_from(cfg));
    int n_benign = cfg.get_int("data.benign_count", 200);
    int n_malicious = cfg.get_int("data.malicious_count", 200);
    double noise = cfg.get_double("data.noise_level", 0.1);
    double cover_max = cfg.get_double("data.cover_max", 0.25);
    std::uint64_t seed = cfg.get_u64("data.seed", 0);
    if (n_benign < 0 || n_malicious < 0)
        throw ParamError("data counts must be non-negative");

    std::vector<std::string> benign_labels, malicious_labels;
    for (const auto& l : world.spec().concept_labels) {
        (polarity_of(l) == Polarity::benign ? benign_labels : malicious_labels).push_back(l);
    }
    if (benign_labels.empty() || malicious_labels.empty())
        throw DegenerateError("toy.concepts needs at least one benign and one other label");

    Rng rng(seed);
    std::vector<PromptRecord> records;
    records.reserve(static_cast<std::size_t>(n_benign + n_malicious));
    for (int i = 0; i < n_benign; ++i) {
        PromptRecord rec;
        rec.prompt_id = "b" + std::to_string(i);
        rec.label = Label::benign;
        std::map<std::string, double> mix{{benign_labels[0], 1.0}};
        rec.raw_embedding = world.text_encode(mix, noise, rng);
        records.push_back(std::move(rec));
    }
    for (int i = 0; i < n_malicious; ++i) {
        PromptRecord rec;
        rec.prompt_id = "m" + std::to_string(i);
        rec.label = Label::malicious;
        std::size_t pick = static_cast<std::size_t>(rng.next_u64() % malicious_labels.size());
        std::map<std::string, double> mix{{malicious_labels[pick], 1.0},
                                          {benign_labels[0], rng.uniform(0.0, cover_max)}};
        rec.raw_embedding = world.text_encode(mix, noise, rng);
        records.push_back(std::move(rec));
    }

    ensure_dir(out_dir);
    std::string path = join_path(out_dir, "dataset.tsv");
    save_dataset_tsv(records, path);
    emit_manifest(out_dir, "gen-toy-data", cfg,
                  {{"output.dataset", path}, {"output.records", std::to_string(records.size())}});
    std::cout << "wrote " << records.size() << " prompts to " << path << "\n";
}

void run_build_bank(const CommonOpts& common, const std::string& dataset_path,
                    const std::string& projection_path, const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    auto records = load_dataset_tsv(dataset_path);
    MlpParams projection = load_mlp(projection_path);
    ConceptBank bank = build_bank_from_dataset(records, projection);

    ensure_dir(out_dir);
    std::string path = join_path(out_dir, "bank.txt");
    bank_save(bank, path);
    emit_manifest(out_dir, "build-bank", cfg,
                  {{"input.dataset", dataset_path},
                   {"input.projection", projection_path},
                   {"output.bank", path}});
    std::cout << "bank: dim=" << bank.dim << " malicious=" << bank.count(Polarity::malicious)
              << " benign=" << bank.count(Polarity::benign) << " -> " << path << "\n";
}

void run_train_proj(const CommonOpts& common, const std::string& dataset_path,
                    const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    auto records = load_dataset_tsv(dataset_path);
    TrainConfig tc = proj_train_config_from(cfg);

    int d = static_cast<int>(records.at(0).raw_embedding.size());
    int hidden = cfg.get_int("train.hidden", 0);
    if (hidden <= 0) hidden = 2 * d;
    Activation act = activation_from_name(cfg.get_string("train.activation", "relu"));

    Rng init_rng = Rng(tc.seed).substream(5, 0);
    MlpParams init = mlp_init({d, hidden, d}, act, init_rng);
    TrainResult result = train_projection(records, init, tc);

    ensure_dir(out_dir);
    std::string model_path = join_path(out_dir, "projection.txt");
    std::string log_path = join_path(out_dir, "training_log.csv");
    save_mlp(result.params, model_path);
    write_training_log_csv(log_path, result.epoch_losses);
    emit_manifest(out_dir, "train-proj", cfg,
                  {{"input.dataset", dataset_path},
                   {"output.projection", model_path},
                   {"output.training_log", log_path}});
    double last = result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
    std::cout << "projection " << d << "->" << hidden << "->" << d << ", " << tc.epochs
              << " epochs, final loss " << fmt(last) << " -> " << model_path << "\n";
}

void run_train_cls(const CommonOpts& common, const std::string& dataset_path,
                   const std::string& projection_path, const std::string& bank_path,
                   const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    auto records = load_dataset_tsv(dataset_path);
    MlpParams projection = load_mlp(projection_path);
    ConceptBank bank = bank_load(bank_path);

    TrainConfig tc;
    tc.batch_size = cfg.get_int("cls.batch_size", 64);
    tc.lr = cfg.get_double("cls.lr", 0.1);
    tc.epochs = cfg.get_int("cls.epochs", 100);
    tc.seed = cfg.get_u64("cls.seed", 0);
    PipelineConfig pc = pipeline_config_from(cfg);

    int hidden = cfg.get_int("cls.hidden", 8);
    Activation act = activation_from_name(cfg.get_string("cls.activation", "relu"));
    Rng init_rng = Rng(tc.seed).substream(5, 1);
    MlpParams scorer_init = mlp_init({2, hidden, 1}, act, init_rng);

    TrainResult result =
        train_classifier(records, projection, bank, scorer_init, tc, pc.k, pc.aggregator);

    ensure_dir(out_dir);
    std::string model_path = join_path(out_dir, "scorer.txt");
    std::string log_path = join_path(out_dir, "scorer_log.csv");
    save_mlp(result.params, model_path);
    write_training_log_csv(log_path, result.epoch_losses);
    // The checkpoint stores bare weights; this records the feature wiring
    // the scorer was trained against.
    write_manifest(join_path(out_dir, "scorer.meta"),
                   {{"features", "d_mal,d_ben"},
                    {"aggregator", aggregator_name(pc.aggregator)},
                    {"k", std::to_string(pc.k)},
                    {"positive_class", "benign"}});
    emit_manifest(out_dir, "train-cls", cfg,
                  {{"input.dataset", dataset_path},
                   {"input.projection", projection_path},
                   {"input.bank", bank_path},
                   {"output.scorer", model_path},
                   {"output.scorer_log", log_path}});
    double last = result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back();
    std::cout << "scorer 2->" << hidden << "->1, " << tc.epochs << " epochs, final loss "
              << fmt(last) << " -> " << model_path << "\n";
}

void run_score(const CommonOpts& common, const std::string& dataset_path,
               const std::string& projection_path, const std::string& scorer_path,
               const std::string& bank_path, const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    auto records = load_dataset_tsv(dataset_path);
    PipelineArtifacts art = load_artifacts(projection_path, scorer_path, bank_path);
    PipelineConfig pc = pipeline_config_from(cfg);

    std::vector<std::pair<std::string, SafetyDecision>> results;
    results.reserve(records.size());
    std::size_t flagged = 0, correct = 0;
    for (const auto& rec : records) {
        SafetyDecision d = safety_score(rec.raw_embedding, art.projection, art.scorer, art.bank, pc);
        if (d.route == Route::unsafe_path) ++flagged;
        bool routed_benign = d.route == Route::benign_path;
        if (routed_benign == (rec.label == Label::benign)) ++correct;
        results.emplace_back(rec.prompt_id, std::move(d));
    }

    ensure_dir(out_dir);
    std::string path = join_path(out_dir, "scores.jsonl");
    write_score_jsonl(path, results);
    double flag_rate = records.empty() ? 0.0 : static_cast<double>(flagged) / records.size();
    double accuracy = records.empty() ? 0.0 : static_cast<double>(correct) / records.size();
    emit_manifest(out_dir, "score", cfg,
                  {{"input.dataset", dataset_path},
                   {"output.scores", path},
                   {"result.flag_rate", fmt(flag_rate)},
                   {"result.routing_accuracy", fmt(accuracy)}});
    std::cout << records.size() << " prompts, flag rate " << fmt(flag_rate)
              << ", routing accuracy " << fmt(accuracy) << " -> " << path << "\n";
}

void run_sanitize(const CommonOpts& common, const std::string& projection_path,
                  const std::string& scorer_path, const std::string& bank_path,
                  const std::string& out_dir, const std::string& mix_text,
                  const std::string& embedding_path, const std::string& prompt_id, double noise,
                  bool scene_json) {
    RunConfig cfg = resolve_config(common);
    if (mix_text.empty() == embedding_path.empty())
        throw ParamError("sanitize: pass exactly one of --mix or --embedding-file");

    PipelineArtifacts art = load_artifacts(projection_path, scorer_path, bank_path);
    SanitizeConfig sc = sanitize_config_from(cfg);
    ToyWorld world(toy_spec_from(cfg));
    ToyBackend backend(world);

    Embedding e;
    if (!mix_text.empty()) {
        Rng enc_rng(cfg.get_u64("data.seed", 0));
        e = world.text_encode(parse_mix(mix_text), noise, enc_rng);
    } else {
        e = read_embedding_file(embedding_path);
    }

    PipelineResult res = run_pipeline(e, art, backend, sc);

    ensure_dir(out_dir);
    std::map<std::string, std::string> extra{{"output.image", join_path(out_dir, "image.ppm")}};
    save_ppm(res.image, join_path(out_dir, "image.ppm"));

    nlohmann::ordered_json dj;
    dj["prompt_id"] = prompt_id;
    dj["score"] = res.decision.score;
    dj["d_mal"] = res.decision.distances.d_mal;
    dj["d_ben"] = res.decision.distances.d_ben;
    dj["route"] = route_name(res.decision.route);
    dj["tau_safe"] = sc.safety.tau_safe;
    if (res.decision.route == Route::unsafe_path) {
        write_sensitivity_csv(join_path(out_dir, "sensitivity.csv"), *res.sensitivity);
        save_pgm(sensitivity_to_image(*res.sensitivity), join_path(out_dir, "sensitivity.pgm"));
        save_mask_pgm(*res.pixel_mask, join_path(out_dir, "mask.pgm"));
        dj["otsu_level"] = res.grid_mask->threshold_level;
        dj["masked_cells"] = res.grid_mask->mask.popcount();
        dj["masked_pixels"] = res.pixel_mask->popcount();
        extra["output.mask"] = join_path(out_dir, "mask.pgm");
        extra["output.sensitivity"] = join_path(out_dir, "sensitivity.csv");
    }
    std::ofstream dout(join_path(out_dir, "decision.json"));
    if (!dout) throw IoError("cannot write decision.json");
    dout << dj.dump(2) << "\n";

    if (scene_json) {
        if (mix_text.empty())
            throw ParamError("sanitize: --scene-json needs --mix (the oracle is world-side)");
        write_scene_json(join_path(out_dir, "scene.json"),
                         world.generate_scene(e, sc.gen_seed).second);
        extra["output.scene"] = join_path(out_dir, "scene.json");
    }
    emit_manifest(out_dir, "sanitize", cfg, extra);
    std::cout << prompt_id << ": score " << fmt(res.decision.score) << ", route "
              << route_name(res.decision.route) << " -> " << join_path(out_dir, "image.ppm")
              << "\n";
}

void run_eval_sweep(const CommonOpts& common, const std::string& dataset_path,
                    const std::string& projection_path, const std::string& scorer_path,
                    const std::string& bank_path, const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    auto records = load_dataset_tsv(dataset_path);
    PipelineArtifacts art = load_artifacts(projection_path, scorer_path, bank_path);
    ToyWorld world(toy_spec_from(cfg));

    SweepConfig swc;
    swc.parameter = sweep_parameter_from_name(cfg.get_string("sweep.parameter", "tau_safe"));
    std::string values = cfg.get_string("sweep.values", "0,0.01,0.05,0.1,0.2,0.5,1");
    for (const std::string& v : split_list(values))
        swc.values.push_back(parse_double(v, "sweep.values"));
    swc.base = sanitize_config_from(cfg);
    swc.min_coverage = cfg.get_double("sweep.min_coverage", 0.5);

    std::vector<EvalPrompt> prompts;
    prompts.reserve(records.size());
    for (auto& rec : records)
        prompts.push_back(EvalPrompt{rec.prompt_id, rec.raw_embedding, rec.label});

    std::vector<SweepRow> rows = eval_sweep(prompts, art, world, swc);

    ensure_dir(out_dir);
    std::string path = join_path(out_dir, "sweep.csv");
    write_sweep_csv(path, rows);
    emit_manifest(out_dir, "eval-sweep", cfg,
                  {{"input.dataset", dataset_path}, {"output.sweep", path}});
    std::cout << sweep_parameter_name(swc.parameter) << " sweep over " << prompts.size()
              << " prompts -> " << path << "\n";
    for (const auto& row : rows) {
        std::cout << "  " << fmt(row.value) << ": flag_rate " << fmt(row.flag_rate)
                  << ", bypass_rate "
                  << (row.bypass_rate ? fmt(*row.bypass_rate) : std::string("n/a")) << "\n";
    }
}

nlohmann::ordered_json probe_report_json(const ProbeReport& rep) {
    nlohmann::ordered_json j;
    j["defender"] = defender_name(rep.defender);
    j["runs"] = rep.runs;
    j["total_queries"] = rep.total_queries;
    j["images_returned"] = rep.images_returned;
    j["image_return_rate"] = rep.image_return_rate();
    j["feedback_bits"] = rep.feedback_bits;
    j["feedback_bits_per_query"] = rep.feedback_bits_per_query();
    j["successes"] = rep.successes;
    j["median_queries"] = rep.median_queries;
    return j;
}

void run_probe_sim(const CommonOpts& common, const std::string& projection_path,
                   const std::string& scorer_path, const std::string& bank_path,
                   const std::string& out_dir) {
    RunConfig cfg = resolve_config(common);
    PipelineArtifacts art = load_artifacts(projection_path, scorer_path, bank_path);
    ToyWorld world(toy_spec_from(cfg));

    ProbeConfig pc;
    pc.budget = cfg.get_int("probe.budget", 64);
    pc.runs = cfg.get_int("probe.runs", 20);
    pc.seed = cfg.get_u64("probe.seed", 0);
    pc.noise_level = cfg.get_double("probe.noise_level", 0.05);
    pc.filter_tau = cfg.get_double("probe.filter_tau", 0.3);
    pc.pipeline = sanitize_config_from(cfg);
    pc.min_coverage = cfg.get_double("probe.min_coverage", 0.5);
    pc.target_concept = cfg.get_string("probe.target", "violence");
    pc.cover_concept = cfg.get_string("probe.cover", "benign");

    ProbeReport filter_rep = probe_simulation(Defender::pairwise_filter, art, world, pc);
    ProbeReport pipe_rep = probe_simulation(Defender::sanitize_pipeline, art, world, pc);

    ensure_dir(out_dir);
    nlohmann::ordered_json j;
    j["reports"] = {probe_report_json(filter_rep), probe_report_json(pipe_rep)};
    std::string path = join_path(out_dir, "probe.json");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << "\n";

    emit_manifest(out_dir, "probe-sim", cfg, {{"output.probe", path}});
    for (const ProbeReport& rep : {filter_rep, pipe_rep}) {
        std::cout << defender_name(rep.defender) << ": " << rep.total_queries << " queries, "
                  << fmt(rep.feedback_bits_per_query()) << " feedback bits/query, image return rate "
                  << fmt(rep.image_return_rate()) << ", " << rep.successes << "/" << rep.runs
                  << " runs bypassed (median " << fmt(rep.median_queries) << " queries)\n";
    }
}

int run_grad_check(int cases, std::uint64_t seed, double step, double threshold) {
    GradCheckReport rep = gradient_fidelity_check(cases, seed, step);
    std::cout << rep.cases << " cases, " << rep.comparisons << " parameters, max rel err "
              << fmt(rep.max_rel_err) << " (threshold " << fmt(threshold) << ")\n";
    if (rep.max_rel_err >= threshold) {
        std::cerr << "error: gradient check failed\n";
        return 2;
    }
    return 0;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"prompt safety scoring with localized redaction over a toy generator"};
    app.require_subcommand(1);
    int exit_code = 0;

    CommonOpts c_gen, c_bank, c_proj, c_cls, c_score, c_san, c_sweep, c_probe;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen-toy-data", "sample a labeled prompt embedding dataset");
    add_common(gen, c_gen);
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->callback([&] { run_gen_toy_data(c_gen, gen_out); });

    std::string bank_dataset, bank_projection, bank_out;
    auto* bank = app.add_subcommand("build-bank", "project a dataset into a concept bank");
    add_common(bank, c_bank);
    bank->add_option("--dataset", bank_dataset, "prompt dataset tsv")->required();
    bank->add_option("--projection", bank_projection, "projection checkpoint")->required();
    bank->add_option("--out", bank_out, "output directory")->required();
    bank->callback([&] { run_build_bank(c_bank, bank_dataset, bank_projection, bank_out); });

    std::string tp_dataset, tp_out;
    auto* tproj = app.add_subcommand("train-proj", "train the projection network");
    add_common(tproj, c_proj);
    tproj->add_option("--dataset", tp_dataset, "prompt dataset tsv")->required();
    tproj->add_option("--out", tp_out, "output directory")->required();
    tproj->callback([&] { run_train_proj(c_proj, tp_dataset, tp_out); });

    std::string tc_dataset, tc_projection, tc_bank, tc_out;
    auto* tcls = app.add_subcommand("train-cls", "train the safety classifier");
    add_common(tcls, c_cls);
    tcls->add_option("--dataset", tc_dataset, "prompt dataset tsv")->required();
    tcls->add_option("--projection", tc_projection, "projection checkpoint")->required();
    tcls->add_option("--bank", tc_bank, "concept bank file")->required();
    tcls->add_option("--out", tc_out, "output directory")->required();
    tcls->callback([&] { run_train_cls(c_cls, tc_dataset, tc_projection, tc_bank, tc_out); });

    std::string sc_dataset, sc_projection, sc_scorer, sc_bank, sc_out;
    auto* score = app.add_subcommand("score", "score a dataset and write jsonl decisions");
    add_common(score, c_score);
    score->add_option("--dataset", sc_dataset, "prompt dataset tsv")->required();
    score->add_option("--projection", sc_projection, "projection checkpoint")->required();
    score->add_option("--scorer", sc_scorer, "scorer checkpoint")->required();
    score->add_option("--bank", sc_bank, "concept bank file")->required();
    score->add_option("--out", sc_out, "output directory")->required();
    score->callback([&] {
        run_score(c_score, sc_dataset, sc_projection, sc_scorer, sc_bank, sc_out);
    });

    std::string sa_projection, sa_scorer, sa_bank, sa_out, sa_mix, sa_embfile;
    std::string sa_prompt_id = "prompt";
    double sa_noise = 0.0;
    bool sa_scene = false;
    auto* san = app.add_subcommand("sanitize", "generate one image, blurring flagged regions");
    add_common(san, c_san);
    san->add_option("--projection", sa_projection, "projection checkpoint")->required();
    san->add_option("--scorer", sa_scorer, "scorer checkpoint")->required();
    san->add_option("--bank", sa_bank, "concept bank file")->required();
    san->add_option("--out", sa_out, "output directory")->required();
    san->add_option("--mix", sa_mix, "toy prompt, label:weight[,label:weight...]");
    san->add_option("--embedding-file", sa_embfile, "raw embedding, whitespace separated");
    san->add_option("--prompt-id", sa_prompt_id, "id used in decision.json");
    san->add_option("--noise", sa_noise, "encoder jitter for --mix (default 0)");
    san->add_flag("--scene-json", sa_scene, "also dump the toy world's ground-truth scene");
    san->callback([&] {
        run_sanitize(c_san, sa_projection, sa_scorer, sa_bank, sa_out, sa_mix, sa_embfile,
                     sa_prompt_id, sa_noise, sa_scene);
    });

    std::string ev_dataset, ev_projection, ev_scorer, ev_bank, ev_out;
    auto* sweep = app.add_subcommand("eval-sweep", "sweep tau_safe or top_k, report rates");
    add_common(sweep, c_sweep);
    sweep->add_option("--dataset", ev_dataset, "prompt dataset tsv")->required();
    sweep->add_option("--projection", ev_projection, "projection checkpoint")->required();
    sweep->add_option("--scorer", ev_scorer, "scorer checkpoint")->required();
    sweep->add_option("--bank", ev_bank, "concept bank file")->required();
    sweep->add_option("--out", ev_out, "output directory")->required();
    sweep->callback([&] {
        run_eval_sweep(c_sweep, ev_dataset, ev_projection, ev_scorer, ev_bank, ev_out);
    });

    std::string pr_projection, pr_scorer, pr_bank, pr_out;
    auto* probe = app.add_subcommand("probe-sim", "adaptive attacker vs filter and pipeline");
    add_common(probe, c_probe);
    probe->add_option("--projection", pr_projection, "projection checkpoint")->required();
    probe->add_option("--scorer", pr_scorer, "scorer checkpoint")->required();
    probe->add_option("--bank", pr_bank, "concept bank file")->required();
    probe->add_option("--out", pr_out, "output directory")->required();
    probe->callback([&] { run_probe_sim(c_probe, pr_projection, pr_scorer, pr_bank, pr_out); });

    int gc_cases = 25;
    std::uint64_t gc_seed = 1;
    double gc_step = 1e-5, gc_threshold = 1e-4;
    auto* gc = app.add_subcommand("grad-check", "finite-difference check of training gradients");
    gc->add_option("--cases", gc_cases, "randomized problems to run");
    gc->add_option("--seed", gc_seed, "base seed");
    gc->add_option("--step", gc_step, "finite difference step");
    gc->add_option("--max-rel-err", gc_threshold, "failure threshold");
    gc->callback([&] { exit_code = run_grad_check(gc_cases, gc_seed, gc_step, gc_threshold); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return exit_code;
}

}  // namespace ddif
