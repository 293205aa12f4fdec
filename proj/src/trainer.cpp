#include "ddif/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>

#include "ddif/rng.hpp"

namespace ddif {

namespace {

struct CosGradTerms {
    // d cos(u, v) / du = v / (|u||v|) - cos * u / |u|^2, symmetric in v.
    static void accumulate(Embedding& grad_u, Embedding& grad_v, const Embedding& u,
                           const Embedding& v, double norm_u, double norm_v, double cos_uv,
                           double weight) {
        double inv_cross = 1.0 / (norm_u * norm_v);
        double inv_u2 = 1.0 / (norm_u * norm_u);
        double inv_v2 = 1.0 / (norm_v * norm_v);
        for (std::size_t d = 0; d < u.size(); ++d) {
            grad_u[d] += weight * (v[d] * inv_cross - cos_uv * u[d] * inv_u2);
            grad_v[d] += weight * (u[d] * inv_cross - cos_uv * v[d] * inv_v2);
        }
    }
};

void check_batch_inputs(std::span<const Embedding> z, std::span<const Label> labels,
                        double temperature) {
    if (z.size() != labels.size()) throw ShapeError("contrastive loss: z/label count mismatch");
    if (z.size() < 2) throw ShapeError("contrastive loss: batch must have >= 2 samples");
    if (!(temperature > 0.0)) throw ParamError("contrastive loss: temperature must be > 0");
    for (std::size_t i = 1; i < z.size(); ++i) {
        if (z[i].size() != z[0].size()) throw ShapeError("contrastive loss: ragged batch");
    }
}

}  // namespace

ContrastiveResult contrastive_batch_loss(std::span<const Embedding> z,
                                         std::span<const Label> labels, double temperature) {
    check_batch_inputs(z, labels, temperature);
    const std::size_t n = z.size();

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = l2_norm(z[i]);
        if (norms[i] == 0.0) throw DegenerateError("contrastive loss: zero-norm embedding");
    }

    ContrastiveResult res;
    res.loss = 0.0;
    res.z_grads.assign(n, Embedding(z[0].size(), 0.0));

    std::vector<double> cos_row(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t pos_idx = n;  // first argmax over same-label cosines
        double pos_cos = 0.0;
        bool has_diff = false;
        double max_arg = 0.0;  // running max of c/t over denominator terms

        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            cos_row[j] = dot(z[i], z[j]) / (norms[i] * norms[j]);
            if (labels[j] == labels[i]) {
                if (pos_idx == n || cos_row[j] > pos_cos) {
                    pos_idx = j;
                    pos_cos = cos_row[j];
                }
            } else {
                double a = cos_row[j] / temperature;
                max_arg = has_diff ? std::max(max_arg, a) : a;
                has_diff = true;
            }
        }
        if (pos_idx == n) continue;  // no same-label partner: zero contribution

        double pos_arg = pos_cos / temperature;
        double shift = has_diff ? std::max(pos_arg, max_arg) : pos_arg;

        double pos_exp = std::exp(pos_arg - shift);
        double denom = pos_exp;
        for (std::size_t j = 0; j < n && has_diff; ++j) {
            if (j == i || labels[j] == labels[i]) continue;
            denom += std::exp(cos_row[j] / temperature - shift);
        }

        res.loss += std::log(denom) - (pos_arg - shift);

        // dL/d pos_cos and dL/d c_ij for denominator terms
        double d_pos = (pos_exp / denom - 1.0) / temperature;
        CosGradTerms::accumulate(res.z_grads[i], res.z_grads[pos_idx], z[i], z[pos_idx], norms[i],
                                 norms[pos_idx], pos_cos, d_pos);
        for (std::size_t j = 0; j < n && has_diff; ++j) {
            if (j == i || labels[j] == labels[i]) continue;
            double w = std::exp(cos_row[j] / temperature - shift) / denom / temperature;
            CosGradTerms::accumulate(res.z_grads[i], res.z_grads[j], z[i], z[j], norms[i],
                                     norms[j], cos_row[j], w);
        }
    }

    double inv_n = 1.0 / static_cast<double>(n);
    res.loss *= inv_n;
    for (auto& g : res.z_grads) {
        for (double& x : g) x *= inv_n;
    }
    return res;
}

ContrastiveResult set_distance_batch_loss(std::span<const Embedding> z,
                                          std::span<const Label> labels, double temperature,
                                          int set_k) {
    check_batch_inputs(z, labels, temperature);
    if (set_k <= 0) throw ParamError("set_distance loss: set_k must be >= 1");
    const std::size_t n = z.size();

    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        norms[i] = l2_norm(z[i]);
        if (norms[i] == 0.0) throw DegenerateError("set_distance loss: zero-norm embedding");
    }

    ContrastiveResult res;
    res.loss = 0.0;
    res.z_grads.assign(n, Embedding(z[0].size(), 0.0));

    struct Scored {
        std::size_t j;
        double cos;
    };
    auto better = [](const Scored& a, const Scored& b) {
        if (a.cos != b.cos) return a.cos > b.cos;
        return a.j < b.j;
    };

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<Scored> same, diff;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double c = dot(z[i], z[j]) / (norms[i] * norms[j]);
            (labels[j] == labels[i] ? same : diff).push_back(Scored{j, c});
        }
        if (same.empty() || diff.empty()) continue;

        auto top = [&](std::vector<Scored>& v) {
            std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(set_k), v.size());
            std::partial_sort(v.begin(), v.begin() + take, v.end(), better);
            v.resize(take);
        };
        top(same);
        top(diff);

        double d_same = 0.0, d_diff = 0.0;
        for (const Scored& s : same) d_same += s.cos;
        for (const Scored& s : diff) d_diff += s.cos;
        d_same /= static_cast<double>(same.size());
        d_diff /= static_cast<double>(diff.size());

        // L = -log( exp(-d_same/t) / (exp(-d_same/t) + exp(-d_diff/t)) )
        double a_same = -d_same / temperature;
        double a_diff = -d_diff / temperature;
        double shift = std::max(a_same, a_diff);
        double e_same = std::exp(a_same - shift);
        double e_diff = std::exp(a_diff - shift);
        double denom = e_same + e_diff;
        res.loss += std::log(denom) - (a_same - shift);

        double q_diff = e_diff / denom;  // = 1 - q_same
        double dl_dsame = q_diff / temperature;
        double dl_ddiff = -q_diff / temperature;

        double w_same = dl_dsame / static_cast<double>(same.size());
        double w_diff = dl_ddiff / static_cast<double>(diff.size());
        for (const Scored& s : same) {
            CosGradTerms::accumulate(res.z_grads[i], res.z_grads[s.j], z[i], z[s.j], norms[i],
                                     norms[s.j], s.cos, w_same);
        }
        for (const Scored& s : diff) {
            CosGradTerms::accumulate(res.z_grads[i], res.z_grads[s.j], z[i], z[s.j], norms[i],
                                     norms[s.j], s.cos, w_diff);
        }
    }

    double inv_n = 1.0 / static_cast<double>(n);
    res.loss *= inv_n;
    for (auto& g : res.z_grads) {
        for (double& x : g) x *= inv_n;
    }
    return res;
}

namespace {

void fisher_yates(std::vector<std::size_t>& idx, Rng& rng) {
    for (std::size_t i = idx.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_u64() % i);
        std::swap(idx[i - 1], idx[j]);
    }
}

void check_train_config(const TrainConfig& cfg, std::size_t dataset_size) {
    if (cfg.batch_size < 1) throw ParamError("train: batch_size must be >= 1");
    if (cfg.epochs < 0) throw ParamError("train: epochs must be >= 0");
    if (!(cfg.temperature > 0.0)) throw ParamError("train: temperature must be > 0");
    if (static_cast<std::size_t>(cfg.batch_size) > dataset_size) {
        throw ParamError("train: batch_size exceeds dataset size");
    }
}

}  // namespace

BatchGrads projection_batch_grads(std::span<const PromptRecord> batch, const MlpParams& params,
                                  const TrainConfig& cfg) {
    std::vector<Embedding> zs(batch.size());
    std::vector<Label> ls(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) {
        zs[b] = mlp_forward(params, batch[b].raw_embedding);
        ls[b] = batch[b].label;
    }
    ContrastiveResult cr = cfg.loss == ProjectionLoss::batch_max_contrast
                               ? contrastive_batch_loss(zs, ls, cfg.temperature)
                               : set_distance_batch_loss(zs, ls, cfg.temperature, cfg.set_k);
    BatchGrads out;
    out.loss = cr.loss;
    out.grads = zero_grads_like(params);
    for (std::size_t b = 0; b < batch.size(); ++b) {
        BackwardResult br = mlp_backward(params, batch[b].raw_embedding, cr.z_grads[b]);
        accumulate(out.grads, br.param_grads);
    }
    return out;
}

TrainResult train_projection(std::span<const PromptRecord> dataset, const MlpParams& init,
                             const TrainConfig& cfg) {
    validate_mlp(init);
    if (dataset.size() < 2) throw DegenerateError("train_projection: need >= 2 samples");
    check_train_config(cfg, dataset.size());

    bool has_mal = false, has_ben = false;
    for (const auto& r : dataset) {
        if (static_cast<int>(r.raw_embedding.size()) != init.input_dim()) {
            throw ShapeError("train_projection: record dim does not match net input");
        }
        (r.label == Label::malicious ? has_mal : has_ben) = true;
    }
    if (!has_mal || !has_ben) {
        throw DegenerateError("train_projection: dataset has a single label class");
    }

    TrainResult result;
    result.params = init;
    Rng rng(cfg.seed);

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        fisher_yates(order, rng);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::size_t bsz = stop - start;
            if (bsz < 2) continue;  // a lone trailing sample has no pair terms

            std::vector<PromptRecord> batch(bsz);
            for (std::size_t b = 0; b < bsz; ++b) batch[b] = dataset[order[start + b]];

            BatchGrads bg = projection_batch_grads(batch, result.params, cfg);
            epoch_loss += bg.loss * static_cast<double>(bsz);
            result.params = sgd_step(result.params, bg.grads, cfg.lr);
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    return result;
}

double sigmoid(double logit) {
    if (logit >= 0.0) {
        return 1.0 / (1.0 + std::exp(-logit));
    }
    double e = std::exp(logit);
    return e / (1.0 + e);
}

namespace {

double softplus(double x) {
    return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

BceResult bce_loss(double logit, Label y) {
    double target = (y == Label::benign) ? 1.0 : 0.0;
    double loss = target * softplus(-logit) + (1.0 - target) * softplus(logit);
    double s = sigmoid(logit);
    return BceResult{loss, s - target, s};
}

BatchGrads classifier_batch_grads(std::span<const PromptRecord> batch,
                                  const MlpParams& projection, const ConceptBank& bank,
                                  const MlpParams& scorer, int k, Aggregator agg) {
    if (batch.empty()) throw DegenerateError("classifier_batch_grads: empty batch");
    BatchGrads out;
    out.grads = zero_grads_like(scorer);
    for (const PromptRecord& rec : batch) {
        Embedding z = mlp_forward(projection, rec.raw_embedding);
        // Self-exclusion: a bank built from this dataset holds this exact
        // projected vector; it must not vote for itself.
        auto mal = topk_neighbors(bank, z, Polarity::malicious, k, &z);
        auto ben = topk_neighbors(bank, z, Polarity::benign, k, &z);
        Embedding features{set_distance(mal, agg), set_distance(ben, agg)};
        double logit = mlp_forward(scorer, features)[0];
        BceResult bce = bce_loss(logit, rec.label);
        out.loss += bce.loss;
        BackwardResult br = mlp_backward(scorer, features, Embedding{bce.dlogit});
        accumulate(out.grads, br.param_grads);
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    out.loss *= inv;
    scale(out.grads, inv);
    return out;
}

TrainResult train_classifier(std::span<const PromptRecord> dataset, const MlpParams& projection,
                             const ConceptBank& bank, const MlpParams& scorer_init,
                             const TrainConfig& cfg, int k, Aggregator agg) {
    validate_mlp(projection);
    validate_mlp(scorer_init);
    if (scorer_init.input_dim() != 2 || scorer_init.output_dim() != 1) {
        throw ShapeError("train_classifier: scorer must map 2 features to 1 logit");
    }
    if (projection.output_dim() != bank.dim) {
        throw ShapeError("train_classifier: projection output dim does not match bank dim");
    }
    if (dataset.empty()) throw DegenerateError("train_classifier: empty dataset");
    if (k <= 0) throw ParamError("train_classifier: k must be >= 1");
    check_train_config(cfg, dataset.size());

    TrainResult result;
    result.params = scorer_init;
    Rng rng(cfg.seed);

    std::vector<std::size_t> order(dataset.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        fisher_yates(order, rng);
        double epoch_loss = 0.0;

        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::size_t bsz = stop - start;

            std::vector<PromptRecord> batch(bsz);
            for (std::size_t b = 0; b < bsz; ++b) batch[b] = dataset[order[start + b]];

            BatchGrads bg = classifier_batch_grads(batch, projection, bank, result.params, k, agg);
            result.params = sgd_step(result.params, bg.grads, cfg.lr);
            epoch_loss += bg.loss * static_cast<double>(bsz);
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    return result;
}

namespace {

// Flat views over every trainable parameter, weights then biases, so the
// finite-difference probe and the analytic gradients align index by index.
std::vector<double*> param_pointers(MlpParams& p) {
    std::vector<double*> ptrs;
    for (auto& w : p.weights)
        for (double& x : w) ptrs.push_back(&x);
    for (auto& b : p.biases)
        for (double& x : b) ptrs.push_back(&x);
    return ptrs;
}

std::vector<double> grad_values(const MlpGrads& g) {
    std::vector<double> out;
    for (const auto& w : g.weights) out.insert(out.end(), w.begin(), w.end());
    for (const auto& b : g.biases) out.insert(out.end(), b.begin(), b.end());
    return out;
}

}  // namespace

GradCheckReport gradient_fidelity_check(int cases, std::uint64_t seed, double step) {
    if (cases < 1) throw ParamError("gradient_fidelity_check: cases must be >= 1");
    if (!(step > 0.0)) throw ParamError("gradient_fidelity_check: step must be > 0");

    GradCheckReport rep;
    rep.cases = cases;

    // Central differences break down when the step straddles a relu kink or
    // an argmax switch. Shrinking the step walks back inside the smooth
    // region, so a comparison only counts as bad if it stays bad at every
    // step size; a wrong analytic gradient does.
    auto compare = [&](double analytic, const std::function<double(double)>& loss_at,
                       double base_step) {
        double best = std::numeric_limits<double>::infinity();
        for (double h : {base_step, base_step / 16.0, base_step / 256.0}) {
            double numeric = (loss_at(h) - loss_at(-h)) / (2.0 * h);
            double denom = std::max({1e-6, std::abs(numeric), std::abs(analytic)});
            best = std::min(best, std::abs(numeric - analytic) / denom);
            if (best < 1e-6) break;
        }
        rep.max_rel_err = std::max(rep.max_rel_err, best);
        ++rep.comparisons;
    };

    Rng root(seed);
    for (int c = 0; c < cases; ++c) {
        Rng rng = root.substream(4, static_cast<std::uint64_t>(c));
        int in_dim = 3 + static_cast<int>(rng.next_u64() % 3);
        int hidden = 4 + static_cast<int>(rng.next_u64() % 4);
        int out_dim = 3 + static_cast<int>(rng.next_u64() % 3);
        int bsz = 4 + static_cast<int>(rng.next_u64() % 3);
        Activation act = (c % 2 == 0) ? Activation::relu : Activation::tanh;

        TrainConfig cfg;
        cfg.temperature = 0.25 + rng.uniform(0.0, 0.5);
        cfg.loss = (c % 3 == 2) ? ProjectionLoss::set_distance_contrast
                                : ProjectionLoss::batch_max_contrast;
        cfg.set_k = 1 + static_cast<int>(rng.next_u64() % 3);

        MlpParams proj = mlp_init({in_dim, hidden, out_dim}, act, rng);
        std::vector<PromptRecord> batch(static_cast<std::size_t>(bsz));
        // A relu net with zero biases can project a sample to exactly zero,
        // where the cosine losses are undefined. Finite differences are not
        // meaningful there either, so redraw until the batch is clean.
        for (int attempt = 0;; ++attempt) {
            for (int b = 0; b < bsz; ++b) {
                batch[b].prompt_id = "g" + std::to_string(b);
                batch[b].raw_embedding = gaussian_vector(rng, in_dim);
                // Guarantee both classes, then fill randomly.
                batch[b].label = b == 0   ? Label::malicious
                                 : b == 1 ? Label::benign
                                 : (rng.next_u64() % 2 ? Label::benign : Label::malicious);
            }
            // Reject degenerate draws: a zero-norm projection leaves the
            // cosine losses undefined, and a colinear pair ties the top-k
            // selection exactly (relu nets collapse samples onto a shared
            // ray), putting the loss on a kink where central differences
            // straddle two subgradient branches.
            bool ok = true;
            std::vector<Embedding> zs(batch.size());
            for (std::size_t b = 0; b < batch.size(); ++b) {
                zs[b] = mlp_forward(proj, batch[b].raw_embedding);
                if (l2_norm(zs[b]) < 1e-3) ok = false;
            }
            for (std::size_t a = 0; ok && a < zs.size(); ++a) {
                for (std::size_t b = a + 1; ok && b < zs.size(); ++b) {
                    double c = cosine_similarity(zs[a], zs[b]);
                    if (std::abs(c) > 1.0 - 1e-6) ok = false;
                }
            }
            if (ok) break;
            if (attempt > 256) throw DegenerateError("gradient_fidelity_check: cannot draw a usable batch");
        }

        {
            BatchGrads analytic = projection_batch_grads(batch, proj, cfg);
            std::vector<double> flat = grad_values(analytic.grads);
            MlpParams probe = proj;
            std::vector<double*> ptrs = param_pointers(probe);
            for (std::size_t pi = 0; pi < ptrs.size(); ++pi) {
                double saved = *ptrs[pi];
                auto loss_at = [&](double h) {
                    *ptrs[pi] = saved + h;
                    double loss = projection_batch_grads(batch, probe, cfg).loss;
                    *ptrs[pi] = saved;
                    return loss;
                };
                compare(flat[pi], loss_at, step);
            }
        }

        {
            ConceptBank bank;
            bank.dim = out_dim;
            for (int e = 0; e < 6; ++e) {
                bank.add(e % 2 ? "benign" : "malicious", gaussian_vector(rng, out_dim));
            }
            MlpParams scorer = mlp_init({2, 4, 1}, act, rng);
            const int k = 2;
            Aggregator agg = c % 3 == 0   ? Aggregator::mean
                             : c % 3 == 1 ? Aggregator::max
                                          : Aggregator::softmax_weighted;

            BatchGrads analytic = classifier_batch_grads(batch, proj, bank, scorer, k, agg);
            std::vector<double> flat = grad_values(analytic.grads);
            MlpParams probe = scorer;
            std::vector<double*> ptrs = param_pointers(probe);
            for (std::size_t pi = 0; pi < ptrs.size(); ++pi) {
                double saved = *ptrs[pi];
                auto loss_at = [&](double h) {
                    *ptrs[pi] = saved + h;
                    double loss = classifier_batch_grads(batch, proj, bank, probe, k, agg).loss;
                    *ptrs[pi] = saved;
                    return loss;
                };
                compare(flat[pi], loss_at, step);
            }
        }
    }
    return rep;
}

ConceptBank build_bank_from_dataset(std::span<const PromptRecord> dataset,
                                    const MlpParams& projection) {
    validate_mlp(projection);
    if (dataset.empty()) throw DegenerateError("build_bank_from_dataset: empty dataset");
    ConceptBank bank;
    bank.dim = projection.output_dim();
    for (const auto& rec : dataset) {
        bank.add(rec.label == Label::benign ? "benign" : "malicious",
                 mlp_forward(projection, rec.raw_embedding));
    }
    bank.version += 1;
    return bank;
}

void write_training_log_csv(const std::string& path, const std::vector<double>& epoch_losses) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << "epoch,mean_loss\n";
    char buf[40];
    for (std::size_t e = 0; e < epoch_losses.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%.17g", epoch_losses[e]);
        f << e << ',' << buf << '\n';
    }
    if (!f) throw IoError("write failed: " + path);
}

}  // namespace ddif
