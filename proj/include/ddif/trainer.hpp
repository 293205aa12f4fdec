#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ddif/concept_bank.hpp"
#include "ddif/mlp.hpp"
#include "ddif/numerics.hpp"

namespace ddif {

enum class Label : int { malicious = 0, benign = 1 };

struct PromptRecord {
    std::string prompt_id;
    Embedding raw_embedding;
    Label label;
};

// Default contrastive objective: per sample, the positive term is the
// maximum same-label cosine in the batch and every different-label cosine
// enters the denominator. The set_distance mode replaces both terms with
// top-k in-batch set similarities (kept as an optional variant, off by
// default; it rewards small same-class similarity by construction).
enum class ProjectionLoss { batch_max_contrast, set_distance_contrast };

struct TrainConfig {
    int batch_size = 64;
    double lr = 1e-3;
    int epochs = 50;
    double temperature = 0.1;
    std::uint64_t seed = 0;
    ProjectionLoss loss = ProjectionLoss::batch_max_contrast;
    int set_k = 11;  // only used by set_distance_contrast
};

struct ContrastiveResult {
    double loss;                     // mean over the batch
    std::vector<Embedding> z_grads;  // dLoss/dz_i, same order as input
};

// Batch loss over projected embeddings. Samples without a same-label
// partner contribute zero. Requires batch >= 2 and temperature > 0.
ContrastiveResult contrastive_batch_loss(std::span<const Embedding> z,
                                         std::span<const Label> labels, double temperature);

// Optional set-distance variant; samples missing either a same-label or a
// different-label partner contribute zero. set_k caps the in-batch top-k.
ContrastiveResult set_distance_batch_loss(std::span<const Embedding> z,
                                          std::span<const Label> labels, double temperature,
                                          int set_k);

struct BatchGrads {
    double loss = 0.0;  // mean over the batch
    MlpGrads grads;     // gradient of that mean w.r.t. the trained net
};

// Analytic parameter gradients of the projection objective on one batch.
// This is the exact computation the training loop steps on.
BatchGrads projection_batch_grads(std::span<const PromptRecord> batch, const MlpParams& params,
                                  const TrainConfig& cfg);

// Analytic scorer gradients on one batch, projection frozen.
BatchGrads classifier_batch_grads(std::span<const PromptRecord> batch,
                                  const MlpParams& projection, const ConceptBank& bank,
                                  const MlpParams& scorer, int k, Aggregator agg);

struct GradCheckReport {
    int cases = 0;
    long comparisons = 0;  // individual parameters compared
    double max_rel_err = 0.0;
};

// Central finite differences against the analytic batch gradients of both
// objectives, over `cases` randomized small problems (dims, activations,
// labels, and loss mode all vary with the case index). The relative error
// denominator is floored at 1e-6 so dead parameters do not divide by zero.
GradCheckReport gradient_fidelity_check(int cases, std::uint64_t seed, double step = 1e-5);

struct TrainResult {
    MlpParams params;
    std::vector<double> epoch_losses;  // per-sample mean, one entry per epoch
};

// SGD over the projection net: per-epoch Fisher-Yates shuffle from the
// config seed, fixed batch size with the last partial batch kept.
// Requires both labels present in the dataset.
TrainResult train_projection(std::span<const PromptRecord> dataset, const MlpParams& init,
                             const TrainConfig& cfg);

struct BceResult {
    double loss;
    double dlogit;  // dLoss/dLogit = sigmoid(logit) - y
    double score;   // sigmoid(logit)
};

double sigmoid(double logit);

// Binary cross-entropy through the log-sigmoid formulation, so the loss
// stays finite for any finite logit. benign is the positive class (y=1).
BceResult bce_loss(double logit, Label y);

// Projects each record, retrieves top-k per polarity (excluding the
// sample's own bank entry when present bit-identically), feeds the
// feature pair [d_mal, d_ben] to the scorer and fits it with BCE + SGD.
// The projection net stays frozen.
TrainResult train_classifier(std::span<const PromptRecord> dataset, const MlpParams& projection,
                             const ConceptBank& bank, const MlpParams& scorer_init,
                             const TrainConfig& cfg, int k,
                             Aggregator agg = Aggregator::mean);

// One pass of the final projection net over the dataset; labels map to
// concept labels "malicious" / "benign". Bumps the bank version.
ConceptBank build_bank_from_dataset(std::span<const PromptRecord> dataset,
                                    const MlpParams& projection);

// CSV with header "epoch,mean_loss", one row per epoch.
void write_training_log_csv(const std::string& path, const std::vector<double>& epoch_losses);

}  // namespace ddif
