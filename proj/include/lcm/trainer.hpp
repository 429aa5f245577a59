#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lcm/choice_models.hpp"
#include "lcm/kernel_cdf.hpp"
#include "lcm/mc_likelihood.hpp"
#include "lcm/types.hpp"

namespace lcm {

enum class ModelKind { LCM4Rec, MNL, ENL, BL, BCE, GBCE };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

enum class OptimizerKind { SGD, Adam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_kind_from_string(const std::string& name);

struct TrainConfig {
    ModelKind model_kind = ModelKind::MNL;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double learning_rate = 0.03;
    int batch_size = 128;
    int max_epochs = 150;
    int patience = 5;
    std::uint64_t seed = 0;
    int kernel_count = 5;    // K, LCM4Rec only
    int sample_count = 5;    // S, LCM4Rec only
    int embedding_dim = 3;   // m
    // Data dimensions; ids in the datasets index into [0, n).
    int n_users = 0;
    int n_items = 0;
    // Negatives per positive for BCE/gBCE; gBCE calibration t.
    int negatives_per_positive = 3;
    double gbce_t = 1.0;
    // Debug mode: reuse the epoch-0 draws every epoch instead of resampling.
    bool frozen_draws = false;
    // Sample count for the (frozen-draw) validation NLL of LCM4Rec.
    int validation_sample_count = 32;
    int threads = 1;

    void check() const;  // throws on invalid combinations
};

struct EpochRecord {
    double train_nll = 0.0;
    double validation_nll = 0.0;
};

struct FittedModel {
    ModelKind model_kind = ModelKind::MNL;
    UtilityParams utility;
    std::optional<KernelCdfParams> kernel;  // LCM4Rec only
    std::vector<EpochRecord> history;
    int best_epoch = -1;
    TrainConfig config;
};

// Minibatch gradient descent on the model's own loss; returns the parameters
// of the best validation epoch. Throws on divergence (non-finite loss).
FittedModel train(std::span<const ChoiceObservation> train_set,
                  std::span<const ChoiceObservation> val_set, const TrainConfig& cfg);

// Identification projection applied after every optimizer step of LCM4Rec:
// item constants are affinely mapped onto [0, 1] (all-equal constants map to
// 0.5), and the kernel bounds are clamped. Other models are untouched.
void project(UtilityParams& params, KernelCdfParams* kernel, ModelKind kind);

// Held-out mean NLL under the model's own probability rule (deterministic;
// LCM4Rec uses frozen draws at cfg.validation_sample_count).
double validation_nll(const FittedModel& model,
                      std::span<const ChoiceObservation> val_set);

// Fixed learning-rate grid crossed with both optimizers, selected on
// validation NLL.
std::vector<double> default_learning_rate_grid();

struct GridSearchResult {
    TrainConfig best;
    double best_validation_nll = 0.0;
    std::vector<std::pair<TrainConfig, double>> tried;
};
GridSearchResult grid_search(std::span<const ChoiceObservation> train_set,
                             std::span<const ChoiceObservation> val_set,
                             const TrainConfig& base);

}  // namespace lcm
