#pragma once

#include <functional>
#include <vector>

#include "lcm/simulator.hpp"
#include "lcm/trainer.hpp"

namespace lcm {

struct MetricReport {
    double kld_corpus = 0.0;
    double nll = 0.0;
    double ndcg = 0.0;
    double acc = 0.0;
};

// True choice distribution of every evaluation user over the evaluation item
// corpus (treated as one large choice set), via the quadrature oracle with
// the true error law.
struct CorpusOracle {
    std::vector<UserId> users;
    std::vector<ItemId> items;
    std::vector<std::vector<double>> true_probs;  // [user index][item index]
};

CorpusOracle make_corpus_oracle(const GroundTruth& gt, const std::vector<UserId>& users,
                                const std::vector<ItemId>& items,
                                const QuadratureConfig& quad = {});

// Choice distribution over an arbitrary item set under the fitted model's own
// probability rule (softmax for MNL, exponomial closed form for ENL,
// independent accept/reject for the univariate models, quadrature with the
// learned kernel mixture for LCM4Rec).
std::vector<double> model_set_probs(const FittedModel& model, UserId user,
                                    std::span<const ItemId> items);

// Mean KL(true || model) over the oracle's users; model probabilities are
// floored at 1e-12.
double kld_corpus(const FittedModel& model, const CorpusOracle& oracle);

// Test-set NLL and accuracy plus nDCG. nDCG ranks the evaluation corpus by
// predicted utility against the oracle's true choice probabilities as graded
// relevance; set per_set_ndcg to grade only the chosen item of each test
// choice set instead.
MetricReport test_metrics(const FittedModel& model,
                          std::span<const ChoiceObservation> test_set,
                          const CorpusOracle& oracle, bool per_set_ndcg = false);

struct ErrorDistKldConfig {
    double grid_lo = -6.0;
    double grid_hi = 6.0;
    int grid_points = 2401;
    double smoothing_width = 0.05;  // Gaussian kernel stddev
    double shift_range = 3.0;       // search window for the location shift
};

// Minimum over location shifts of KL(true || shifted estimate), both pdfs
// smoothed on the grid; choice models are translation invariant so the
// location of the estimate is not identified.
double error_dist_kld(const std::function<double(double)>& estimated_pdf,
                      const ErrorDistribution& true_law,
                      const ErrorDistKldConfig& cfg = {});
double error_dist_kld(const DerivedKernels& estimated, const ErrorDistribution& true_law,
                      const ErrorDistKldConfig& cfg = {});

// Mean over users and treated items of (rank under model_b - rank under
// model_a), ranks by descending predicted utility over the corpus, ties by
// item id. Negative values mean model_b ranks the treated items higher.
double rank_shift(const FittedModel& model_a, const FittedModel& model_b,
                  const std::vector<ItemId>& treated_items,
                  const std::vector<ItemId>& corpus);

// Per-item breakdown used for the raw rank-difference records.
struct RankShiftRecord {
    ItemId item = 0;
    double mean_rank_a = 0.0;
    double mean_rank_b = 0.0;
    double shift = 0.0;  // mean_rank_b - mean_rank_a
};
std::vector<RankShiftRecord> rank_shift_per_item(const FittedModel& model_a,
                                                 const FittedModel& model_b,
                                                 const std::vector<ItemId>& treated_items,
                                                 const std::vector<ItemId>& corpus);

struct BootstrapResult {
    double mean_diff = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double p_one_sided = 0.0;  // P(mean resampled difference <= 0)
};

// Percentile bootstrap over paired differences a_i - b_i.
BootstrapResult bootstrap_compare(std::span<const double> values_a,
                                  std::span<const double> values_b, int n_resamples,
                                  std::uint64_t seed = 7);

}  // namespace lcm
