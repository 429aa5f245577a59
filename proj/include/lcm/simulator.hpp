#pragma once

#include <cstdint>
#include <vector>

#include "lcm/error_distribution.hpp"
#include "lcm/types.hpp"

namespace lcm {

// Ground truth behind a synthetic dataset: the true utility model and the
// true error law.
struct GroundTruth {
    UtilityParams params;
    ErrorDistribution error;
    int n_users = 0;
    int n_items = 0;
};

struct ExposureProtocol {
    enum class Kind { Uniform, Overexposure, CompetitionPopular, CompetitionUnpopular };
    Kind kind = Kind::Uniform;
    std::vector<ItemId> treated_items;
    int set_size = 4;
};

ExposureProtocol::Kind protocol_kind_from_string(const std::string& name);
std::string to_string(ExposureProtocol::Kind kind);

// User/item partition shared by generation and splitting: a fraction of
// users is held out for evaluation, and the item corpus is halved. Both
// sides derive it deterministically from (n_users, n_items, seed).
struct SplitPlan {
    std::vector<UserId> train_users, eval_users;
    std::vector<ItemId> train_items, eval_items;
    std::vector<char> user_is_eval, item_is_eval;
};

SplitPlan make_split_plan(int n_users, int n_items, std::uint64_t seed,
                          double train_user_fraction = 0.8);

// Embeddings uniform on the sphere of radius sqrt(2); item constants U(0,1).
GroundTruth gen_ground_truth(std::uint64_t seed, int n_users, int n_items, int dim,
                             const ErrorDistribution& error);

// Simulates choices_per_user events per user: a choice set per protocol, IID
// noise per displayed item, chosen = argmax of noisy utility. When a plan is
// given, evaluation users alternate between training-pool sets (protocol
// applies) and evaluation-pool sets (always uniform); training users draw all
// sets from the full corpus under the protocol. With heterogeneous_counts a
// per-user event count is drawn uniformly from [1, choices_per_user].
std::vector<ChoiceObservation> gen_choices(const GroundTruth& gt,
                                           const ExposureProtocol& protocol,
                                           int choices_per_user, std::uint64_t seed,
                                           const SplitPlan* plan = nullptr,
                                           bool heterogeneous_counts = false);

// Ground-truth popularity: c_j + mean_i(u_i . v_j), used to form the
// competition companion pools.
std::vector<double> popularity_scores(const GroundTruth& gt);

// One competition choice set: one treated item plus (set_size - 1) distinct
// companions from the top/bottom 20% popularity quintile. Throws if the
// companion pool is smaller than set_size - 1.
std::vector<ItemId> competition_sets(const GroundTruth& gt,
                                     const std::vector<ItemId>& treated, bool popular,
                                     int set_size, Rng& rng);

struct SplitResult {
    std::vector<ChoiceObservation> train, val, test;
};

// Partitions observations into train/val/test per the plan derived from
// (gt, seed): evaluation-user events on the evaluation item half form the
// test set; everything else is training, with a user-stratified 10% carved
// out for validation. Throws if any test (user, item) exposure pair also
// appears in train/val.
SplitResult split(const std::vector<ChoiceObservation>& observations,
                  const GroundTruth& gt, std::uint64_t seed);

}  // namespace lcm
