#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "lcm/kernel_cdf.hpp"
#include "lcm/types.hpp"

namespace lcm {

// Monte-Carlo estimate of one observation's choice probability. Draws are
// retained so the gradient pass can reuse them.
struct McEstimate {
    std::vector<double> per_sample;  // size S, each averaged over kernels
    double mean = 0.0;
    // Reparameterized draws and their logits, laid out [kernel * S + sample].
    std::vector<double> draws;
    std::vector<double> logits;
};

// Stream coordinates for the counter-based uniform draws: every (epoch,
// observation, kernel, sample) tuple gets its own deterministic draw, so
// parallel scheduling cannot change the sampled noise.
struct McRngStream {
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    std::uint64_t observation = 0;

    double draw(int kernel, int sample) const;
};

McEstimate choice_prob_mc(const ChoiceObservation& obs, const UtilityParams& up,
                          const DerivedKernels& dk, int sample_count,
                          const McRngStream& stream);

// Bias-corrected negative log-likelihood (third-order Taylor correction of
// the log of a Monte-Carlo mean).
struct NllResult {
    double value = 0.0;
    int floored = 0;  // estimates clamped at the probability floor
};
inline constexpr double kProbFloor = 1e-12;

NllResult nll_corrected(std::span<const McEstimate> estimates);

// Loss gradients for every learnable parameter; embedding entries are sparse
// over the users/items the batch touches.
struct GradientSet {
    std::vector<double> d_alphas;
    std::vector<double> d_betas;
    double d_lambda = 0.0;
    std::unordered_map<UserId, std::vector<double>> d_user_embeddings;
    std::unordered_map<ItemId, std::vector<double>> d_item_embeddings;
    std::unordered_map<ItemId, double> d_item_constants;

    void accumulate(const GradientSet& other);
    void scale(double factor);
    // Throws naming the offending parameter if any entry is non-finite.
    void check_finite() const;
};

struct McConfig {
    int sample_count = 5;
    std::uint64_t seed = 0;
    std::uint64_t epoch = 0;
    // Offset added to the in-batch index to form the observation stream id.
    std::uint64_t observation_base = 0;
    int threads = 1;          // 1 = serial
    int chunk_size = 256;     // fixed so results do not depend on threads
};

struct LossAndGradients {
    double loss = 0.0;
    GradientSet gradients;
    int floored = 0;
};

// Value and exact gradient of the bias-corrected NLL over a batch, with the
// same retained draws used for both. Summed over observations.
LossAndGradients loss_and_gradients(std::span<const ChoiceObservation> batch,
                                    const UtilityParams& up, const KernelCdfParams& raw,
                                    const McConfig& cfg);

}  // namespace lcm
