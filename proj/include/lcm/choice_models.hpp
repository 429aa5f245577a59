#pragma once

#include <functional>
#include <span>
#include <vector>

#include "lcm/error_distribution.hpp"
#include "lcm/types.hpp"

namespace lcm {

// Minimal interface generic_probs needs from an error law. Adapters exist for
// the analytic ErrorDistribution kinds and for learned kernel mixtures.
struct ErrorLaw {
    std::function<double(double)> cdf;
    std::function<double(double)> pdf;
    std::function<double(double)> quantile;  // inverse cdf on (0, 1)
    // Points where the pdf is discontinuous; the quadrature grid is split
    // there so the trapezoid rule keeps its second-order convergence.
    std::vector<double> pdf_discontinuities;
};

ErrorLaw as_error_law(const ErrorDistribution& dist);

struct QuadratureConfig {
    // Initial window: [quantile(tail_mass) - max gap, quantile(1 - tail_mass) + max gap].
    double tail_mass = 1e-3;
    // The window is widened until the probability mass it misses is below this.
    double coverage_tail = 1e-9;
    // Grid refinement stops when successive composite-trapezoid estimates of
    // every alternative differ by less than this.
    double refine_tol = 1e-7;
    // |sum of probabilities - 1| must end up below this before renormalizing.
    double residual_tol = 1e-6;
    int initial_points = 257;
    int max_points = 1 << 21;
};

// Softmax choice probabilities, max-shifted for stability.
Simplex mnl_probs(std::span<const double> utilities);

// Choice probabilities under an arbitrary IID error law, by adaptive
// trapezoid quadrature of the choice integral. Throws if the residual cannot
// be brought below cfg.residual_tol.
Simplex generic_probs(std::span<const double> utilities, const ErrorLaw& err,
                      const QuadratureConfig& cfg = {});
Simplex generic_probs(std::span<const double> utilities, const ErrorDistribution& err,
                      const QuadratureConfig& cfg = {});

// Exponomial model: choice probabilities under IID mirrored-exponential
// errors with the given scale. Exact piecewise-exponential closed form.
Simplex enl_probs(std::span<const double> utilities, double scale);

// d P_j / d V_j' for all pairs (j, j'), same closed form as enl_probs.
// Row j holds the gradient of P_j with respect to each utility.
std::vector<std::vector<double>> enl_prob_gradients(std::span<const double> utilities,
                                                    double scale);

// Binary-logit set scores: "choose j and reject everything else".
struct BlSetProbs {
    Simplex normalized;
    std::vector<double> raw;  // sigma(V_j) * prod_{j' != j} (1 - sigma(V_j'))
};
BlSetProbs bl_set_probs(std::span<const double> utilities);

enum class BinaryLossKind { BL, BCE, GBCE };

struct NegativeSamplingConfig {
    int negatives_per_positive = 3;
    // Item corpus negatives are drawn from (uniformly, excluding the positive).
    ItemId corpus_size = 0;
    // gBCE calibration parameter t; beta = alpha * (t * (1 - 1/alpha) + 1/alpha)
    // with sampling rate alpha = negatives / (corpus_size - 1).
    double t = 1.0;
    std::uint64_t seed = 0;
};

// Mean per-interaction logistic loss over a batch. BL uses the in-set
// negatives; BCE/gBCE draw negatives from the item corpus.
double binary_losses(std::span<const ChoiceObservation> batch, const UtilityParams& params,
                     BinaryLossKind kind, const NegativeSamplingConfig& neg = {});

double sigmoid(double x);

}  // namespace lcm
