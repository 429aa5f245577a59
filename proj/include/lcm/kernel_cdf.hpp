#pragma once

#include <functional>
#include <vector>

#include "lcm/choice_models.hpp"

namespace lcm {

// Raw, unconstrained parameters of the sigmoid-kernel mixture cdf. The
// model-facing quantities (weights, bandwidths, scale, design points) are
// obtained through derive().
struct KernelCdfParams {
    std::vector<double> alphas;  // kernel weight logits
    std::vector<double> betas;   // bandwidth pre-activations
    double lambda = 0.0;         // scale pre-activation

    int kernel_count() const { return static_cast<int>(alphas.size()); }
};

// Numerical-stability bounds on the raw parameters, enforced by projection
// after every gradient step.
inline constexpr double kBetaLower = -0.1;
inline constexpr double kBetaUpper = 5.0;
inline constexpr double kLambdaLower = 0.1;
inline constexpr double kLambdaUpper = 10.0;

// Clamps betas and lambda into their bounds, in place.
void clamp_raw(KernelCdfParams& raw);

struct DerivedKernels {
    std::vector<double> weights;        // positive, sum to 1
    std::vector<double> bandwidths;     // positive
    std::vector<double> design_points;  // kernel locations
    double scale = 0.0;                 // half-width of the design interval
};

// weights = softmax(alphas); scale = softplus(lambda);
// bandwidth_k = (scale / K) * softplus(beta_k); design points uniform over
// [-scale, scale] (a single kernel sits at 0).
DerivedKernels derive(const KernelCdfParams& raw);

double kernel_cdf(const DerivedKernels& dk, double x);
double kernel_pdf(const DerivedKernels& dk, double x);

// Inverse-cdf draw from kernel k alone: x_k + h_k * logit(u). Differentiable
// in the kernel's location and bandwidth for a fixed uniform draw.
double kernel_sample(const DerivedKernels& dk, int kernel_index, double uniform_draw);

// Gradient of kernel_cdf(derive(raw), x) with respect to the raw parameters.
struct KernelCdfGrad {
    std::vector<double> d_alphas;
    std::vector<double> d_betas;
    double d_lambda = 0.0;
};
KernelCdfGrad kernel_cdf_raw_grad(const KernelCdfParams& raw, double x);

// Backward pass through the derive() transforms: given gradients w.r.t. the
// derived weights/bandwidths/design points (and optionally directly w.r.t.
// the scale), accumulates gradients w.r.t. the raw parameters.
void derive_backward(const KernelCdfParams& raw, const DerivedKernels& dk,
                     const std::vector<double>& d_weights,
                     const std::vector<double>& d_bandwidths,
                     const std::vector<double>& d_design_points, double d_scale,
                     std::vector<double>& d_alphas, std::vector<double>& d_betas,
                     double& d_lambda);

// Constructive approximation behind the universal-approximation property:
// design points span [lo, hi], cumulative weights match the target cdf at the
// design points, bandwidths a small fraction of the spacing. Throws if the
// target decreases on the design grid.
DerivedKernels construct_approximation(const std::function<double(double)>& target_cdf,
                                       int kernel_count, double lo, double hi);

ErrorLaw as_error_law(const DerivedKernels& dk);

double softplus(double x);
double softplus_inverse(double y);

}  // namespace lcm
