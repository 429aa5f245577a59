#include "lcm/kernel_cdf.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lcm {

double softplus(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
}

double softplus_inverse(double y) {
    if (y <= 0.0) throw std::domain_error("softplus_inverse: argument must be > 0");
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

void clamp_raw(KernelCdfParams& raw) {
    for (double& b : raw.betas) b = std::clamp(b, kBetaLower, kBetaUpper);
    raw.lambda = std::clamp(raw.lambda, kLambdaLower, kLambdaUpper);
}

DerivedKernels derive(const KernelCdfParams& raw) {
    const int K = raw.kernel_count();
    if (K < 1) throw std::invalid_argument("derive: need at least one kernel");
    if (static_cast<int>(raw.betas.size()) != K)
        throw std::invalid_argument("derive: alphas/betas size mismatch");

    DerivedKernels dk;
    dk.weights.resize(K);
    dk.bandwidths.resize(K);
    dk.design_points.resize(K);

    const double amax = *std::max_element(raw.alphas.begin(), raw.alphas.end());
    double z = 0.0;
    for (int k = 0; k < K; ++k) {
        dk.weights[k] = std::exp(raw.alphas[k] - amax);
        z += dk.weights[k];
    }
    for (int k = 0; k < K; ++k) dk.weights[k] /= z;

    dk.scale = softplus(raw.lambda);
    for (int k = 0; k < K; ++k) {
        dk.bandwidths[k] = dk.scale / K * softplus(raw.betas[k]);
        dk.design_points[k] =
            K == 1 ? 0.0 : dk.scale * (2.0 * k / (K - 1.0) - 1.0);
    }
    return dk;
}

double kernel_cdf(const DerivedKernels& dk, double x) {
    double c = 0.0;
    for (std::size_t k = 0; k < dk.weights.size(); ++k)
        c += dk.weights[k] * sigmoid((x - dk.design_points[k]) / dk.bandwidths[k]);
    return c;
}

double kernel_pdf(const DerivedKernels& dk, double x) {
    double p = 0.0;
    for (std::size_t k = 0; k < dk.weights.size(); ++k) {
        const double s = sigmoid((x - dk.design_points[k]) / dk.bandwidths[k]);
        p += dk.weights[k] / dk.bandwidths[k] * s * (1.0 - s);
    }
    return p;
}

double kernel_sample(const DerivedKernels& dk, int kernel_index, double uniform_draw) {
    if (uniform_draw <= 0.0 || uniform_draw >= 1.0)
        throw std::domain_error("kernel_sample: uniform draw must lie in (0, 1)");
    return dk.design_points[kernel_index] +
           dk.bandwidths[kernel_index] *
               std::log(uniform_draw / (1.0 - uniform_draw));
}

void derive_backward(const KernelCdfParams& raw, const DerivedKernels& dk,
                     const std::vector<double>& d_weights,
                     const std::vector<double>& d_bandwidths,
                     const std::vector<double>& d_design_points, double d_scale,
                     std::vector<double>& d_alphas, std::vector<double>& d_betas,
                     double& d_lambda) {
    const int K = raw.kernel_count();
    // softmax backward
    double wdot = 0.0;
    for (int k = 0; k < K; ++k) wdot += dk.weights[k] * d_weights[k];
    for (int k = 0; k < K; ++k)
        d_alphas[k] += dk.weights[k] * (d_weights[k] - wdot);

    // h_k = (l/K) softplus(beta_k), x_k = l * gamma_k, l = softplus(lambda)
    double dl = d_scale;
    for (int k = 0; k < K; ++k) {
        const double sp = softplus(raw.betas[k]);
        d_betas[k] += d_bandwidths[k] * dk.scale / K * sigmoid(raw.betas[k]);
        dl += d_bandwidths[k] * sp / K;
        const double gamma = K == 1 ? 0.0 : 2.0 * k / (K - 1.0) - 1.0;
        dl += d_design_points[k] * gamma;
    }
    d_lambda += dl * sigmoid(raw.lambda);
}

KernelCdfGrad kernel_cdf_raw_grad(const KernelCdfParams& raw, double x) {
    const DerivedKernels dk = derive(raw);
    const int K = raw.kernel_count();
    std::vector<double> dw(K, 0.0), dh(K, 0.0), dx(K, 0.0);
    for (int k = 0; k < K; ++k) {
        const double z = (x - dk.design_points[k]) / dk.bandwidths[k];
        const double s = sigmoid(z);
        const double sprime = s * (1.0 - s);
        dw[k] = s;
        dh[k] = dk.weights[k] * sprime * (-z / dk.bandwidths[k]);
        dx[k] = dk.weights[k] * sprime * (-1.0 / dk.bandwidths[k]);
    }
    KernelCdfGrad g;
    g.d_alphas.assign(K, 0.0);
    g.d_betas.assign(K, 0.0);
    derive_backward(raw, dk, dw, dh, dx, 0.0, g.d_alphas, g.d_betas, g.d_lambda);
    return g;
}

DerivedKernels construct_approximation(const std::function<double(double)>& target_cdf,
                                       int kernel_count, double lo, double hi) {
    if (kernel_count < 2)
        throw std::invalid_argument("construct_approximation: need K >= 2");
    if (!(hi > lo))
        throw std::invalid_argument("construct_approximation: empty interval");

    const int K = kernel_count;
    const double spacing = (hi - lo) / (K - 1);
    DerivedKernels dk;
    dk.scale = 0.5 * (hi - lo);
    dk.design_points.resize(K);
    dk.weights.resize(K);
    dk.bandwidths.assign(K, spacing * 0.25);

    // Cumulative weights are anchored half a spacing past each design point:
    // a sigmoid sits at 0.5 on its own design point, so anchoring there would
    // leave every riser half a weight short of the target.
    double prev = 0.0;
    for (int k = 0; k < K; ++k) {
        dk.design_points[k] = lo + k * spacing;
        const double f = target_cdf(dk.design_points[k] + 0.5 * spacing);
        if (f < prev - 1e-12)
            throw std::invalid_argument(
                "construct_approximation: target cdf decreases on the grid");
        dk.weights[k] = std::max(f - prev, 0.0);
        prev = std::max(prev, f);
    }
    // Mass outside the interval goes to the boundary kernels so the weights
    // form a distribution.
    dk.weights[K - 1] += std::max(1.0 - prev, 0.0);
    double total = 0.0;
    for (double w : dk.weights) total += w;
    for (double& w : dk.weights) w /= total;
    // A zero-weight kernel is harmless for the cdf but breaks sampling; keep
    // everything strictly positive and renormalize.
    for (double& w : dk.weights) w = std::max(w, 1e-15);
    total = 0.0;
    for (double w : dk.weights) total += w;
    for (double& w : dk.weights) w /= total;
    return dk;
}

ErrorLaw as_error_law(const DerivedKernels& dk) {
    const double hmax = *std::max_element(dk.bandwidths.begin(), dk.bandwidths.end());
    const double lo0 = dk.design_points.front() - 50.0 * hmax;
    const double hi0 = dk.design_points.back() + 50.0 * hmax;
    return ErrorLaw{
        [dk](double x) { return kernel_cdf(dk, x); },
        [dk](double x) { return kernel_pdf(dk, x); },
        [dk, lo0, hi0](double p) {
            if (p <= 0.0 || p >= 1.0)
                throw std::domain_error("kernel quantile: p must lie in (0, 1)");
            double lo = lo0, hi = hi0;
            for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(lo)); ++it) {
                const double mid = 0.5 * (lo + hi);
                (kernel_cdf(dk, mid) < p ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        },
        {}};
}

}  // namespace lcm
