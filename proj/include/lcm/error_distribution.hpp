#pragma once

#include <string>
#include <variant>
#include <vector>

#include "lcm/rng.hpp"

namespace lcm {

// Analytic ground-truth noise laws. These drive the simulator and the
// quadrature oracles; each exposes cdf, pdf, quantile and sampling.

struct Gumbel {
    double location = 0.0;
    double scale = 1.0;
};

// Mirrored exponential: location - Exponential(scale), support (-inf, location].
struct SignedExponential {
    double location = 0.0;
    double scale = 1.0;
};

struct GaussianMixture {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> stddevs;
};

class ErrorDistribution {
  public:
    using Kind = std::variant<Gumbel, SignedExponential, GaussianMixture>;

    ErrorDistribution() : kind_(Gumbel{}) {}
    explicit ErrorDistribution(Kind kind);

    static ErrorDistribution gumbel(double location, double scale) {
        return ErrorDistribution(Gumbel{location, scale});
    }
    static ErrorDistribution signed_exponential(double location, double scale) {
        return ErrorDistribution(SignedExponential{location, scale});
    }
    static ErrorDistribution gaussian_mixture(std::vector<double> weights,
                                              std::vector<double> means,
                                              std::vector<double> stddevs) {
        return ErrorDistribution(
            GaussianMixture{std::move(weights), std::move(means), std::move(stddevs)});
    }

    double cdf(double x) const;
    double pdf(double x) const;
    // Inverse cdf; p must lie in (0, 1).
    double quantile(double p) const;
    double sample(Rng& rng) const;

    const Kind& kind() const { return kind_; }
    std::string name() const;

  private:
    Kind kind_;
};

}  // namespace lcm
