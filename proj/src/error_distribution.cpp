#include "lcm/error_distribution.hpp"

#include <cmath>
#include <stdexcept>

namespace lcm {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

double normal_pdf(double z) {
    return 0.39894228040143267794 * std::exp(-0.5 * z * z);
}

void check_mixture(const GaussianMixture& m) {
    if (m.weights.empty() || m.weights.size() != m.means.size() ||
        m.weights.size() != m.stddevs.size())
        throw std::invalid_argument("gaussian mixture: inconsistent component lists");
    double sum = 0.0;
    for (double w : m.weights) {
        if (w < 0.0) throw std::invalid_argument("gaussian mixture: negative weight");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("gaussian mixture: weights must sum to 1");
    for (double s : m.stddevs)
        if (s <= 0.0) throw std::invalid_argument("gaussian mixture: nonpositive stddev");
}

}  // namespace

ErrorDistribution::ErrorDistribution(Kind kind) : kind_(std::move(kind)) {
    if (const auto* g = std::get_if<Gumbel>(&kind_)) {
        if (g->scale <= 0.0) throw std::invalid_argument("gumbel: scale must be > 0");
    } else if (const auto* e = std::get_if<SignedExponential>(&kind_)) {
        if (e->scale <= 0.0)
            throw std::invalid_argument("signed exponential: scale must be > 0");
    } else {
        check_mixture(std::get<GaussianMixture>(kind_));
    }
}

double ErrorDistribution::cdf(double x) const {
    if (const auto* g = std::get_if<Gumbel>(&kind_)) {
        return std::exp(-std::exp(-(x - g->location) / g->scale));
    }
    if (const auto* e = std::get_if<SignedExponential>(&kind_)) {
        const double z = (x - e->location) / e->scale;
        return z >= 0.0 ? 1.0 : std::exp(z);
    }
    const auto& m = std::get<GaussianMixture>(kind_);
    double c = 0.0;
    for (std::size_t i = 0; i < m.weights.size(); ++i)
        c += m.weights[i] * normal_cdf((x - m.means[i]) / m.stddevs[i]);
    return c;
}

double ErrorDistribution::pdf(double x) const {
    if (const auto* g = std::get_if<Gumbel>(&kind_)) {
        const double z = (x - g->location) / g->scale;
        return std::exp(-z - std::exp(-z)) / g->scale;
    }
    if (const auto* e = std::get_if<SignedExponential>(&kind_)) {
        const double z = (x - e->location) / e->scale;
        return z >= 0.0 ? 0.0 : std::exp(z) / e->scale;
    }
    const auto& m = std::get<GaussianMixture>(kind_);
    double p = 0.0;
    for (std::size_t i = 0; i < m.weights.size(); ++i)
        p += m.weights[i] * normal_pdf((x - m.means[i]) / m.stddevs[i]) / m.stddevs[i];
    return p;
}

double ErrorDistribution::quantile(double p) const {
    if (p <= 0.0 || p >= 1.0)
        throw std::domain_error("quantile: p must lie in (0, 1)");
    if (const auto* g = std::get_if<Gumbel>(&kind_)) {
        return g->location - g->scale * std::log(-std::log(p));
    }
    if (const auto* e = std::get_if<SignedExponential>(&kind_)) {
        return e->location + e->scale * std::log(p);
    }
    // Mixture: bisection on the monotone cdf.
    const auto& m = std::get<GaussianMixture>(kind_);
    double lo = m.means[0], hi = m.means[0];
    for (std::size_t i = 0; i < m.means.size(); ++i) {
        lo = std::min(lo, m.means[i] - 12.0 * m.stddevs[i]);
        hi = std::max(hi, m.means[i] + 12.0 * m.stddevs[i]);
    }
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double ErrorDistribution::sample(Rng& rng) const {
    if (const auto* g = std::get_if<Gumbel>(&kind_)) {
        return rng.gumbel(g->location, g->scale);
    }
    if (const auto* e = std::get_if<SignedExponential>(&kind_)) {
        return rng.signed_exponential(e->location, e->scale);
    }
    const auto& m = std::get<GaussianMixture>(kind_);
    double u = rng.uniform();
    std::size_t comp = m.weights.size() - 1;
    for (std::size_t i = 0; i < m.weights.size(); ++i) {
        if (u < m.weights[i]) {
            comp = i;
            break;
        }
        u -= m.weights[i];
    }
    return m.means[comp] + m.stddevs[comp] * rng.normal();
}

std::string ErrorDistribution::name() const {
    if (std::holds_alternative<Gumbel>(kind_)) return "gumbel";
    if (std::holds_alternative<SignedExponential>(kind_)) return "signed_exponential";
    return "gaussian_mixture";
}

}  // namespace lcm
