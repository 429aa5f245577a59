#include "lcm/choice_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lcm/rng.hpp"

namespace lcm {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

void validate(const ChoiceObservation& obs) {
    if (obs.choice_set.size() < 2)
        throw std::invalid_argument("choice set must contain at least 2 items");
    bool found = false;
    for (std::size_t i = 0; i < obs.choice_set.size(); ++i) {
        if (obs.choice_set[i] == obs.chosen) found = true;
        for (std::size_t k = i + 1; k < obs.choice_set.size(); ++k)
            if (obs.choice_set[i] == obs.choice_set[k])
                throw std::invalid_argument("choice set items must be pairwise distinct");
    }
    if (!found) throw std::invalid_argument("chosen item not in choice set");
}

void validate(const Simplex& s, double tol) {
    double sum = 0.0;
    for (double p : s.probabilities) {
        if (p < 0.0) throw std::invalid_argument("simplex entry below zero");
        sum += p;
    }
    if (std::abs(sum - 1.0) > tol)
        throw std::invalid_argument("simplex does not sum to 1");
}

double utility(const UtilityParams& params, UserId user, ItemId item) {
    const auto u = params.user_embedding(user);
    const auto v = params.item_embedding(item);
    double dot = 0.0;
    for (std::size_t d = 0; d < u.size(); ++d) dot += u[d] * v[d];
    return dot + params.item_constant(item);
}

Simplex mnl_probs(std::span<const double> utilities) {
    if (utilities.size() < 2)
        throw std::invalid_argument("mnl_probs: need at least 2 alternatives");
    const double vmax = *std::max_element(utilities.begin(), utilities.end());
    Simplex out;
    out.probabilities.resize(utilities.size());
    double z = 0.0;
    for (std::size_t j = 0; j < utilities.size(); ++j) {
        if (!std::isfinite(utilities[j]))
            throw std::invalid_argument("mnl_probs: non-finite utility");
        out.probabilities[j] = std::exp(utilities[j] - vmax);
        z += out.probabilities[j];
    }
    for (double& p : out.probabilities) p /= z;
    return out;
}

ErrorLaw as_error_law(const ErrorDistribution& dist) {
    ErrorLaw law{[dist](double x) { return dist.cdf(x); },
                 [dist](double x) { return dist.pdf(x); },
                 [dist](double p) { return dist.quantile(p); },
                 {}};
    if (const auto* e = std::get_if<SignedExponential>(&dist.kind()))
        law.pdf_discontinuities.push_back(e->location);
    return law;
}

namespace {

// Accumulates every alternative's choice integral over [lo, hi] on a shared
// grid in the substituted coordinate y = V_j + e, so the product over
// competitors can be formed once per grid point from the sum of log-cdfs.
// Endpoints are nudged inward so one-sided pdf limits are evaluated on the
// correct side of a discontinuity.
void integrate_segment(std::span<const double> utilities, const ErrorLaw& err,
                       double lo, double hi, int points, std::vector<double>& acc) {
    const std::size_t n = utilities.size();
    const double h = (hi - lo) / (points - 1);
    const double nudge = 1e-9 * (hi - lo);
    std::vector<double> cdfs(n), pdfs(n);
    for (int g = 0; g < points; ++g) {
        double y = lo + g * h;
        if (g == 0) y += nudge;
        if (g == points - 1) y -= nudge;
        double log_sum = 0.0;
        int zero_count = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const double f = err.cdf(y - utilities[j]);
            cdfs[j] = f;
            pdfs[j] = err.pdf(y - utilities[j]);
            if (f < 1e-300)
                ++zero_count;
            else
                log_sum += std::log(f);
        }
        const double w = (g == 0 || g == points - 1) ? 0.5 * h : h;
        for (std::size_t j = 0; j < n; ++j) {
            if (pdfs[j] == 0.0) continue;
            double prod;
            if (zero_count == 0)
                prod = std::exp(log_sum - std::log(cdfs[j]));
            else if (zero_count == 1 && cdfs[j] < 1e-300)
                prod = std::exp(log_sum);
            else
                continue;
            acc[j] += w * pdfs[j] * prod;
        }
    }
}

// level doubles every segment's floor resolution, so refinement shrinks the
// step everywhere even when the length-proportional share stays tiny.
std::vector<double> integrate_on_grid(std::span<const double> utilities,
                                      const ErrorLaw& err,
                                      const std::vector<double>& bounds, int points,
                                      int level) {
    std::vector<double> acc(utilities.size(), 0.0);
    const double total_len = bounds.back() - bounds.front();
    const int floor_pts = (9 << level) + 1;
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        const double len = bounds[s + 1] - bounds[s];
        const int pts = std::max(
            floor_pts, static_cast<int>(std::lround(points * len / total_len)) | 1);
        integrate_segment(utilities, err, bounds[s], bounds[s + 1], pts, acc);
    }
    return acc;
}

}  // namespace

Simplex generic_probs(std::span<const double> utilities, const ErrorLaw& err,
                      const QuadratureConfig& cfg) {
    if (utilities.size() < 2)
        throw std::invalid_argument("generic_probs: need at least 2 alternatives");
    const double vmin = *std::min_element(utilities.begin(), utilities.end());
    const double vmax = *std::max_element(utilities.begin(), utilities.end());

    double lo = vmin + err.quantile(cfg.tail_mass) - (vmax - vmin);
    double hi = vmax + err.quantile(1.0 - cfg.tail_mass) + (vmax - vmin);
    // Widen until the window misses at most coverage_tail of the error mass
    // relative to every alternative; the residual check below is the gate.
    for (double t = cfg.tail_mass; t > cfg.coverage_tail; t *= 0.1) {
        lo = std::min(lo, vmin + err.quantile(t * 0.1));
        hi = std::max(hi, vmax + err.quantile(1.0 - t * 0.1));
    }

    // Segment boundaries: the window ends plus every pdf discontinuity of any
    // alternative that falls inside it.
    std::vector<double> bounds{lo};
    for (double d : err.pdf_discontinuities)
        for (double v : utilities)
            if (v + d > lo && v + d < hi) bounds.push_back(v + d);
    bounds.push_back(hi);
    std::sort(bounds.begin(), bounds.end());
    bounds.erase(std::unique(bounds.begin(), bounds.end(),
                             [&](double a, double b) {
                                 return std::abs(a - b) < 1e-12 * (hi - lo);
                             }),
                 bounds.end());

    int points = cfg.initial_points;
    int level = 0;
    std::vector<double> prev = integrate_on_grid(utilities, err, bounds, points, level);
    while (points < cfg.max_points) {
        points = 2 * points - 1;
        ++level;
        std::vector<double> cur =
            integrate_on_grid(utilities, err, bounds, points, level);
        double diff = 0.0;
        for (std::size_t j = 0; j < cur.size(); ++j)
            diff = std::max(diff, std::abs(cur[j] - prev[j]));
        prev = std::move(cur);
        if (diff < cfg.refine_tol) break;
    }

    const double total = std::accumulate(prev.begin(), prev.end(), 0.0);
    if (std::abs(total - 1.0) > cfg.residual_tol)
        throw std::runtime_error("generic_probs: quadrature residual " +
                                 std::to_string(std::abs(total - 1.0)) +
                                 " exceeds tolerance");
    Simplex out;
    out.probabilities.resize(prev.size());
    for (std::size_t j = 0; j < prev.size(); ++j) out.probabilities[j] = prev[j] / total;
    return out;
}

Simplex generic_probs(std::span<const double> utilities, const ErrorDistribution& err,
                      const QuadratureConfig& cfg) {
    return generic_probs(utilities, as_error_law(err), cfg);
}

namespace {

// Shared core of enl_probs / enl_prob_gradients. The choice integral under
// mirrored-exponential errors is piecewise exponential in e with breakpoints
// at e = -(V_j - V_j'); each piece integrates in closed form, and the
// gradient of a piece w.r.t. an active utility gap is q times the piece.
struct EnlResult {
    std::vector<double> probs;
    std::vector<std::vector<double>> grads;  // d P_j / d V_row, filled on demand
};

EnlResult enl_core(std::span<const double> utilities, double scale, bool want_grads) {
    if (scale <= 0.0) throw std::invalid_argument("enl_probs: scale must be > 0");
    if (utilities.size() < 2)
        throw std::invalid_argument("enl_probs: need at least 2 alternatives");
    const std::size_t n = utilities.size();
    const double q = 1.0 / scale;

    EnlResult res;
    res.probs.assign(n, 0.0);
    if (want_grads) res.grads.assign(n, std::vector<double>(n, 0.0));

    std::vector<std::pair<double, std::size_t>> brk;  // threshold, competitor index
    std::vector<double> dgap(n);
    for (std::size_t j = 0; j < n; ++j) {
        brk.clear();
        double base_d = 0.0;
        std::size_t active = 0;
        std::vector<std::size_t> active_idx;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == j) continue;
            const double d = utilities[j] - utilities[k];
            dgap[k] = d;
            if (d < 0.0) {
                // Competitor with higher utility: its cdf factor is below 1
                // for every e <= 0.
                base_d += d;
                ++active;
                if (want_grads) active_idx.push_back(k);
            } else {
                brk.emplace_back(-d, k);
            }
        }
        std::sort(brk.begin(), brk.end(),
                  [](const auto& a, const auto& b) { return a.first > b.first; });

        double upper = 0.0;
        double dsum = base_d;
        double prob = 0.0;
        std::vector<double> dgrad;
        if (want_grads) dgrad.assign(n, 0.0);
        for (std::size_t i = 0; i <= brk.size(); ++i) {
            const double lower =
                i < brk.size() ? brk[i].first : -std::numeric_limits<double>::infinity();
            const double c = 1.0 + static_cast<double>(active);
            const double hi_exp = std::exp(q * (dsum + c * upper));
            const double lo_exp =
                std::isinf(lower) ? 0.0 : std::exp(q * (dsum + c * lower));
            const double piece = (hi_exp - lo_exp) / c;
            prob += piece;
            if (want_grads && piece != 0.0) {
                for (std::size_t k : active_idx) dgrad[k] += q * piece;
            }
            if (i < brk.size()) {
                upper = lower;
                dsum += dgap[brk[i].second];
                ++active;
                if (want_grads) active_idx.push_back(brk[i].second);
            }
        }
        res.probs[j] = prob;
        if (want_grads) {
            // dgrad[k] = dP_j / d(V_j - V_k); fold into per-utility gradients.
            double total = 0.0;
            for (std::size_t k = 0; k < n; ++k) total += dgrad[k];
            res.grads[j][j] = total;
            for (std::size_t k = 0; k < n; ++k)
                if (k != j) res.grads[j][k] = -dgrad[k];
        }
    }
    return res;
}

}  // namespace

Simplex enl_probs(std::span<const double> utilities, double scale) {
    EnlResult res = enl_core(utilities, scale, false);
    // The pieces sum to 1 analytically; normalize away rounding residue.
    double total = std::accumulate(res.probs.begin(), res.probs.end(), 0.0);
    Simplex out;
    out.probabilities.resize(res.probs.size());
    for (std::size_t j = 0; j < res.probs.size(); ++j)
        out.probabilities[j] = res.probs[j] / total;
    return out;
}

std::vector<std::vector<double>> enl_prob_gradients(std::span<const double> utilities,
                                                    double scale) {
    return enl_core(utilities, scale, true).grads;
}

BlSetProbs bl_set_probs(std::span<const double> utilities) {
    if (utilities.size() < 2)
        throw std::invalid_argument("bl_set_probs: need at least 2 alternatives");
    const std::size_t n = utilities.size();
    BlSetProbs out;
    out.raw.resize(n);
    // log sigma / log(1-sigma) sums keep the product stable for long sets.
    double log_reject_all = 0.0;
    std::vector<double> log_sig(n), log_one_minus(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double s = sigmoid(utilities[j]);
        log_sig[j] = std::log(std::max(s, 1e-300));
        log_one_minus[j] = std::log(std::max(1.0 - s, 1e-300));
        log_reject_all += log_one_minus[j];
    }
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        out.raw[j] = std::exp(log_reject_all - log_one_minus[j] + log_sig[j]);
        total += out.raw[j];
    }
    out.normalized.probabilities.resize(n);
    for (std::size_t j = 0; j < n; ++j)
        out.normalized.probabilities[j] = out.raw[j] / total;
    return out;
}

double binary_losses(std::span<const ChoiceObservation> batch, const UtilityParams& params,
                     BinaryLossKind kind, const NegativeSamplingConfig& neg) {
    if (batch.empty()) throw std::invalid_argument("binary_losses: empty batch");
    double loss = 0.0;
    std::size_t terms = 0;

    double positive_power = 1.0;
    if (kind == BinaryLossKind::GBCE) {
        if (neg.corpus_size < 2)
            throw std::invalid_argument("binary_losses: gBCE needs a corpus");
        const double alpha = static_cast<double>(neg.negatives_per_positive) /
                             static_cast<double>(neg.corpus_size - 1);
        positive_power = alpha * (neg.t * (1.0 - 1.0 / alpha) + 1.0 / alpha);
    }

    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& obs = batch[i];
        const double vpos = utility(params, obs.user, obs.chosen);
        loss += -positive_power * std::log(std::max(sigmoid(vpos), 1e-300));
        ++terms;
        if (kind == BinaryLossKind::BL) {
            for (ItemId j : obs.choice_set) {
                if (j == obs.chosen) continue;
                const double v = utility(params, obs.user, j);
                loss += -std::log(std::max(1.0 - sigmoid(v), 1e-300));
                ++terms;
            }
        } else {
            if (neg.corpus_size < 2 || neg.negatives_per_positive < 1)
                throw std::invalid_argument("binary_losses: empty negative pool");
            for (int s = 0; s < neg.negatives_per_positive; ++s) {
                std::uint64_t key = mix_key(neg.seed, i, static_cast<std::uint64_t>(s));
                ItemId j = static_cast<ItemId>(key % static_cast<std::uint64_t>(
                                                         neg.corpus_size - 1));
                if (j >= obs.chosen) ++j;  // skip the positive
                const double v = utility(params, obs.user, j);
                loss += -std::log(std::max(1.0 - sigmoid(v), 1e-300));
                ++terms;
            }
        }
    }
    return loss / static_cast<double>(terms);
}

}  // namespace lcm
