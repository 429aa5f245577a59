#include "lcm/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "lcm/rng.hpp"

namespace lcm {

CorpusOracle make_corpus_oracle(const GroundTruth& gt, const std::vector<UserId>& users,
                                const std::vector<ItemId>& items,
                                const QuadratureConfig& quad) {
    if (users.empty() || items.empty())
        throw std::invalid_argument("make_corpus_oracle: empty corpus");
    CorpusOracle oracle;
    oracle.users = users;
    oracle.items = items;
    oracle.true_probs.reserve(users.size());
    const ErrorLaw law = as_error_law(gt.error);
    std::vector<double> utils(items.size());
    for (UserId u : users) {
        for (std::size_t k = 0; k < items.size(); ++k)
            utils[k] = utility(gt.params, u, items[k]);
        oracle.true_probs.push_back(generic_probs(utils, law, quad).probabilities);
    }
    return oracle;
}

std::vector<double> model_set_probs(const FittedModel& model, UserId user,
                                    std::span<const ItemId> items) {
    std::vector<double> utils(items.size());
    for (std::size_t k = 0; k < items.size(); ++k)
        utils[k] = utility(model.utility, user, items[k]);
    switch (model.model_kind) {
        case ModelKind::MNL:
            return mnl_probs(utils).probabilities;
        case ModelKind::ENL:
            return enl_probs(utils, 1.0).probabilities;
        case ModelKind::BL:
        case ModelKind::BCE:
        case ModelKind::GBCE:
            return bl_set_probs(utils).normalized.probabilities;
        case ModelKind::LCM4Rec: {
            if (!model.kernel.has_value())
                throw std::invalid_argument("model_set_probs: missing kernel params");
            const DerivedKernels dk = derive(*model.kernel);
            return generic_probs(utils, as_error_law(dk)).probabilities;
        }
    }
    throw std::logic_error("model_set_probs: unreachable");
}

double kld_corpus(const FittedModel& model, const CorpusOracle& oracle) {
    double total = 0.0;
    for (std::size_t ui = 0; ui < oracle.users.size(); ++ui) {
        const std::vector<double> q =
            model_set_probs(model, oracle.users[ui], oracle.items);
        const std::vector<double>& p = oracle.true_probs[ui];
        double kl = 0.0;
        for (std::size_t k = 0; k < p.size(); ++k) {
            if (p[k] <= 0.0) continue;
            kl += p[k] * std::log(p[k] / std::max(q[k], 1e-12));
        }
        total += kl;
    }
    return total / static_cast<double>(oracle.users.size());
}

namespace {

// DCG of `relevance` read in `order`, standard log2 position discount.
double dcg(const std::vector<double>& relevance, const std::vector<std::size_t>& order) {
    double v = 0.0;
    for (std::size_t r = 0; r < order.size(); ++r)
        v += relevance[order[r]] / std::log2(static_cast<double>(r) + 2.0);
    return v;
}

}  // namespace

MetricReport test_metrics(const FittedModel& model,
                          std::span<const ChoiceObservation> test_set,
                          const CorpusOracle& oracle, bool per_set_ndcg) {
    if (test_set.empty()) throw std::invalid_argument("test_metrics: empty test set");
    MetricReport rep;

    double nll = 0.0, acc = 0.0, ndcg_sets = 0.0;
    for (const auto& obs : test_set) {
        const std::vector<double> probs =
            model_set_probs(model, obs.user, obs.choice_set);
        std::size_t chosen_pos = 0, best_pos = 0;
        for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
            if (obs.choice_set[c] == obs.chosen) chosen_pos = c;
            if (probs[c] > probs[best_pos]) best_pos = c;
        }
        nll += -std::log(std::max(probs[chosen_pos], 1e-12));
        acc += best_pos == chosen_pos ? 1.0 : 0.0;
        if (per_set_ndcg) {
            // single relevant item: nDCG reduces to 1/log2(1 + rank of chosen)
            std::size_t rank = 1;
            for (std::size_t c = 0; c < probs.size(); ++c)
                if (probs[c] > probs[chosen_pos] ||
                    (probs[c] == probs[chosen_pos] && c < chosen_pos))
                    ++rank;
            ndcg_sets += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        }
    }
    rep.nll = nll / static_cast<double>(test_set.size());
    rep.acc = acc / static_cast<double>(test_set.size());

    if (per_set_ndcg) {
        rep.ndcg = ndcg_sets / static_cast<double>(test_set.size());
    } else {
        // corpus-level nDCG: rank the evaluation corpus by predicted utility,
        // graded by the true corpus choice probabilities
        double total = 0.0;
        for (std::size_t ui = 0; ui < oracle.users.size(); ++ui) {
            const UserId u = oracle.users[ui];
            std::vector<double> pred(oracle.items.size());
            for (std::size_t k = 0; k < oracle.items.size(); ++k)
                pred[k] = utility(model.utility, u, oracle.items[k]);
            std::vector<std::size_t> order(pred.size());
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return pred[a] != pred[b] ? pred[a] > pred[b]
                                          : oracle.items[a] < oracle.items[b];
            });
            std::vector<std::size_t> ideal(pred.size());
            std::iota(ideal.begin(), ideal.end(), 0);
            const std::vector<double>& rel = oracle.true_probs[ui];
            std::sort(ideal.begin(), ideal.end(), [&](std::size_t a, std::size_t b) {
                return rel[a] != rel[b] ? rel[a] > rel[b]
                                        : oracle.items[a] < oracle.items[b];
            });
            const double ideal_dcg = dcg(rel, ideal);
            total += ideal_dcg > 0.0 ? dcg(rel, order) / ideal_dcg : 1.0;
        }
        rep.ndcg = total / static_cast<double>(oracle.users.size());
    }
    rep.kld_corpus = kld_corpus(model, oracle);
    return rep;
}

namespace {

struct SmoothedGrid {
    std::vector<double> x;
    double step = 0.0;
};

std::vector<double> smooth_and_normalize(const std::vector<double>& raw, double step,
                                         double width) {
    const int n = static_cast<int>(raw.size());
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * width / step)));
    std::vector<double> kernel(2 * radius + 1);
    double ksum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        kernel[i + radius] = std::exp(-0.5 * (i * step) * (i * step) / (width * width));
        ksum += kernel[i + radius];
    }
    for (double& k : kernel) k /= ksum;
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i) {
        double v = 0.0;
        for (int d = -radius; d <= radius; ++d) {
            const int j = i + d;
            if (j >= 0 && j < n) v += raw[j] * kernel[d + radius];
        }
        out[i] = std::max(v, 1e-12);
    }
    double total = 0.0;
    for (double v : out) total += v;
    for (double& v : out) v /= total;
    return out;
}

}  // namespace

double error_dist_kld(const std::function<double(double)>& estimated_pdf,
                      const ErrorDistribution& true_law,
                      const ErrorDistKldConfig& cfg) {
    const int n = cfg.grid_points;
    const double step = (cfg.grid_hi - cfg.grid_lo) / (n - 1);
    if (true_law.quantile(0.001) < cfg.grid_lo ||
        true_law.quantile(0.999) > cfg.grid_hi)
        throw std::invalid_argument("error_dist_kld: grid does not cover the true law");

    std::vector<double> p_raw(n);
    for (int i = 0; i < n; ++i) p_raw[i] = true_law.pdf(cfg.grid_lo + i * step);
    const std::vector<double> p = smooth_and_normalize(p_raw, step, cfg.smoothing_width);

    auto kl_at = [&](double shift) {
        std::vector<double> q_raw(n);
        for (int i = 0; i < n; ++i)
            q_raw[i] = estimated_pdf(cfg.grid_lo + i * step - shift);
        const std::vector<double> q =
            smooth_and_normalize(q_raw, step, cfg.smoothing_width);
        double kl = 0.0;
        for (int i = 0; i < n; ++i) kl += p[i] * std::log(p[i] / q[i]);
        return kl;
    };

    // coarse scan, then golden-section refinement around the best cell
    const int coarse = 25;
    double best_shift = 0.0, best = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= coarse; ++i) {
        const double s = -cfg.shift_range + 2.0 * cfg.shift_range * i / coarse;
        const double v = kl_at(s);
        if (v < best) {
            best = v;
            best_shift = s;
        }
    }
    const double cell = 2.0 * cfg.shift_range / coarse;
    double a = best_shift - cell, b = best_shift + cell;
    const double gr = 0.6180339887498949;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = kl_at(x1), f2 = kl_at(x2);
    for (int it = 0; it < 60 && b - a > 1e-7; ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = kl_at(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = kl_at(x2);
        }
    }
    return std::min({best, f1, f2});
}

double error_dist_kld(const DerivedKernels& estimated, const ErrorDistribution& true_law,
                      const ErrorDistKldConfig& cfg) {
    return error_dist_kld([&](double x) { return kernel_pdf(estimated, x); }, true_law,
                          cfg);
}

namespace {

// rank of every treated item (1-based, descending utility, ties by item id),
// averaged over all users of the model
std::vector<double> mean_ranks(const FittedModel& model,
                               const std::vector<ItemId>& treated,
                               const std::vector<ItemId>& corpus) {
    std::vector<double> mean(treated.size(), 0.0);
    const int n_users = static_cast<int>(model.utility.n_users());
    std::vector<double> utils(corpus.size());
    for (UserId u = 0; u < n_users; ++u) {
        for (std::size_t k = 0; k < corpus.size(); ++k)
            utils[k] = utility(model.utility, u, corpus[k]);
        for (std::size_t t = 0; t < treated.size(); ++t) {
            // rank of treated[t] within the corpus for this user
            double ut = 0.0;
            for (std::size_t k = 0; k < corpus.size(); ++k)
                if (corpus[k] == treated[t]) ut = utils[k];
            std::size_t rank = 1;
            for (std::size_t k = 0; k < corpus.size(); ++k) {
                if (corpus[k] == treated[t]) continue;
                if (utils[k] > ut || (utils[k] == ut && corpus[k] < treated[t])) ++rank;
            }
            mean[t] += static_cast<double>(rank);
        }
    }
    for (double& m : mean) m /= static_cast<double>(n_users);
    return mean;
}

}  // namespace

std::vector<RankShiftRecord> rank_shift_per_item(const FittedModel& model_a,
                                                 const FittedModel& model_b,
                                                 const std::vector<ItemId>& treated_items,
                                                 const std::vector<ItemId>& corpus) {
    const std::vector<double> ra = mean_ranks(model_a, treated_items, corpus);
    const std::vector<double> rb = mean_ranks(model_b, treated_items, corpus);
    std::vector<RankShiftRecord> records(treated_items.size());
    for (std::size_t t = 0; t < treated_items.size(); ++t) {
        records[t].item = treated_items[t];
        records[t].mean_rank_a = ra[t];
        records[t].mean_rank_b = rb[t];
        records[t].shift = rb[t] - ra[t];
    }
    return records;
}

double rank_shift(const FittedModel& model_a, const FittedModel& model_b,
                  const std::vector<ItemId>& treated_items,
                  const std::vector<ItemId>& corpus) {
    if (treated_items.empty()) return 0.0;
    const auto records = rank_shift_per_item(model_a, model_b, treated_items, corpus);
    double total = 0.0;
    for (const auto& r : records) total += r.shift;
    return total / static_cast<double>(records.size());
}

BootstrapResult bootstrap_compare(std::span<const double> values_a,
                                  std::span<const double> values_b, int n_resamples,
                                  std::uint64_t seed) {
    if (values_a.size() != values_b.size())
        throw std::invalid_argument("bootstrap_compare: length mismatch");
    const std::size_t n = values_a.size();
    if (n < 2) throw std::invalid_argument("bootstrap_compare: need n >= 2");

    std::vector<double> diff(n);
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        diff[i] = values_a[i] - values_b[i];
        mean += diff[i];
    }
    mean /= static_cast<double>(n);

    Rng rng(mix_key(seed, 0xB0075));
    std::vector<double> means(n_resamples);
    int below = 0, at = 0;
    for (int r = 0; r < n_resamples; ++r) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i) m += diff[rng.uniform_index(n)];
        means[r] = m / static_cast<double>(n);
        if (means[r] < 0.0) ++below;
        if (means[r] == 0.0) ++at;
    }
    std::sort(means.begin(), means.end());
    auto pct = [&](double q) {
        const double pos = q * (n_resamples - 1);
        const std::size_t i = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(i);
        return i + 1 < means.size() ? means[i] * (1.0 - frac) + means[i + 1] * frac
                                    : means.back();
    };
    BootstrapResult res;
    res.mean_diff = mean;
    res.ci_lo = pct(0.025);
    res.ci_hi = pct(0.975);
    res.p_one_sided =
        (static_cast<double>(below) + 0.5 * static_cast<double>(at)) / n_resamples;
    return res;
}

}  // namespace lcm
