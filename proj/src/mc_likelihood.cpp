#include "lcm/mc_likelihood.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "lcm/parallel.hpp"
#include "lcm/rng.hpp"

namespace lcm {

double McRngStream::draw(int kernel, int sample) const {
    return counter_uniform_open(mix_key(seed, epoch), observation,
                                static_cast<std::uint64_t>(kernel),
                                static_cast<std::uint64_t>(sample));
}

McEstimate choice_prob_mc(const ChoiceObservation& obs, const UtilityParams& up,
                          const DerivedKernels& dk, int sample_count,
                          const McRngStream& stream) {
    if (sample_count < 1)
        throw std::invalid_argument("choice_prob_mc: need at least one sample");
    const int K = static_cast<int>(dk.weights.size());
    const int S = sample_count;

    const double v_chosen = utility(up, obs.user, obs.chosen);
    std::vector<double> gaps;
    gaps.reserve(obs.choice_set.size());
    for (ItemId j : obs.choice_set)
        if (j != obs.chosen) gaps.push_back(v_chosen - utility(up, obs.user, j));

    McEstimate est;
    est.per_sample.assign(S, 0.0);
    est.draws.resize(static_cast<std::size_t>(K) * S);
    est.logits.resize(static_cast<std::size_t>(K) * S);
    for (int k = 0; k < K; ++k) {
        for (int s = 0; s < S; ++s) {
            const double u = stream.draw(k, s);
            const double logit = std::log(u / (1.0 - u));
            const double e = dk.design_points[k] + dk.bandwidths[k] * logit;
            est.draws[static_cast<std::size_t>(k) * S + s] = e;
            est.logits[static_cast<std::size_t>(k) * S + s] = logit;
            double q = 1.0;
            for (double g : gaps) q *= kernel_cdf(dk, g + e);
            est.per_sample[s] += dk.weights[k] * q;
        }
    }
    double sum = 0.0;
    for (double p : est.per_sample) sum += p;
    est.mean = sum / S;
    return est;
}

namespace {

struct NllTerm {
    double value = 0.0;
    bool floored = false;
};

NllTerm corrected_term(std::span<const double> p) {
    const int S = static_cast<int>(p.size());
    double mean = 0.0;
    for (double v : p) mean += v;
    mean /= S;
    NllTerm t;
    double pf = mean;
    if (pf < kProbFloor) {
        pf = kProbFloor;
        t.floored = true;
    }
    double a = 0.0, b = 0.0;
    for (double v : p) {
        const double d = v - mean;
        a += d * d;
        b += d * d * d;
    }
    // Third-order Taylor correction of log of a Monte-Carlo mean: the
    // variance term is subtracted from the NLL and the skewness term added,
    // cancelling the Jensen bias of -log P-hat.
    t.value = -std::log(pf) - a / (2.0 * S * (S - 1) * pf * pf) +
              b / (3.0 * S * (S - 1) * (S - 2) * pf * pf * pf);
    return t;
}

// dL/dp_s of corrected_term; exactness is checked against finite differences
// in the test suite.
void corrected_term_grad(std::span<const double> p, std::vector<double>& out) {
    const int S = static_cast<int>(p.size());
    double mean = 0.0;
    for (double v : p) mean += v;
    mean /= S;
    double pf = std::max(mean, kProbFloor);
    double a = 0.0, b = 0.0;
    for (double v : p) {
        const double d = v - mean;
        a += d * d;
        b += d * d * d;
    }
    const double s1 = static_cast<double>(S) * (S - 1);
    const double s2 = s1 * (S - 2);
    const double pf2 = pf * pf, pf3 = pf2 * pf, pf4 = pf3 * pf;
    out.resize(S);
    for (int s = 0; s < S; ++s) {
        const double d = p[s] - mean;
        out[s] = -1.0 / (S * pf) - d / (s1 * pf2) + a / (S * s1 * pf3) +
                 d * d / (s2 * pf3) - a / (S * s2 * pf3) - b / (S * s2 * pf4);
    }
}

}  // namespace

NllResult nll_corrected(std::span<const McEstimate> estimates) {
    NllResult res;
    for (const auto& est : estimates) {
        if (est.per_sample.size() < 3)
            throw std::invalid_argument(
                "nll_corrected: the third-order correction needs S >= 3");
        const NllTerm t = corrected_term(est.per_sample);
        res.value += t.value;
        res.floored += t.floored ? 1 : 0;
    }
    return res;
}

void GradientSet::accumulate(const GradientSet& other) {
    if (d_alphas.size() < other.d_alphas.size()) d_alphas.resize(other.d_alphas.size());
    if (d_betas.size() < other.d_betas.size()) d_betas.resize(other.d_betas.size());
    for (std::size_t k = 0; k < other.d_alphas.size(); ++k)
        d_alphas[k] += other.d_alphas[k];
    for (std::size_t k = 0; k < other.d_betas.size(); ++k) d_betas[k] += other.d_betas[k];
    d_lambda += other.d_lambda;
    for (const auto& [id, g] : other.d_user_embeddings) {
        auto& dst = d_user_embeddings[id];
        if (dst.size() < g.size()) dst.resize(g.size(), 0.0);
        for (std::size_t d = 0; d < g.size(); ++d) dst[d] += g[d];
    }
    for (const auto& [id, g] : other.d_item_embeddings) {
        auto& dst = d_item_embeddings[id];
        if (dst.size() < g.size()) dst.resize(g.size(), 0.0);
        for (std::size_t d = 0; d < g.size(); ++d) dst[d] += g[d];
    }
    for (const auto& [id, g] : other.d_item_constants) d_item_constants[id] += g;
}

void GradientSet::scale(double factor) {
    for (double& g : d_alphas) g *= factor;
    for (double& g : d_betas) g *= factor;
    d_lambda *= factor;
    for (auto& [id, g] : d_user_embeddings)
        for (double& v : g) v *= factor;
    for (auto& [id, g] : d_item_embeddings)
        for (double& v : g) v *= factor;
    for (auto& [id, g] : d_item_constants) g *= factor;
}

void GradientSet::check_finite() const {
    auto bad = [](double v) { return !std::isfinite(v); };
    for (std::size_t k = 0; k < d_alphas.size(); ++k)
        if (bad(d_alphas[k]))
            throw std::runtime_error("non-finite gradient for alpha[" +
                                     std::to_string(k) + "]");
    for (std::size_t k = 0; k < d_betas.size(); ++k)
        if (bad(d_betas[k]))
            throw std::runtime_error("non-finite gradient for beta[" +
                                     std::to_string(k) + "]");
    if (bad(d_lambda)) throw std::runtime_error("non-finite gradient for lambda");
    for (const auto& [id, g] : d_user_embeddings)
        for (double v : g)
            if (bad(v))
                throw std::runtime_error("non-finite gradient for user embedding " +
                                         std::to_string(id));
    for (const auto& [id, g] : d_item_embeddings)
        for (double v : g)
            if (bad(v))
                throw std::runtime_error("non-finite gradient for item embedding " +
                                         std::to_string(id));
    for (const auto& [id, g] : d_item_constants)
        if (bad(g))
            throw std::runtime_error("non-finite gradient for item constant " +
                                     std::to_string(id));
}

namespace {

// Forward and backward pass for one observation. Scratch buffers are owned by
// the caller and reused across observations.
struct ObsScratch {
    std::vector<double> gaps;
    std::vector<ItemId> competitors;
    std::vector<double> per_sample;
    std::vector<double> dscale;
    std::vector<double> t_vals;    // [(k*S+s)*M + m]
    std::vector<double> sig;       // [((k*S+s)*M + m)*K + r]
    std::vector<double> f_vals;    // [(k*S+s)*M + m]
    std::vector<double> draws;     // [k*S+s]
    std::vector<double> logits;    // [k*S+s]
    std::vector<double> excl;      // prefix/suffix product workspace, size M
    std::vector<double> dv;        // per set-item utility gradient
    std::vector<double> dw, dh, dx;
};

NllTerm process_observation(const ChoiceObservation& obs, const UtilityParams& up,
                            const KernelCdfParams& raw, const DerivedKernels& dk,
                            const McConfig& cfg, std::uint64_t obs_stream_id,
                            GradientSet& grads, ObsScratch& sc) {
    const int K = static_cast<int>(dk.weights.size());
    const int S = cfg.sample_count;
    const McRngStream stream{cfg.seed, cfg.epoch, obs_stream_id};

    const double v_chosen = utility(up, obs.user, obs.chosen);
    sc.gaps.clear();
    sc.competitors.clear();
    for (ItemId j : obs.choice_set) {
        if (j == obs.chosen) continue;
        sc.gaps.push_back(v_chosen - utility(up, obs.user, j));
        sc.competitors.push_back(j);
    }
    const int M = static_cast<int>(sc.gaps.size());

    sc.per_sample.assign(S, 0.0);
    sc.t_vals.resize(static_cast<std::size_t>(K) * S * M);
    sc.f_vals.resize(static_cast<std::size_t>(K) * S * M);
    sc.sig.resize(static_cast<std::size_t>(K) * S * M * K);
    sc.draws.resize(static_cast<std::size_t>(K) * S);
    sc.logits.resize(static_cast<std::size_t>(K) * S);

    // Forward: per_sample[s] = sum_k w_k prod_m F(gap_m + e_ks).
    for (int k = 0; k < K; ++k) {
        for (int s = 0; s < S; ++s) {
            const std::size_t ks = static_cast<std::size_t>(k) * S + s;
            const double u = stream.draw(k, s);
            const double logit = std::log(u / (1.0 - u));
            const double e = dk.design_points[k] + dk.bandwidths[k] * logit;
            sc.draws[ks] = e;
            sc.logits[ks] = logit;
            double q = 1.0;
            for (int m = 0; m < M; ++m) {
                const double t = sc.gaps[m] + e;
                const std::size_t ksm = ks * M + m;
                sc.t_vals[ksm] = t;
                double f = 0.0;
                for (int r = 0; r < K; ++r) {
                    const double sg =
                        sigmoid((t - dk.design_points[r]) / dk.bandwidths[r]);
                    sc.sig[ksm * K + r] = sg;
                    f += dk.weights[r] * sg;
                }
                sc.f_vals[ksm] = f;
                q *= f;
            }
            sc.per_sample[s] += dk.weights[k] * q;
        }
    }

    const NllTerm term = corrected_term(sc.per_sample);
    corrected_term_grad(sc.per_sample, sc.dscale);

    // Backward.
    sc.dw.assign(K, 0.0);
    sc.dh.assign(K, 0.0);
    sc.dx.assign(K, 0.0);
    sc.dv.assign(obs.choice_set.size(), 0.0);
    double dv_chosen = 0.0;
    sc.excl.resize(M);

    for (int k = 0; k < K; ++k) {
        for (int s = 0; s < S; ++s) {
            const std::size_t ks = static_cast<std::size_t>(k) * S + s;
            const double g = sc.dscale[s];
            // Exclusion products prod_{m' != m} F_{m'} via prefix/suffix.
            double q = 1.0;
            for (int m = 0; m < M; ++m) {
                sc.excl[m] = q;  // prefix
                q *= sc.f_vals[ks * M + m];
            }
            sc.dw[k] += g * q;  // direct mixture-weight term
            double suffix = 1.0;
            for (int m = M - 1; m >= 0; --m) {
                sc.excl[m] *= suffix;
                suffix *= sc.f_vals[ks * M + m];
            }
            double de = 0.0;
            for (int m = 0; m < M; ++m) {
                const std::size_t ksm = ks * M + m;
                const double common = g * dk.weights[k] * sc.excl[m];
                double rho = 0.0;
                for (int r = 0; r < K; ++r) {
                    const double sg = sc.sig[ksm * K + r];
                    const double sp = sg * (1.0 - sg);
                    const double z =
                        (sc.t_vals[ksm] - dk.design_points[r]) / dk.bandwidths[r];
                    rho += dk.weights[r] / dk.bandwidths[r] * sp;
                    sc.dw[r] += common * sg;
                    sc.dx[r] += common * dk.weights[r] * sp * (-1.0 / dk.bandwidths[r]);
                    sc.dh[r] +=
                        common * dk.weights[r] * sp * (-z / dk.bandwidths[r]);
                }
                const double b = common * rho;  // d per_sample / d t_m (scaled)
                dv_chosen += b;
                de += b;
                // position of competitor m inside the choice set
                int pos = 0;
                for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
                    if (obs.choice_set[c] == sc.competitors[m]) {
                        pos = static_cast<int>(c);
                        break;
                    }
                }
                sc.dv[pos] -= b;
            }
            // Reparameterized draw path: e = x_k + h_k * logit(u).
            sc.dx[k] += de;
            sc.dh[k] += de * sc.logits[ks];
        }
    }

    // Chosen item's slot in dv.
    for (std::size_t c = 0; c < obs.choice_set.size(); ++c)
        if (obs.choice_set[c] == obs.chosen) sc.dv[c] += dv_chosen;

    // Chain into raw kernel parameters.
    if (grads.d_alphas.size() != static_cast<std::size_t>(K)) {
        grads.d_alphas.assign(K, 0.0);
        grads.d_betas.assign(K, 0.0);
    }
    derive_backward(raw, dk, sc.dw, sc.dh, sc.dx, 0.0, grads.d_alphas, grads.d_betas,
                    grads.d_lambda);

    // Chain into embeddings: dV_ij/du_i = v_j, dV_ij/dv_j = u_i, dV_ij/dc_j = 1.
    const auto u_emb = up.user_embedding(obs.user);
    auto& du = grads.d_user_embeddings[obs.user];
    if (du.size() != u_emb.size()) du.resize(u_emb.size(), 0.0);
    for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
        const double dv = sc.dv[c];
        if (dv == 0.0) continue;
        const ItemId j = obs.choice_set[c];
        const auto v_emb = up.item_embedding(j);
        auto& dvj = grads.d_item_embeddings[j];
        if (dvj.size() != v_emb.size()) dvj.resize(v_emb.size(), 0.0);
        for (std::size_t d = 0; d < v_emb.size(); ++d) {
            du[d] += dv * v_emb[d];
            dvj[d] += dv * u_emb[d];
        }
        grads.d_item_constants[j] += dv;
    }
    return term;
}

}  // namespace

LossAndGradients loss_and_gradients(std::span<const ChoiceObservation> batch,
                                    const UtilityParams& up, const KernelCdfParams& raw,
                                    const McConfig& cfg) {
    if (cfg.sample_count < 3)
        throw std::invalid_argument(
            "loss_and_gradients: the corrected NLL needs S >= 3");
    const DerivedKernels dk = derive(raw);
    const int K = raw.kernel_count();

    const std::size_t chunk = static_cast<std::size_t>(std::max(cfg.chunk_size, 1));
    const std::size_t n_chunks = batch.empty() ? 0 : (batch.size() + chunk - 1) / chunk;
    std::vector<LossAndGradients> partial(n_chunks);

    for_each_chunk(batch.size(), chunk, cfg.threads,
                   [&](std::size_t ci, std::size_t begin, std::size_t end) {
                       ObsScratch sc;
                       LossAndGradients& out = partial[ci];
                       out.gradients.d_alphas.assign(K, 0.0);
                       out.gradients.d_betas.assign(K, 0.0);
                       for (std::size_t n = begin; n < end; ++n) {
                           const NllTerm t = process_observation(
                               batch[n], up, raw, dk, cfg,
                               cfg.observation_base + n, out.gradients, sc);
                           out.loss += t.value;
                           out.floored += t.floored ? 1 : 0;
                       }
                   });

    LossAndGradients total;
    total.gradients.d_alphas.assign(K, 0.0);
    total.gradients.d_betas.assign(K, 0.0);
    for (auto& p : partial) {
        total.loss += p.loss;
        total.floored += p.floored;
        total.gradients.accumulate(p.gradients);
    }
    total.gradients.check_finite();
    return total;
}

}  // namespace lcm
