#include "lcm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lcm/rng.hpp"

namespace lcm {

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::LCM4Rec: return "lcm4rec";
        case ModelKind::MNL: return "mnl";
        case ModelKind::ENL: return "enl";
        case ModelKind::BL: return "bl";
        case ModelKind::BCE: return "bce";
        case ModelKind::GBCE: return "gbce";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "lcm4rec") return ModelKind::LCM4Rec;
    if (name == "mnl") return ModelKind::MNL;
    if (name == "enl") return ModelKind::ENL;
    if (name == "bl") return ModelKind::BL;
    if (name == "bce") return ModelKind::BCE;
    if (name == "gbce") return ModelKind::GBCE;
    throw std::invalid_argument("unknown model kind: " + name);
}

std::string to_string(OptimizerKind kind) {
    return kind == OptimizerKind::SGD ? "sgd" : "adam";
}

OptimizerKind optimizer_kind_from_string(const std::string& name) {
    if (name == "sgd") return OptimizerKind::SGD;
    if (name == "adam") return OptimizerKind::Adam;
    throw std::invalid_argument("unknown optimizer: " + name);
}

void TrainConfig::check() const {
    if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
    if (batch_size < 1 || max_epochs < 1 || patience < 0)
        throw std::invalid_argument("batch_size/max_epochs/patience invalid");
    if (n_users < 1 || n_items < 1)
        throw std::invalid_argument("n_users/n_items must be set");
    if (embedding_dim < 1) throw std::invalid_argument("embedding_dim must be >= 1");
    if (model_kind == ModelKind::LCM4Rec) {
        if (sample_count < 3)
            throw std::invalid_argument("LCM4Rec needs S >= 3 for the corrected NLL");
        if (kernel_count < 1) throw std::invalid_argument("kernel_count must be >= 1");
    }
}

void project(UtilityParams& params, KernelCdfParams* kernel, ModelKind kind) {
    if (kind != ModelKind::LCM4Rec) return;
    auto& c = params.item_constants();
    if (!c.empty()) {
        const auto [mn, mx] = std::minmax_element(c.begin(), c.end());
        const double lo = *mn, hi = *mx;
        if (hi - lo < 1e-300) {
            std::fill(c.begin(), c.end(), 0.5);
        } else {
            for (double& x : c) x = (x - lo) / (hi - lo);
        }
    }
    if (kernel != nullptr) clamp_raw(*kernel);
}

namespace {

struct ParamSlab {
    double* data;
    std::size_t size;
};

// Dense first-moment/second-moment state over all slabs; plain SGD ignores it.
struct Optimizer {
    OptimizerKind kind = OptimizerKind::Adam;
    double lr = 0.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step_count = 0;
    std::vector<std::vector<double>> m, v;

    void init(const std::vector<ParamSlab>& slabs) {
        m.resize(slabs.size());
        v.resize(slabs.size());
        for (std::size_t i = 0; i < slabs.size(); ++i) {
            m[i].assign(slabs[i].size, 0.0);
            v[i].assign(slabs[i].size, 0.0);
        }
    }

    void step(const std::vector<ParamSlab>& slabs,
              const std::vector<std::vector<double>>& grads) {
        ++step_count;
        if (kind == OptimizerKind::SGD) {
            for (std::size_t i = 0; i < slabs.size(); ++i)
                for (std::size_t p = 0; p < slabs[i].size; ++p)
                    slabs[i].data[p] -= lr * grads[i][p];
            return;
        }
        const double c1 = 1.0 - std::pow(beta1, step_count);
        const double c2 = 1.0 - std::pow(beta2, step_count);
        for (std::size_t i = 0; i < slabs.size(); ++i) {
            for (std::size_t p = 0; p < slabs[i].size; ++p) {
                const double g = grads[i][p];
                m[i][p] = beta1 * m[i][p] + (1.0 - beta1) * g;
                v[i][p] = beta2 * v[i][p] + (1.0 - beta2) * g * g;
                slabs[i].data[p] -=
                    lr * (m[i][p] / c1) / (std::sqrt(v[i][p] / c2) + eps);
            }
        }
    }
};

struct ModelState {
    UtilityParams utility;
    KernelCdfParams kernel;
    bool has_kernel = false;
};

// slab order: user embeddings, item embeddings, item constants[, alphas,
// betas, lambda]
std::vector<ParamSlab> slabs_of(ModelState& st) {
    std::vector<ParamSlab> s{
        {st.utility.user_embeddings_flat().data(), st.utility.user_embeddings_flat().size()},
        {st.utility.item_embeddings_flat().data(), st.utility.item_embeddings_flat().size()},
        {st.utility.item_constants().data(), st.utility.item_constants().size()}};
    if (st.has_kernel) {
        s.push_back({st.kernel.alphas.data(), st.kernel.alphas.size()});
        s.push_back({st.kernel.betas.data(), st.kernel.betas.size()});
        s.push_back({&st.kernel.lambda, 1});
    }
    return s;
}

ModelState init_state(const TrainConfig& cfg) {
    ModelState st;
    st.utility = UtilityParams(cfg.n_users, cfg.n_items, cfg.embedding_dim);
    Rng rng(mix_key(cfg.seed, 0x1217));
    for (double& x : st.utility.user_embeddings_flat()) x = rng.uniform(-0.1, 0.1);
    for (double& x : st.utility.item_embeddings_flat()) x = rng.uniform(-0.1, 0.1);
    std::fill(st.utility.item_constants().begin(), st.utility.item_constants().end(),
              0.5);
    if (cfg.model_kind == ModelKind::LCM4Rec) {
        st.has_kernel = true;
        st.kernel.alphas.assign(cfg.kernel_count, 0.0);
        st.kernel.betas.assign(cfg.kernel_count, 0.0);
        st.kernel.lambda = softplus_inverse(2.0);
    }
    return st;
}

// Per-batch loss plus dense gradients of the mean loss. grads layout matches
// slabs_of().
double batch_loss_and_grads(std::span<const ChoiceObservation> batch,
                            std::span<const std::size_t> index,
                            std::size_t begin, std::size_t end, ModelState& st,
                            const TrainConfig& cfg, std::uint64_t epoch,
                            std::vector<std::vector<double>>& grads) {
    const std::size_t n = end - begin;
    const double inv_n = 1.0 / static_cast<double>(n);
    const int dim = cfg.embedding_dim;
    double loss = 0.0;

    auto add_dv = [&](UserId u, ItemId j, double dv) {
        const auto ue = st.utility.user_embedding(u);
        const auto ve = st.utility.item_embedding(j);
        for (int d = 0; d < dim; ++d) {
            grads[0][static_cast<std::size_t>(u) * dim + d] += dv * ve[d] * inv_n;
            grads[1][static_cast<std::size_t>(j) * dim + d] += dv * ue[d] * inv_n;
        }
        grads[2][static_cast<std::size_t>(j)] += dv * inv_n;
    };

    if (cfg.model_kind == ModelKind::LCM4Rec) {
        std::vector<ChoiceObservation> obs_batch;
        obs_batch.reserve(n);
        for (std::size_t i = begin; i < end; ++i) obs_batch.push_back(batch[index[i]]);
        McConfig mc;
        mc.sample_count = cfg.sample_count;
        mc.seed = cfg.seed;
        mc.epoch = cfg.frozen_draws ? 0 : epoch;
        mc.observation_base = begin;
        mc.threads = cfg.threads;
        LossAndGradients res =
            loss_and_gradients(obs_batch, st.utility, st.kernel, mc);
        loss = res.loss * inv_n;
        res.gradients.scale(inv_n);
        for (const auto& [u, g] : res.gradients.d_user_embeddings)
            for (int d = 0; d < dim; ++d)
                grads[0][static_cast<std::size_t>(u) * dim + d] += g[d];
        for (const auto& [j, g] : res.gradients.d_item_embeddings)
            for (int d = 0; d < dim; ++d)
                grads[1][static_cast<std::size_t>(j) * dim + d] += g[d];
        for (const auto& [j, g] : res.gradients.d_item_constants)
            grads[2][static_cast<std::size_t>(j)] += g;
        for (int k = 0; k < cfg.kernel_count; ++k) {
            grads[3][k] += res.gradients.d_alphas[k];
            grads[4][k] += res.gradients.d_betas[k];
        }
        grads[5][0] += res.gradients.d_lambda;
        return loss;
    }

    std::vector<double> utils;
    for (std::size_t i = begin; i < end; ++i) {
        const ChoiceObservation& obs = batch[index[i]];
        utils.clear();
        std::size_t chosen_pos = 0;
        for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
            utils.push_back(utility(st.utility, obs.user, obs.choice_set[c]));
            if (obs.choice_set[c] == obs.chosen) chosen_pos = c;
        }
        switch (cfg.model_kind) {
            case ModelKind::MNL: {
                Simplex p = mnl_probs(utils);
                loss += -std::log(std::max(p[chosen_pos], 1e-300)) * inv_n;
                for (std::size_t c = 0; c < utils.size(); ++c)
                    add_dv(obs.user, obs.choice_set[c],
                           p[c] - (c == chosen_pos ? 1.0 : 0.0));
                break;
            }
            case ModelKind::ENL: {
                Simplex p = enl_probs(utils, 1.0);
                auto g = enl_prob_gradients(utils, 1.0);
                const double pc = std::max(p[chosen_pos], 1e-300);
                loss += -std::log(pc) * inv_n;
                for (std::size_t c = 0; c < utils.size(); ++c)
                    add_dv(obs.user, obs.choice_set[c], -g[chosen_pos][c] / pc);
                break;
            }
            case ModelKind::BL: {
                for (std::size_t c = 0; c < utils.size(); ++c) {
                    const double s = sigmoid(utils[c]);
                    if (c == chosen_pos) {
                        loss += -std::log(std::max(s, 1e-300)) * inv_n;
                        add_dv(obs.user, obs.choice_set[c], s - 1.0);
                    } else {
                        loss += -std::log(std::max(1.0 - s, 1e-300)) * inv_n;
                        add_dv(obs.user, obs.choice_set[c], s);
                    }
                }
                break;
            }
            case ModelKind::BCE:
            case ModelKind::GBCE: {
                double pos_power = 1.0;
                if (cfg.model_kind == ModelKind::GBCE) {
                    const double alpha =
                        static_cast<double>(cfg.negatives_per_positive) /
                        static_cast<double>(cfg.n_items - 1);
                    pos_power =
                        alpha * (cfg.gbce_t * (1.0 - 1.0 / alpha) + 1.0 / alpha);
                }
                const double s = sigmoid(utils[chosen_pos]);
                loss += -pos_power * std::log(std::max(s, 1e-300)) * inv_n;
                add_dv(obs.user, obs.chosen, pos_power * (s - 1.0));
                for (int neg = 0; neg < cfg.negatives_per_positive; ++neg) {
                    const std::uint64_t key =
                        mix_key(cfg.seed, epoch, index[i],
                                static_cast<std::uint64_t>(neg) + 1);
                    ItemId j = static_cast<ItemId>(
                        key % static_cast<std::uint64_t>(cfg.n_items - 1));
                    if (j >= obs.chosen) ++j;
                    const double sn = sigmoid(utility(st.utility, obs.user, j));
                    loss += -std::log(std::max(1.0 - sn, 1e-300)) * inv_n;
                    add_dv(obs.user, j, sn);
                }
                break;
            }
            case ModelKind::LCM4Rec: break;  // handled above
        }
    }
    return loss;
}

// Zero raw-kernel gradient components that push against an active bound.
void zero_outward_gradients(const ModelState& st, std::vector<std::vector<double>>& g) {
    for (std::size_t k = 0; k < st.kernel.betas.size(); ++k) {
        if (st.kernel.betas[k] >= kBetaUpper && g[4][k] < 0.0) g[4][k] = 0.0;
        if (st.kernel.betas[k] <= kBetaLower && g[4][k] > 0.0) g[4][k] = 0.0;
    }
    if (st.kernel.lambda >= kLambdaUpper && g[5][0] < 0.0) g[5][0] = 0.0;
    if (st.kernel.lambda <= kLambdaLower && g[5][0] > 0.0) g[5][0] = 0.0;
}

}  // namespace

double validation_nll(const FittedModel& model,
                      std::span<const ChoiceObservation> val_set) {
    if (val_set.empty()) throw std::invalid_argument("validation set is empty");
    const TrainConfig& cfg = model.config;
    double total = 0.0;
    if (model.model_kind == ModelKind::LCM4Rec) {
        const DerivedKernels dk = derive(*model.kernel);
        std::vector<McEstimate> ests;
        ests.reserve(val_set.size());
        for (std::size_t i = 0; i < val_set.size(); ++i)
            ests.push_back(choice_prob_mc(
                val_set[i], model.utility, dk, cfg.validation_sample_count,
                {mix_key(cfg.seed, 0x7A1), 0, i}));
        return nll_corrected(ests).value / static_cast<double>(val_set.size());
    }
    std::vector<double> utils;
    for (std::size_t i = 0; i < val_set.size(); ++i) {
        const auto& obs = val_set[i];
        utils.clear();
        std::size_t chosen_pos = 0;
        for (std::size_t c = 0; c < obs.choice_set.size(); ++c) {
            utils.push_back(utility(model.utility, obs.user, obs.choice_set[c]));
            if (obs.choice_set[c] == obs.chosen) chosen_pos = c;
        }
        switch (model.model_kind) {
            case ModelKind::MNL:
                total += -std::log(std::max(mnl_probs(utils)[chosen_pos], 1e-300));
                break;
            case ModelKind::ENL:
                total += -std::log(std::max(enl_probs(utils, 1.0)[chosen_pos], 1e-300));
                break;
            case ModelKind::BL: {
                double t = 0.0;
                for (std::size_t c = 0; c < utils.size(); ++c) {
                    const double s = sigmoid(utils[c]);
                    t += c == chosen_pos ? -std::log(std::max(s, 1e-300))
                                         : -std::log(std::max(1.0 - s, 1e-300));
                }
                total += t / static_cast<double>(utils.size());
                break;
            }
            case ModelKind::BCE:
            case ModelKind::GBCE: {
                double pos_power = 1.0;
                if (model.model_kind == ModelKind::GBCE) {
                    const double alpha =
                        static_cast<double>(cfg.negatives_per_positive) /
                        static_cast<double>(cfg.n_items - 1);
                    pos_power =
                        alpha * (cfg.gbce_t * (1.0 - 1.0 / alpha) + 1.0 / alpha);
                }
                double t = -pos_power *
                           std::log(std::max(sigmoid(utils[chosen_pos]), 1e-300));
                for (int neg = 0; neg < cfg.negatives_per_positive; ++neg) {
                    const std::uint64_t key = mix_key(cfg.seed, 0xE7A1, i,
                                                      static_cast<std::uint64_t>(neg));
                    ItemId j = static_cast<ItemId>(
                        key % static_cast<std::uint64_t>(cfg.n_items - 1));
                    if (j >= obs.chosen) ++j;
                    t += -std::log(std::max(
                        1.0 - sigmoid(utility(model.utility, obs.user, j)), 1e-300));
                }
                total += t / static_cast<double>(1 + cfg.negatives_per_positive);
                break;
            }
            case ModelKind::LCM4Rec: break;
        }
    }
    return total / static_cast<double>(val_set.size());
}

FittedModel train(std::span<const ChoiceObservation> train_set,
                  std::span<const ChoiceObservation> val_set, const TrainConfig& cfg) {
    cfg.check();
    if (train_set.empty() || val_set.empty())
        throw std::invalid_argument("train: train/validation sets must be nonempty");

    ModelState st = init_state(cfg);
    auto slabs = slabs_of(st);
    Optimizer opt;
    opt.kind = cfg.optimizer;
    opt.lr = cfg.learning_rate;
    opt.init(slabs);

    std::vector<std::vector<double>> grads(slabs.size());
    for (std::size_t i = 0; i < slabs.size(); ++i) grads[i].assign(slabs[i].size, 0.0);

    FittedModel out;
    out.model_kind = cfg.model_kind;
    out.config = cfg;

    std::vector<std::size_t> index(train_set.size());
    for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;

    ModelState best = st;
    double best_val = std::numeric_limits<double>::infinity();
    int bad_epochs = 0;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        // Fisher-Yates over the identity permutation, so each epoch's batch
        // order is a pure function of (seed, epoch). Frozen-draw debugging
        // mode freezes the order along with the draws.
        const std::uint64_t shuffle_epoch =
            cfg.frozen_draws ? 0 : static_cast<std::uint64_t>(epoch);
        for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
        Rng shuffle_rng(mix_key(cfg.seed, 0x5F, shuffle_epoch));
        for (std::size_t i = index.size() - 1; i > 0; --i) {
            const std::size_t k = shuffle_rng.uniform_index(i + 1);
            std::swap(index[i], index[k]);
        }

        double epoch_loss = 0.0;
        for (std::size_t begin = 0; begin < index.size();
             begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(index.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            for (auto& g : grads) std::fill(g.begin(), g.end(), 0.0);
            const double loss = batch_loss_and_grads(
                train_set, index, begin, end, st, cfg,
                static_cast<std::uint64_t>(epoch), grads);
            if (!std::isfinite(loss))
                throw std::runtime_error("train: loss diverged (non-finite) at epoch " +
                                         std::to_string(epoch));
            epoch_loss += loss * static_cast<double>(end - begin);
            if (st.has_kernel) zero_outward_gradients(st, grads);
            opt.step(slabs, grads);
            project(st.utility, st.has_kernel ? &st.kernel : nullptr, cfg.model_kind);
        }
        epoch_loss /= static_cast<double>(index.size());

        FittedModel probe;
        probe.model_kind = cfg.model_kind;
        probe.utility = st.utility;
        if (st.has_kernel) probe.kernel = st.kernel;
        probe.config = cfg;
        const double val_nll = validation_nll(probe, val_set);
        out.history.push_back({epoch_loss, val_nll});

        if (val_nll < best_val - 1e-12) {
            best_val = val_nll;
            best = st;
            out.best_epoch = epoch;
            bad_epochs = 0;
        } else {
            ++bad_epochs;
            if (bad_epochs > cfg.patience) break;
        }
    }

    out.utility = std::move(best.utility);
    if (best.has_kernel) out.kernel = best.kernel;
    return out;
}

std::vector<double> default_learning_rate_grid() {
    return {0.1, 0.03, 0.01, 0.003, 0.001};
}

GridSearchResult grid_search(std::span<const ChoiceObservation> train_set,
                             std::span<const ChoiceObservation> val_set,
                             const TrainConfig& base) {
    GridSearchResult res;
    res.best_validation_nll = std::numeric_limits<double>::infinity();
    for (OptimizerKind opt : {OptimizerKind::SGD, OptimizerKind::Adam}) {
        for (double lr : default_learning_rate_grid()) {
            TrainConfig cfg = base;
            cfg.optimizer = opt;
            cfg.learning_rate = lr;
            FittedModel m = train(train_set, val_set, cfg);
            const double v = validation_nll(m, val_set);
            res.tried.emplace_back(cfg, v);
            if (v < res.best_validation_nll) {
                res.best_validation_nll = v;
                res.best = cfg;
            }
        }
    }
    return res;
}

}  // namespace lcm
