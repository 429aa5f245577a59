#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lcm/rng.hpp"
#include "lcm/simulator.hpp"
#include "lcm/trainer.hpp"

using namespace lcm;

namespace {

// Two items, one user: observations under Gumbel(0,1) noise with a true
// utility gap. The MNL MLE of the gap has a 1-D closed form via Newton on the
// logistic log-likelihood.
std::vector<ChoiceObservation> binary_choices(double gap, int n, std::uint64_t seed) {
    std::vector<ChoiceObservation> out;
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const double u0 = gap + rng.gumbel(0, 1);
        const double u1 = rng.gumbel(0, 1);
        ChoiceObservation obs;
        obs.user = 0;
        obs.choice_set = {0, 1};
        obs.chosen = u0 > u1 ? 0 : 1;
        out.push_back(obs);
    }
    return out;
}

double logistic_mle_gap(const std::vector<ChoiceObservation>& data) {
    int wins = 0;
    for (const auto& obs : data) wins += obs.chosen == 0 ? 1 : 0;
    const double p = static_cast<double>(wins) / static_cast<double>(data.size());
    return std::log(p / (1.0 - p));
}

}  // namespace

TEST_CASE("project: affine rescaling of item constants") {
    SUBCASE("already spanning [0,1] is unchanged") {
        UtilityParams p(1, 3, 1);
        p.item_constants() = {0.0, 0.5, 1.0};
        project(p, nullptr, ModelKind::LCM4Rec);
        CHECK(p.item_constants()[0] == doctest::Approx(0.0));
        CHECK(p.item_constants()[1] == doctest::Approx(0.5));
        CHECK(p.item_constants()[2] == doctest::Approx(1.0));
    }
    SUBCASE("min-max normalization") {
        UtilityParams p(1, 2, 1);
        p.item_constants() = {2.0, 4.0};
        project(p, nullptr, ModelKind::LCM4Rec);
        CHECK(p.item_constants()[0] == doctest::Approx(0.0));
        CHECK(p.item_constants()[1] == doctest::Approx(1.0));
    }
    SUBCASE("idempotence") {
        UtilityParams p(1, 4, 1);
        p.item_constants() = {-3.0, 0.7, 2.2, 9.0};
        project(p, nullptr, ModelKind::LCM4Rec);
        auto once = p.item_constants();
        project(p, nullptr, ModelKind::LCM4Rec);
        for (std::size_t j = 0; j < once.size(); ++j)
            CHECK(p.item_constants()[j] == doctest::Approx(once[j]).epsilon(1e-15));
    }
    SUBCASE("all-equal constants map to one half") {
        UtilityParams p(1, 3, 1);
        p.item_constants() = {4.2, 4.2, 4.2};
        project(p, nullptr, ModelKind::LCM4Rec);
        for (double c : p.item_constants()) CHECK(c == doctest::Approx(0.5));
    }
    SUBCASE("non-LCM4Rec models are untouched") {
        UtilityParams p(1, 2, 1);
        p.item_constants() = {2.0, 4.0};
        project(p, nullptr, ModelKind::MNL);
        CHECK(p.item_constants()[0] == doctest::Approx(2.0));
    }
    SUBCASE("kernel bounds are clamped") {
        UtilityParams p(1, 2, 1);
        KernelCdfParams raw{{0.0}, {9.0}, 42.0};
        project(p, &raw, ModelKind::LCM4Rec);
        CHECK(raw.betas[0] == kBetaUpper);
        CHECK(raw.lambda == kLambdaUpper);
    }
}

TEST_CASE("project preserves constant-utility orderings (frozen embeddings)") {
    // with zero embeddings the utilities are the constants; a positive affine
    // map keeps every pairwise difference sign
    UtilityParams p(2, 5, 2);
    p.item_constants() = {3.0, -1.0, 0.25, 7.5, 0.26};
    std::vector<double> before = p.item_constants();
    project(p, nullptr, ModelKind::LCM4Rec);
    const auto& after = p.item_constants();
    for (std::size_t a = 0; a < before.size(); ++a)
        for (std::size_t b = 0; b < before.size(); ++b)
            if (before[a] != before[b])
                CHECK(std::signbit(before[a] - before[b]) ==
                      std::signbit(after[a] - after[b]));
}

TEST_CASE("MNL training recovers the binary logistic MLE") {
    const auto data = binary_choices(2.0, 200, 99);

    TrainConfig cfg;
    cfg.model_kind = ModelKind::MNL;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.embedding_dim = 1;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 400;
    cfg.patience = 40;
    cfg.batch_size = 64;
    cfg.seed = 3;
    // validating on the training data itself: the optimum is the train MLE
    const FittedModel m = train(data, data, cfg);

    const double gap = utility(m.utility, 0, 0) - utility(m.utility, 0, 1);
    CHECK(std::abs(gap - 2.0) < 0.3);
    CHECK(gap == doctest::Approx(logistic_mle_gap(data)).epsilon(0.05));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    const auto data = binary_choices(1.0, 50, 7);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::MNL;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.embedding_dim = 2;
    cfg.learning_rate = 0.0;
    cfg.max_epochs = 1;
    cfg.seed = 5;
    const FittedModel m = train(data, data, cfg);
    // re-initialize an identical model: same seed, untouched by training
    TrainConfig cfg2 = cfg;
    cfg2.max_epochs = 1;
    const FittedModel m2 = train(data, data, cfg2);
    for (std::size_t i = 0; i < m.utility.user_embeddings_flat().size(); ++i)
        CHECK(m.utility.user_embeddings_flat()[i] ==
              m2.utility.user_embeddings_flat()[i]);
}

TEST_CASE("early stopping returns the best validation epoch") {
    const auto data = binary_choices(1.5, 300, 11);
    const auto val = binary_choices(1.5, 100, 12);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::MNL;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.embedding_dim = 1;
    cfg.learning_rate = 0.1;
    cfg.max_epochs = 60;
    cfg.patience = 8;
    cfg.seed = 21;
    const FittedModel m = train(data, val, cfg);
    REQUIRE(m.best_epoch >= 0);
    const double returned = validation_nll(m, val);
    for (const auto& h : m.history) CHECK(returned <= h.validation_nll + 1e-9);
    CHECK(returned ==
          doctest::Approx(m.history[m.best_epoch].validation_nll).epsilon(1e-12));
}

TEST_CASE("training is deterministic per seed") {
    const auto data = binary_choices(1.0, 120, 31);
    const auto val = binary_choices(1.0, 40, 32);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::LCM4Rec;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.embedding_dim = 1;
    cfg.kernel_count = 3;
    cfg.sample_count = 4;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 6;
    cfg.patience = 6;
    cfg.seed = 1234;
    const FittedModel a = train(data, val, cfg);
    const FittedModel b = train(data, val, cfg);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
        CHECK(a.history[e].train_nll == b.history[e].train_nll);
        CHECK(a.history[e].validation_nll == b.history[e].validation_nll);
    }
    for (std::size_t i = 0; i < a.utility.item_constants().size(); ++i)
        CHECK(a.utility.item_constants()[i] == b.utility.item_constants()[i]);
}

TEST_CASE("LCM4Rec constants end up inside [0,1]") {
    const auto data = binary_choices(0.8, 150, 41);
    const auto val = binary_choices(0.8, 50, 42);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::LCM4Rec;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.embedding_dim = 1;
    cfg.kernel_count = 3;
    cfg.sample_count = 4;
    cfg.learning_rate = 0.05;
    cfg.max_epochs = 8;
    cfg.patience = 8;
    cfg.seed = 77;
    const FittedModel m = train(data, val, cfg);
    for (double c : m.utility.item_constants()) {
        CHECK(c >= 0.0);
        CHECK(c <= 1.0);
    }
    REQUIRE(m.kernel.has_value());
    for (double b : m.kernel->betas) {
        CHECK(b >= kBetaLower);
        CHECK(b <= kBetaUpper);
    }
    CHECK(m.kernel->lambda >= kLambdaLower);
    CHECK(m.kernel->lambda <= kLambdaUpper);
}

TEST_CASE("LCM4Rec recovers its own generating configuration's fit") {
    // simulate from a kernel-mixture error law, fit LCM4Rec, and compare its
    // validation NLL with the generating model's under the same evaluator
    const int n_users = 20, n_items = 20, dim = 3;
    const GroundTruth geo = gen_ground_truth(515, n_users, n_items, dim,
                                             ErrorDistribution::gumbel(0.0, 1.0));
    const UtilityParams& true_up = geo.params;
    KernelCdfParams true_raw{{0.3, -0.2, 0.1}, {0.4, 0.8, 0.2}, softplus_inverse(1.0)};
    const DerivedKernels true_dk = derive(true_raw);

    Rng rng(99);
    auto sample_noise = [&]() {
        double u = rng.uniform();
        int k = 2;
        for (int c = 0; c < 3; ++c) {
            if (u < true_dk.weights[c]) {
                k = c;
                break;
            }
            u -= true_dk.weights[c];
        }
        return kernel_sample(true_dk, k, rng.uniform_open());
    };

    std::vector<ChoiceObservation> all;
    for (UserId u = 0; u < n_users; ++u) {
        for (int e = 0; e < 250; ++e) {
            ChoiceObservation obs;
            obs.user = u;
            while (obs.choice_set.size() < 4) {
                const ItemId cand = static_cast<ItemId>(rng.uniform_index(n_items));
                bool dup = false;
                for (ItemId j : obs.choice_set) dup |= j == cand;
                if (!dup) obs.choice_set.push_back(cand);
            }
            double best = -1e300;
            for (ItemId j : obs.choice_set) {
                const double v = utility(true_up, u, j) + sample_noise();
                if (v > best) {
                    best = v;
                    obs.chosen = j;
                }
            }
            all.push_back(std::move(obs));
        }
    }
    // user-stratified validation carve-out
    std::vector<ChoiceObservation> train_set, val_set;
    for (std::size_t i = 0; i < all.size(); ++i)
        (i % 9 == 0 ? val_set : train_set).push_back(all[i]);

    TrainConfig cfg;
    cfg.model_kind = ModelKind::LCM4Rec;
    cfg.n_users = n_users;
    cfg.n_items = n_items;
    cfg.embedding_dim = dim;
    cfg.kernel_count = 5;
    cfg.sample_count = 5;
    cfg.learning_rate = 0.03;
    cfg.max_epochs = 300;
    cfg.patience = 15;
    cfg.seed = 7;
    const FittedModel fitted = train(train_set, val_set, cfg);

    FittedModel generating;
    generating.model_kind = ModelKind::LCM4Rec;
    generating.utility = true_up;
    generating.kernel = true_raw;
    generating.config = cfg;
    const double fitted_nll = validation_nll(fitted, val_set);
    const double generating_nll = validation_nll(generating, val_set);
    CHECK(fitted_nll < generating_nll + 0.02);
}

TEST_CASE("frozen draws reuse the epoch-0 noise") {
    const auto data = binary_choices(1.0, 60, 61);
    TrainConfig cfg;
    cfg.model_kind = ModelKind::LCM4Rec;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.embedding_dim = 1;
    cfg.kernel_count = 3;
    cfg.sample_count = 4;
    cfg.learning_rate = 0.0;  // parameters never move
    cfg.max_epochs = 3;
    cfg.patience = 3;
    cfg.seed = 17;
    cfg.frozen_draws = true;
    const FittedModel frozen = train(data, data, cfg);
    // same parameters + same draws every epoch: identical train NLL
    CHECK(frozen.history[1].train_nll == frozen.history[0].train_nll);
    CHECK(frozen.history[2].train_nll == frozen.history[0].train_nll);

    cfg.frozen_draws = false;
    const FittedModel fresh = train(data, data, cfg);
    CHECK(fresh.history[1].train_nll != fresh.history[0].train_nll);
}

TEST_CASE("invalid configurations are rejected") {
    TrainConfig cfg;
    cfg.model_kind = ModelKind::LCM4Rec;
    cfg.n_users = 1;
    cfg.n_items = 2;
    cfg.sample_count = 2;  // S >= 3 required
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
    cfg.sample_count = 5;
    cfg.n_users = 0;
    CHECK_THROWS_AS(cfg.check(), std::invalid_argument);
}

TEST_CASE("grid search returns a grid member with the best validation NLL") {
    const auto data = binary_choices(1.2, 80, 51);
    const auto val = binary_choices(1.2, 30, 52);
    TrainConfig base;
    base.model_kind = ModelKind::MNL;
    base.n_users = 1;
    base.n_items = 2;
    base.embedding_dim = 1;
    base.max_epochs = 10;
    base.patience = 3;
    base.seed = 4;
    const GridSearchResult res = grid_search(data, val, base);
    CHECK(res.tried.size() == 2 * default_learning_rate_grid().size());
    bool in_grid = false;
    for (double lr : default_learning_rate_grid())
        if (res.best.learning_rate == lr) in_grid = true;
    CHECK(in_grid);
    for (const auto& [cfg, v] : res.tried) CHECK(res.best_validation_nll <= v);
}
