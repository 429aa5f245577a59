#include "lcm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "lcm/choice_models.hpp"

namespace lcm {

ExposureProtocol::Kind protocol_kind_from_string(const std::string& name) {
    if (name == "uniform") return ExposureProtocol::Kind::Uniform;
    if (name == "overexposure") return ExposureProtocol::Kind::Overexposure;
    if (name == "competition_popular")
        return ExposureProtocol::Kind::CompetitionPopular;
    if (name == "competition_unpopular")
        return ExposureProtocol::Kind::CompetitionUnpopular;
    throw std::invalid_argument("unknown exposure protocol: " + name);
}

std::string to_string(ExposureProtocol::Kind kind) {
    switch (kind) {
        case ExposureProtocol::Kind::Uniform: return "uniform";
        case ExposureProtocol::Kind::Overexposure: return "overexposure";
        case ExposureProtocol::Kind::CompetitionPopular: return "competition_popular";
        case ExposureProtocol::Kind::CompetitionUnpopular:
            return "competition_unpopular";
    }
    return "?";
}

SplitPlan make_split_plan(int n_users, int n_items, std::uint64_t seed,
                          double train_user_fraction) {
    SplitPlan plan;
    plan.user_is_eval.assign(n_users, 0);
    plan.item_is_eval.assign(n_items, 0);

    std::vector<UserId> users(n_users);
    std::iota(users.begin(), users.end(), 0);
    Rng urng(mix_key(seed, 0x9a17));
    for (std::size_t i = users.size() - 1; i > 0; --i)
        std::swap(users[i], users[urng.uniform_index(i + 1)]);
    const std::size_t n_train_users = static_cast<std::size_t>(
        std::lround(train_user_fraction * static_cast<double>(n_users)));
    for (std::size_t i = 0; i < users.size(); ++i) {
        if (i < n_train_users) {
            plan.train_users.push_back(users[i]);
        } else {
            plan.eval_users.push_back(users[i]);
            plan.user_is_eval[users[i]] = 1;
        }
    }

    std::vector<ItemId> items(n_items);
    std::iota(items.begin(), items.end(), 0);
    Rng irng(mix_key(seed, 0x9a18));
    for (std::size_t i = items.size() - 1; i > 0; --i)
        std::swap(items[i], items[irng.uniform_index(i + 1)]);
    const std::size_t n_train_items = items.size() / 2;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i < n_train_items) {
            plan.train_items.push_back(items[i]);
        } else {
            plan.eval_items.push_back(items[i]);
            plan.item_is_eval[items[i]] = 1;
        }
    }
    std::sort(plan.train_users.begin(), plan.train_users.end());
    std::sort(plan.eval_users.begin(), plan.eval_users.end());
    std::sort(plan.train_items.begin(), plan.train_items.end());
    std::sort(plan.eval_items.begin(), plan.eval_items.end());
    return plan;
}

GroundTruth gen_ground_truth(std::uint64_t seed, int n_users, int n_items, int dim,
                             const ErrorDistribution& error) {
    if (n_users < 1 || n_items < 1 || dim < 1)
        throw std::invalid_argument("gen_ground_truth: sizes must be >= 1");
    GroundTruth gt;
    gt.error = error;
    gt.n_users = n_users;
    gt.n_items = n_items;
    gt.params = UtilityParams(n_users, n_items, dim);
    Rng rng(mix_key(seed, 0x6707));

    const double radius = std::sqrt(2.0);
    auto sphere_fill = [&](std::span<double> row) {
        for (;;) {
            double norm2 = 0.0;
            for (double& x : row) {
                x = rng.normal();
                norm2 += x * x;
            }
            if (norm2 > 1e-24) {
                const double f = radius / std::sqrt(norm2);
                for (double& x : row) x *= f;
                return;
            }
        }
    };
    for (UserId u = 0; u < n_users; ++u) sphere_fill(gt.params.user_embedding(u));
    for (ItemId j = 0; j < n_items; ++j) sphere_fill(gt.params.item_embedding(j));
    for (double& c : gt.params.item_constants()) c = rng.uniform();
    return gt;
}

std::vector<double> popularity_scores(const GroundTruth& gt) {
    const int dim = static_cast<int>(gt.params.dim());
    std::vector<double> mean_user(dim, 0.0);
    for (UserId u = 0; u < gt.n_users; ++u) {
        const auto e = gt.params.user_embedding(u);
        for (int d = 0; d < dim; ++d) mean_user[d] += e[d];
    }
    for (double& x : mean_user) x /= gt.n_users;
    std::vector<double> score(gt.n_items);
    for (ItemId j = 0; j < gt.n_items; ++j) {
        const auto v = gt.params.item_embedding(j);
        double dot = 0.0;
        for (int d = 0; d < dim; ++d) dot += mean_user[d] * v[d];
        score[j] = dot + gt.params.item_constant(j);
    }
    return score;
}

namespace {

// Distinct uniform draw of n items from pool (rejection; set sizes are tiny
// relative to the pools used here).
void draw_distinct(const std::vector<ItemId>& pool, int n, Rng& rng,
                   std::vector<ItemId>& out) {
    out.clear();
    while (static_cast<int>(out.size()) < n) {
        const ItemId cand = pool[rng.uniform_index(pool.size())];
        if (std::find(out.begin(), out.end(), cand) == out.end()) out.push_back(cand);
    }
}

struct CompanionPools {
    std::vector<ItemId> popular;    // top 20% by ground-truth popularity
    std::vector<ItemId> unpopular;  // bottom 20%
};

CompanionPools make_companion_pools(const GroundTruth& gt,
                                    const std::vector<ItemId>& treated) {
    const std::vector<double> score = popularity_scores(gt);
    std::vector<ItemId> order(gt.n_items);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](ItemId a, ItemId b) {
        return score[a] != score[b] ? score[a] > score[b] : a < b;
    });
    const std::unordered_set<ItemId> treated_set(treated.begin(), treated.end());
    const int quintile = std::max(1, gt.n_items / 5);
    CompanionPools pools;
    for (int i = 0; i < quintile; ++i)
        if (!treated_set.count(order[i])) pools.popular.push_back(order[i]);
    for (int i = 0; i < quintile; ++i)
        if (!treated_set.count(order[gt.n_items - 1 - i]))
            pools.unpopular.push_back(order[gt.n_items - 1 - i]);
    std::sort(pools.popular.begin(), pools.popular.end());
    std::sort(pools.unpopular.begin(), pools.unpopular.end());
    return pools;
}

std::vector<ItemId> competition_set_from_pools(const std::vector<ItemId>& treated_in_pool,
                                               const std::vector<ItemId>& companions,
                                               int set_size, Rng& rng) {
    if (static_cast<int>(companions.size()) < set_size - 1)
        throw std::invalid_argument(
            "competition protocol: companion quintile smaller than set_size - 1");
    std::vector<ItemId> set;
    set.push_back(treated_in_pool[rng.uniform_index(treated_in_pool.size())]);
    std::vector<ItemId> comp;
    draw_distinct(companions, set_size - 1, rng, comp);
    set.insert(set.end(), comp.begin(), comp.end());
    return set;
}

}  // namespace

std::vector<ItemId> competition_sets(const GroundTruth& gt,
                                     const std::vector<ItemId>& treated, bool popular,
                                     int set_size, Rng& rng) {
    if (treated.empty())
        throw std::invalid_argument("competition protocol: no treated items");
    const CompanionPools pools = make_companion_pools(gt, treated);
    return competition_set_from_pools(treated, popular ? pools.popular : pools.unpopular,
                                      set_size, rng);
}

std::vector<ChoiceObservation> gen_choices(const GroundTruth& gt,
                                           const ExposureProtocol& protocol,
                                           int choices_per_user, std::uint64_t seed,
                                           const SplitPlan* plan,
                                           bool heterogeneous_counts) {
    const int set_size = protocol.set_size;
    if (set_size < 2) throw std::invalid_argument("gen_choices: set_size must be >= 2");

    std::vector<ItemId> all_items(gt.n_items);
    std::iota(all_items.begin(), all_items.end(), 0);

    const bool competition =
        protocol.kind == ExposureProtocol::Kind::CompetitionPopular ||
        protocol.kind == ExposureProtocol::Kind::CompetitionUnpopular;
    const bool popular = protocol.kind == ExposureProtocol::Kind::CompetitionPopular;

    CompanionPools pools;
    if (competition) pools = make_companion_pools(gt, protocol.treated_items);
    std::vector<char> is_treated(gt.n_items, 0);
    for (ItemId j : protocol.treated_items) is_treated[j] = 1;

    // Per-pool cached intersections.
    struct PoolCtx {
        std::vector<ItemId> items;
        std::vector<ItemId> treated;
        std::vector<ItemId> companions;     // competition only
        std::vector<ItemId> untreated;      // natural-set pool under competition
        double natural_treated_rate = 0.0;  // P(uniform set intersects treated)
    };
    auto make_ctx = [&](const std::vector<ItemId>& items) {
        PoolCtx ctx;
        ctx.items = items;
        for (ItemId j : items)
            if (is_treated[j]) ctx.treated.push_back(j);
        if (competition) {
            const auto& comp = popular ? pools.popular : pools.unpopular;
            std::set_intersection(comp.begin(), comp.end(), items.begin(), items.end(),
                                  std::back_inserter(ctx.companions));
            for (ItemId j : items)
                if (!is_treated[j]) ctx.untreated.push_back(j);
            // P(at least one treated item in a uniform distinct draw)
            double p_none = 1.0;
            const double n = static_cast<double>(items.size());
            const double t = static_cast<double>(ctx.treated.size());
            for (int s = 0; s < set_size; ++s) p_none *= (n - t - s) / (n - s);
            ctx.natural_treated_rate = 1.0 - p_none;
        }
        return ctx;
    };

    PoolCtx full_ctx = make_ctx(all_items);
    PoolCtx train_ctx, eval_ctx;
    if (plan != nullptr) {
        train_ctx = make_ctx(plan->train_items);
        eval_ctx = make_ctx(plan->eval_items);
    }

    std::vector<ChoiceObservation> out;
    out.reserve(static_cast<std::size_t>(gt.n_users) * choices_per_user);
    std::vector<ItemId> set;
    std::vector<ItemId> scratch;

    for (UserId user = 0; user < gt.n_users; ++user) {
        Rng rng(mix_key(seed, 0xC401CE, static_cast<std::uint64_t>(user)));
        const bool eval_user = plan != nullptr && plan->user_is_eval[user];
        const int user_events =
            heterogeneous_counts
                ? 1 + static_cast<int>(rng.uniform_index(
                          static_cast<std::uint64_t>(choices_per_user)))
                : choices_per_user;
        int protocol_event = 0;
        for (int event = 0; event < user_events; ++event) {
            // Evaluation users alternate: even events draw training-pool sets
            // (protocol applies), odd events evaluation-pool sets (uniform).
            const bool test_event = eval_user && event % 2 == 1;
            const PoolCtx& ctx = plan == nullptr ? full_ctx
                                 : eval_user     ? (test_event ? eval_ctx : train_ctx)
                                                 : full_ctx;

            if (test_event || protocol.kind == ExposureProtocol::Kind::Uniform) {
                draw_distinct(ctx.items, set_size, rng, set);
            } else if (protocol.kind == ExposureProtocol::Kind::Overexposure) {
                // every second protocol event forces one treated item
                if (protocol_event % 2 == 0 && !ctx.treated.empty()) {
                    const ItemId t = ctx.treated[rng.uniform_index(ctx.treated.size())];
                    set.assign(1, t);
                    draw_distinct(ctx.items, set_size, rng, scratch);
                    for (ItemId j : scratch) {
                        if (static_cast<int>(set.size()) >= set_size) break;
                        if (j != t) set.push_back(j);
                    }
                    while (static_cast<int>(set.size()) < set_size) {
                        const ItemId cand = ctx.items[rng.uniform_index(ctx.items.size())];
                        if (std::find(set.begin(), set.end(), cand) == set.end())
                            set.push_back(cand);
                    }
                } else {
                    draw_distinct(ctx.items, set_size, rng, set);
                }
                ++protocol_event;
            } else {
                // competition: treated items appear at their natural rate but
                // only ever alongside the designated popularity quintile
                if (!ctx.treated.empty() &&
                    rng.uniform() < ctx.natural_treated_rate) {
                    set = competition_set_from_pools(ctx.treated, ctx.companions,
                                                     set_size, rng);
                } else {
                    draw_distinct(ctx.untreated, set_size, rng, set);
                }
                ++protocol_event;
            }

            ChoiceObservation obs;
            obs.user = user;
            obs.choice_set = set;
            double best = -std::numeric_limits<double>::infinity();
            for (ItemId j : set) {
                const double noisy = utility(gt.params, user, j) + gt.error.sample(rng);
                if (noisy > best) {
                    best = noisy;
                    obs.chosen = j;
                }
            }
            out.push_back(std::move(obs));
        }
    }
    return out;
}

SplitResult split(const std::vector<ChoiceObservation>& observations,
                  const GroundTruth& gt, std::uint64_t seed) {
    const SplitPlan plan = make_split_plan(gt.n_users, gt.n_items, seed);
    SplitResult res;
    std::vector<ChoiceObservation> train_all;
    for (const auto& obs : observations) {
        bool all_eval_items = true;
        for (ItemId j : obs.choice_set)
            if (!plan.item_is_eval[j]) all_eval_items = false;
        if (plan.user_is_eval[obs.user] && all_eval_items)
            res.test.push_back(obs);
        else
            train_all.push_back(obs);
    }

    // user-stratified 10% validation carve-out
    std::vector<std::vector<std::size_t>> by_user(gt.n_users);
    for (std::size_t i = 0; i < train_all.size(); ++i)
        by_user[train_all[i].user].push_back(i);
    std::vector<char> to_val(train_all.size(), 0);
    for (UserId u = 0; u < gt.n_users; ++u) {
        auto& idx = by_user[u];
        if (idx.empty()) continue;
        Rng rng(mix_key(seed, 0x7AB, static_cast<std::uint64_t>(u)));
        for (std::size_t i = idx.size() - 1; i > 0; --i)
            std::swap(idx[i], idx[rng.uniform_index(i + 1)]);
        const std::size_t n_val = idx.size() / 10;
        for (std::size_t i = 0; i < n_val; ++i) to_val[idx[i]] = 1;
    }
    for (std::size_t i = 0; i < train_all.size(); ++i)
        (to_val[i] ? res.val : res.train).push_back(std::move(train_all[i]));

    // leakage audit: no test (user, item) exposure pair in train/val
    std::set<std::pair<UserId, ItemId>> seen;
    for (const auto* part : {&res.train, &res.val})
        for (const auto& obs : *part)
            for (ItemId j : obs.choice_set) seen.emplace(obs.user, j);
    for (const auto& obs : res.test)
        for (ItemId j : obs.choice_set)
            if (seen.count({obs.user, j}))
                throw std::runtime_error(
                    "split: test exposure pair leaked into train/val (user " +
                    std::to_string(obs.user) + ", item " + std::to_string(j) + ")");
    return res;
}

}  // namespace lcm
