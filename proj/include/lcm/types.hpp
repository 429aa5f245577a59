#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lcm {

using UserId = std::int32_t;
using ItemId = std::int32_t;

// One logged choice event: the user, the item they picked, and the full set
// of alternatives that was on display.
struct ChoiceObservation {
    UserId user = 0;
    ItemId chosen = 0;
    std::vector<ItemId> choice_set;
};

// Throws if the observation violates its structural invariants: the chosen
// item must be a member of the (pairwise distinct, size >= 2) choice set.
void validate(const ChoiceObservation& obs);

// Deterministic utility model V_ij = u_i . v_j + c_j. Embeddings are stored
// flat, row-major, one row per user/item.
class UtilityParams {
  public:
    UtilityParams() = default;
    UtilityParams(std::size_t n_users, std::size_t n_items, std::size_t dim)
        : dim_(dim),
          n_users_(n_users),
          n_items_(n_items),
          user_embeddings_(n_users * dim, 0.0),
          item_embeddings_(n_items * dim, 0.0),
          item_constants_(n_items, 0.0) {}

    std::size_t n_users() const { return n_users_; }
    std::size_t n_items() const { return n_items_; }
    std::size_t dim() const { return dim_; }

    std::span<double> user_embedding(UserId u) {
        check_user(u);
        return {user_embeddings_.data() + static_cast<std::size_t>(u) * dim_, dim_};
    }
    std::span<const double> user_embedding(UserId u) const {
        check_user(u);
        return {user_embeddings_.data() + static_cast<std::size_t>(u) * dim_, dim_};
    }
    std::span<double> item_embedding(ItemId j) {
        check_item(j);
        return {item_embeddings_.data() + static_cast<std::size_t>(j) * dim_, dim_};
    }
    std::span<const double> item_embedding(ItemId j) const {
        check_item(j);
        return {item_embeddings_.data() + static_cast<std::size_t>(j) * dim_, dim_};
    }
    double& item_constant(ItemId j) {
        check_item(j);
        return item_constants_[static_cast<std::size_t>(j)];
    }
    double item_constant(ItemId j) const {
        check_item(j);
        return item_constants_[static_cast<std::size_t>(j)];
    }

    std::vector<double>& user_embeddings_flat() { return user_embeddings_; }
    std::vector<double>& item_embeddings_flat() { return item_embeddings_; }
    std::vector<double>& item_constants() { return item_constants_; }
    const std::vector<double>& user_embeddings_flat() const { return user_embeddings_; }
    const std::vector<double>& item_embeddings_flat() const { return item_embeddings_; }
    const std::vector<double>& item_constants() const { return item_constants_; }

  private:
    void check_user(UserId u) const {
        if (u < 0 || static_cast<std::size_t>(u) >= n_users_)
            throw std::out_of_range("unknown user id " + std::to_string(u));
    }
    void check_item(ItemId j) const {
        if (j < 0 || static_cast<std::size_t>(j) >= n_items_)
            throw std::out_of_range("unknown item id " + std::to_string(j));
    }

    std::size_t dim_ = 0;
    std::size_t n_users_ = 0;
    std::size_t n_items_ = 0;
    std::vector<double> user_embeddings_;
    std::vector<double> item_embeddings_;
    std::vector<double> item_constants_;
};

// V_ij = u_i . v_j + c_j.
double utility(const UtilityParams& params, UserId user, ItemId item);

// Probability vector over the alternatives of one choice set.
struct Simplex {
    std::vector<double> probabilities;

    double operator[](std::size_t i) const { return probabilities[i]; }
    std::size_t size() const { return probabilities.size(); }
};

// Throws unless entries are nonnegative and sum to 1 within tol.
void validate(const Simplex& s, double tol = 1e-9);

}  // namespace lcm
