#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"

namespace recsim {

// Users u^t with prejudices u^0. Self influence A_ii and the social weights
// live in the SocialGraph; B_i is the weight on whichever creator is consumed.
struct UserPopulation {
  RowMatrix opinions;
  RowMatrix prejudices;
  std::vector<double> stubbornness;           // Lambda_i
  std::vector<double> recommender_influence;  // B_i

  std::size_t size() const noexcept { return opinions.rows(); }
  std::size_t topics() const noexcept { return opinions.cols(); }
};

struct CreatorPopulation {
  RowMatrix opinions;
  RowMatrix prejudices;
  std::vector<double> stubbornness;        // Gamma_j
  std::vector<double> self_influence;      // E_j
  std::vector<double> audience_influence;  // C_j, split evenly over the audience

  std::size_t size() const noexcept { return opinions.rows(); }
  std::size_t topics() const noexcept { return opinions.cols(); }
};

// Which creator each user consumed at a given step, plus the induced
// audience sets F_j.
class Partition {
 public:
  Partition() = default;
  Partition(std::vector<Index> assignment, std::size_t n_creators)
      : assignment_(std::move(assignment)), audiences_(n_creators) {
    for (Index i = 0; i < assignment_.size(); ++i) {
      const Index j = assignment_[i];
      if (j >= n_creators)
        throw std::invalid_argument("user " + std::to_string(i) + " chose invalid creator " + std::to_string(j));
      audiences_[j].push_back(i);
    }
  }

  std::size_t n_users() const noexcept { return assignment_.size(); }
  std::size_t n_creators() const noexcept { return audiences_.size(); }
  Index creator_of(Index user) const { return assignment_.at(user); }
  std::span<const Index> audience(Index creator) const { return audiences_.at(creator); }
  std::span<const Index> assignment() const noexcept { return assignment_; }

  bool operator==(const Partition& other) const { return assignment_ == other.assignment_; }

 private:
  std::vector<Index> assignment_;
  std::vector<std::vector<Index>> audiences_;
};

inline Partition build_partition(std::span<const Index> choices, std::size_t n_creators) {
  return Partition({choices.begin(), choices.end()}, n_creators);
}

namespace detail {

inline void check_population(const UserPopulation& users) {
  const std::size_t n = users.size();
  if (users.prejudices.rows() != n || users.prejudices.cols() != users.topics())
    throw std::invalid_argument("user prejudices shape mismatch");
  if (users.stubbornness.size() != n || users.recommender_influence.size() != n)
    throw std::invalid_argument("user parameter vectors must have one entry per user");
  for (double l : users.stubbornness)
    if (!(l >= 0.0 && l <= 1.0)) throw std::invalid_argument("user stubbornness must be in [0,1]");
}

inline void check_population(const CreatorPopulation& creators) {
  const std::size_t m = creators.size();
  if (creators.prejudices.rows() != m || creators.prejudices.cols() != creators.topics())
    throw std::invalid_argument("creator prejudices shape mismatch");
  if (creators.stubbornness.size() != m || creators.self_influence.size() != m ||
      creators.audience_influence.size() != m)
    throw std::invalid_argument("creator parameter vectors must have one entry per creator");
  for (double g : creators.stubbornness)
    if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("creator stubbornness must be in [0,1]");
}

}  // namespace detail

// One synchronous user update, every topic independently:
//   u_i' = (1 - L_i) (A_ii u_i + sum_j A_ij u_j + B_i c_{j(i)}) + L_i u_i^0
inline RowMatrix user_step(const UserPopulation& users, const SocialGraph& graph,
                           const CreatorPopulation& creators, const Partition& partition) {
  detail::check_population(users);
  const std::size_t n_users = users.size();
  const std::size_t topics = users.topics();
  if (creators.topics() != topics) throw std::invalid_argument("users and creators disagree on topic count");
  if (graph.n_users() != n_users) throw std::invalid_argument("graph size does not match user count");
  if (partition.n_users() != n_users || partition.n_creators() != creators.size())
    throw std::invalid_argument("partition does not match populations");
  const auto rows = validate_rows(graph, users.recommender_influence);
  if (!rows.ok())
    throw std::invalid_argument("influence row of user " + std::to_string(rows.failing.front()) +
                                " is not stochastic");

  RowMatrix next(n_users, topics);
  std::vector<double> mix(topics);
  for (Index i = 0; i < n_users; ++i) {
    const auto self = users.opinions.row(i);
    const auto content = creators.opinions.row(partition.creator_of(i));
    const double a_ii = graph.self_weight(i);
    const double b_i = users.recommender_influence[i];
    for (std::size_t k = 0; k < topics; ++k) mix[k] = a_ii * self[k] + b_i * content[k];
    for (const auto& e : graph.in_edges(i)) {
      const auto other = users.opinions.row(e.source);
      for (std::size_t k = 0; k < topics; ++k) mix[k] += e.weight * other[k];
    }
    const double lambda = users.stubbornness[i];
    const auto prejudice = users.prejudices.row(i);
    auto out = next.row(i);
    for (std::size_t k = 0; k < topics; ++k) out[k] = (1.0 - lambda) * mix[k] + lambda * prejudice[k];
  }
  return next;
}

// One synchronous creator update:
//   c_j' = (1 - G_j) (E_j c_j + (C_j / |F_j|) sum_{i in F_j} u_i) + G_j c_j^0
// A creator with no audience puts the C_j mass back on itself.
inline RowMatrix creator_step(const CreatorPopulation& creators, const UserPopulation& users,
                              const Partition& partition) {
  detail::check_population(creators);
  const std::size_t m = creators.size();
  const std::size_t topics = creators.topics();
  if (users.topics() != topics) throw std::invalid_argument("users and creators disagree on topic count");
  if (partition.n_creators() != m || partition.n_users() != users.size())
    throw std::invalid_argument("partition does not match populations");

  RowMatrix next(m, topics);
  std::vector<double> mix(topics);
  for (Index j = 0; j < m; ++j) {
    const auto self = creators.opinions.row(j);
    const auto audience = partition.audience(j);
    const double e_j = creators.self_influence[j];
    const double c_j = creators.audience_influence[j];
    if (audience.empty()) {
      for (std::size_t k = 0; k < topics; ++k) mix[k] = (e_j + c_j) * self[k];
    } else {
      const double per_user = c_j / static_cast<double>(audience.size());
      for (std::size_t k = 0; k < topics; ++k) mix[k] = e_j * self[k];
      for (Index i : audience) {
        const auto u = users.opinions.row(i);
        for (std::size_t k = 0; k < topics; ++k) mix[k] += per_user * u[k];
      }
    }
    const double gamma = creators.stubbornness[j];
    const auto prejudice = creators.prejudices.row(j);
    auto out = next.row(j);
    for (std::size_t k = 0; k < topics; ++k) out[k] = (1.0 - gamma) * mix[k] + gamma * prejudice[k];
  }
  return next;
}

}  // namespace recsim
