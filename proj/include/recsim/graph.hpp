#pragma once

#include <algorithm>
#include <cmath>
#include <queue>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/matrix.hpp"

namespace recsim {

struct Edge {
  Index source;  // influencer j
  Index target;  // influenced user i
  double weight;
};

struct InEdge {
  Index source;
  double weight;
};

// Directed weighted social network. An edge source -> target means the
// source user influences the target with weight A(target, source). Self
// influence A_ii lives in self_weights and never participates in traversal.
class SocialGraph {
 public:
  SocialGraph() = default;
  explicit SocialGraph(std::size_t n_users)
      : in_(n_users), out_(n_users), self_weights_(n_users, 0.0) {}

  std::size_t n_users() const noexcept { return self_weights_.size(); }
  std::size_t n_edges() const noexcept { return n_edges_; }

  void add_edge(Index source, Index target, double weight = 0.0) {
    check_user(source);
    check_user(target);
    if (source == target) throw std::invalid_argument("self-loops are stored as self weights, not edges");
    if (!(weight >= 0.0)) throw std::invalid_argument("edge weight must be nonnegative");
    if (has_edge(source, target))
      throw std::invalid_argument("duplicate edge " + std::to_string(source) + "->" + std::to_string(target));
    in_[target].push_back({source, weight});
    out_[source].push_back(target);
    ++n_edges_;
  }

  bool has_edge(Index source, Index target) const {
    check_user(target);
    const auto& in = in_[target];
    return std::any_of(in.begin(), in.end(), [&](const InEdge& e) { return e.source == source; });
  }

  std::span<const InEdge> in_edges(Index i) const {
    check_user(i);
    return in_[i];
  }
  std::span<const Index> out_neighbors(Index i) const {
    check_user(i);
    return out_[i];
  }

  double self_weight(Index i) const {
    check_user(i);
    return self_weights_[i];
  }
  void set_self_weight(Index i, double w) {
    check_user(i);
    if (!(w >= 0.0 && w <= 1.0)) throw std::invalid_argument("self weight must be in [0,1]");
    self_weights_[i] = w;
  }

  // Position refers to the order of in_edges(i).
  void set_in_weight(Index i, std::size_t position, double w) {
    check_user(i);
    if (!(w >= 0.0)) throw std::invalid_argument("edge weight must be nonnegative");
    in_[i].at(position).weight = w;
  }

  double in_weight_sum(Index i) const {
    double s = 0.0;
    for (const auto& e : in_edges(i)) s += e.weight;
    return s;
  }

  std::vector<Edge> edges() const {
    std::vector<Edge> all;
    all.reserve(n_edges_);
    for (Index i = 0; i < n_users(); ++i)
      for (const auto& e : in_[i]) all.push_back({e.source, i, e.weight});
    return all;
  }

 private:
  void check_user(Index i) const {
    if (i >= n_users()) throw std::out_of_range("user index " + std::to_string(i) + " out of range");
  }

  std::vector<std::vector<InEdge>> in_;
  std::vector<std::vector<Index>> out_;
  std::vector<double> self_weights_;
  std::size_t n_edges_ = 0;
};

// Users with a directed path of at most `hops` edges into user i, i included.
// Sorted ascending.
inline std::vector<Index> d_hop_influencers(const SocialGraph& graph, Index i, std::size_t hops) {
  if (i >= graph.n_users()) throw std::out_of_range("user index out of range");
  std::vector<std::size_t> depth(graph.n_users(), static_cast<std::size_t>(-1));
  std::vector<Index> found{i};
  std::queue<Index> frontier;
  depth[i] = 0;
  frontier.push(i);
  while (!frontier.empty()) {
    const Index v = frontier.front();
    frontier.pop();
    if (depth[v] == hops) continue;
    for (const auto& e : graph.in_edges(v)) {
      if (depth[e.source] != static_cast<std::size_t>(-1)) continue;
      depth[e.source] = depth[v] + 1;
      found.push_back(e.source);
      frontier.push(e.source);
    }
  }
  std::sort(found.begin(), found.end());
  return found;
}

inline double average_in_degree(const SocialGraph& graph) {
  if (graph.n_users() == 0) return 0.0;
  return static_cast<double>(graph.n_edges()) / static_cast<double>(graph.n_users());
}

struct RowValidation {
  std::vector<double> residuals;  // A_ii + sum_j A_ij + B_i - 1, per user
  std::vector<Index> failing;
  bool ok() const noexcept { return failing.empty(); }
};

// Checks row-stochasticity of the combined [A B] influence for every user.
inline RowValidation validate_rows(const SocialGraph& graph, std::span<const double> recommender_influence,
                                   double tol = 1e-9) {
  if (recommender_influence.size() != graph.n_users())
    throw std::invalid_argument("recommender influence size does not match user count");
  RowValidation report;
  report.residuals.resize(graph.n_users());
  for (Index i = 0; i < graph.n_users(); ++i) {
    const double r = graph.self_weight(i) + graph.in_weight_sum(i) + recommender_influence[i] - 1.0;
    report.residuals[i] = r;
    if (!(std::abs(r) <= tol)) report.failing.push_back(i);
  }
  return report;
}

}  // namespace recsim
