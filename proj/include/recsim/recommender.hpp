#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"

namespace recsim {

// What the softmax choice scores candidates against.
enum class ScoreBasis { distance_to_user, distance_to_reference };

inline std::string to_string(ScoreBasis b) {
  return b == ScoreBasis::distance_to_user ? "distance_to_user" : "distance_to_reference";
}

inline ScoreBasis parse_score_basis(const std::string& s) {
  if (s == "distance_to_user") return ScoreBasis::distance_to_user;
  if (s == "distance_to_reference") return ScoreBasis::distance_to_reference;
  throw std::invalid_argument("unknown score basis '" + s + "'");
}

// hops == 0 is the greedy recommender; hops > 0 the d-hop socially aware one.
struct RecommenderConfig {
  std::size_t hops = 0;
  std::size_t k = 5;
  double temperature = 0.5;
  ScoreBasis score_basis = ScoreBasis::distance_to_user;

  void validate(std::size_t n_creators) const {
    if (k < 1 || k > n_creators)
      throw std::invalid_argument("k must satisfy 1 <= k <= number of creators (" + std::to_string(n_creators) + ")");
    if (!(temperature > 0.0) || !std::isfinite(temperature))
      throw std::invalid_argument("temperature must be positive");
  }
};

// Mean opinion over a given influencer set.
inline std::vector<double> mean_opinion(const RowMatrix& users, std::span<const Index> members) {
  std::vector<double> r(users.cols(), 0.0);
  for (Index j : members) {
    const auto u = users.row(j);
    for (std::size_t k = 0; k < r.size(); ++k) r[k] += u[k];
  }
  for (double& x : r) x /= static_cast<double>(members.size());
  return r;
}

// Recommendation reference r_i: mean opinion of the d-hop influencers of i.
inline std::vector<double> reference(const RowMatrix& users, const SocialGraph& graph, Index i,
                                     std::size_t hops) {
  if (hops == 0) {
    const auto u = users.row(i);
    return {u.begin(), u.end()};
  }
  return mean_opinion(users, d_hop_influencers(graph, i, hops));
}

// The k creators closest to r, ascending by distance, ties by lower index.
inline std::vector<Index> topk_candidates(std::span<const double> r, const RowMatrix& creators, std::size_t k) {
  const std::size_t m = creators.rows();
  if (k > m) throw std::invalid_argument("k exceeds number of creators");
  std::vector<double> dist(m);
  for (Index j = 0; j < m; ++j) dist[j] = distance(creators.row(j), r);
  std::vector<Index> order(m);
  std::iota(order.begin(), order.end(), Index{0});
  const auto closer = [&](Index a, Index b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), closer);
  order.resize(k);
  return order;
}

// Softmax over exp(-||c_j - anchor|| / temperature), shifted by the minimum
// distance before exponentiation.
inline std::vector<double> choice_probabilities(std::span<const double> anchor, std::span<const Index> candidates,
                                                const RowMatrix& creators, double temperature) {
  if (candidates.empty()) throw std::invalid_argument("candidate set is empty");
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  std::vector<double> p(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) p[c] = distance(creators.row(candidates[c]), anchor);
  const double shift = *std::min_element(p.begin(), p.end());
  double total = 0.0;
  for (double& x : p) {
    x = std::exp(-(x - shift) / temperature);
    total += x;
  }
  for (double& x : p) x /= total;
  return p;
}

inline Index sample_choice(std::span<const double> anchor, std::span<const Index> candidates,
                           const RowMatrix& creators, double temperature, Rng& rng) {
  if (candidates.size() == 1) return candidates.front();
  const auto p = choice_probabilities(anchor, candidates, creators, temperature);
  std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
  return candidates[pick(rng)];
}

// Stateful front end: caches the influencer sets, which depend only on the
// static graph, and runs both recommendation stages for one user.
class Recommender {
 public:
  Recommender(const SocialGraph& graph, RecommenderConfig config) : config_(config) {
    if (config_.hops > 0) {
      influencers_.reserve(graph.n_users());
      for (Index i = 0; i < graph.n_users(); ++i) influencers_.push_back(d_hop_influencers(graph, i, config_.hops));
    }
  }

  const RecommenderConfig& config() const noexcept { return config_; }

  std::vector<double> reference_for(const RowMatrix& users, Index i) const {
    if (config_.hops == 0) {
      const auto u = users.row(i);
      return {u.begin(), u.end()};
    }
    return mean_opinion(users, influencers_.at(i));
  }

  std::vector<Index> candidates_for(const RowMatrix& users, const RowMatrix& creators, Index i) const {
    return topk_candidates(reference_for(users, i), creators, config_.k);
  }

  Index choose(const RowMatrix& users, const RowMatrix& creators, Index i, Rng& rng) const {
    const auto r = reference_for(users, i);
    const auto candidates = topk_candidates(r, creators, config_.k);
    const std::span<const double> anchor =
        config_.score_basis == ScoreBasis::distance_to_user ? users.row(i) : std::span<const double>(r);
    return sample_choice(anchor, candidates, creators, config_.temperature, rng);
  }

 private:
  RecommenderConfig config_;
  std::vector<std::vector<Index>> influencers_;
};

}  // namespace recsim
