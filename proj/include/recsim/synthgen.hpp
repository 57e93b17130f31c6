#pragma once

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"

namespace recsim {

struct Range {
  double lower;
  double upper;

  double sample(Rng& rng) const {
    if (lower == upper) return lower;
    return std::uniform_real_distribution<double>(lower, upper)(rng);
  }
  bool contains(double x) const { return x >= lower && x <= upper; }
};

// How the neighbor influence bound is read: per incoming edge (synthetic
// setup) or as the total mass split evenly over incoming edges (real-network
// setup).
enum class NeighborMode { per_edge, total_mass };

struct ParameterBounds {
  Range user_stubbornness{0.0, 0.5};
  Range self_influence{0.5, 0.8};
  Range recommender_influence{0.2, 0.8};
  Range neighbor_influence{0.025, 0.05};
  Range creator_stubbornness{0.0, 0.5};
  Range creator_self_influence{0.5, 0.8};
  Range audience_influence{0.2, 0.8};
  NeighborMode neighbor_mode = NeighborMode::per_edge;

  static ParameterBounds synthetic() { return {}; }
  static ParameterBounds real_network() {
    ParameterBounds b;
    b.neighbor_influence = {0.25, 0.5};
    b.neighbor_mode = NeighborMode::total_mass;
    return b;
  }

  void validate() const {
    for (const Range* r : {&user_stubbornness, &self_influence, &recommender_influence, &neighbor_influence,
                           &creator_stubbornness, &creator_self_influence, &audience_influence}) {
      if (!(r->lower <= r->upper) || r->lower < 0.0 || r->upper > 1.0)
        throw std::invalid_argument("parameter bounds must satisfy 0 <= lower <= upper <= 1");
    }
    if (self_influence.lower + recommender_influence.lower > 1.0)
      throw std::invalid_argument("infeasible bounds: self influence + recommender influence exceed 1");
    if (neighbor_mode == NeighborMode::total_mass && self_influence.lower + neighbor_influence.lower > 1.0)
      throw std::invalid_argument("infeasible bounds: self influence + neighbor mass exceed 1");
    if (creator_self_influence.upper > 1.0 - audience_influence.lower ||
        creator_self_influence.lower < 1.0 - audience_influence.upper)
      throw std::invalid_argument("infeasible bounds: C_j = 1 - E_j leaves the audience influence range");
  }
};

struct PopulationParameters {
  std::vector<double> user_stubbornness;
  std::vector<double> recommender_influence;
  std::vector<double> creator_stubbornness;
  std::vector<double> creator_self_influence;
  std::vector<double> audience_influence;
};

// Samples every influence parameter. Self and edge weights are written into
// the graph; B_i takes the row residual, and if that residual leaves the
// recommender-influence range the neighbor weights are scaled so B_i lands
// on the nearest bound.
inline PopulationParameters sample_params(SocialGraph& graph, std::size_t n_creators, const ParameterBounds& bounds,
                                          Rng& rng) {
  bounds.validate();
  const std::size_t n = graph.n_users();
  PopulationParameters p;
  p.user_stubbornness.resize(n);
  p.recommender_influence.resize(n);

  for (Index i = 0; i < n; ++i) {
    p.user_stubbornness[i] = bounds.user_stubbornness.sample(rng);
    const double a_ii = bounds.self_influence.sample(rng);
    graph.set_self_weight(i, a_ii);

    const auto in = graph.in_edges(i);
    std::vector<double> w(in.size());
    if (bounds.neighbor_mode == NeighborMode::per_edge) {
      for (double& x : w) x = bounds.neighbor_influence.sample(rng);
    } else if (!w.empty()) {
      const double mass = bounds.neighbor_influence.sample(rng);
      for (double& x : w) x = mass / static_cast<double>(w.size());
    }
    double mass = 0.0;
    for (double x : w) mass += x;

    double b = 1.0 - a_ii - mass;
    const Range& br = bounds.recommender_influence;
    if (!br.contains(b)) {
      const double target_b = b < br.lower ? br.lower : br.upper;
      const double target_mass = 1.0 - a_ii - target_b;
      if (mass <= 0.0 || target_mass < 0.0)
        throw std::invalid_argument("cannot place recommender influence of user " + std::to_string(i) +
                                    " inside its bounds");
      const double scale = target_mass / mass;
      mass = 0.0;
      for (double& x : w) {
        x *= scale;
        mass += x;
      }
      b = target_b;
    }
    for (std::size_t e = 0; e < w.size(); ++e) graph.set_in_weight(i, e, w[e]);
    // Residual from the stored weights so the row sums to 1 as exactly as
    // floating point allows.
    p.recommender_influence[i] = 1.0 - a_ii - graph.in_weight_sum(i);
  }

  p.creator_stubbornness.resize(n_creators);
  p.creator_self_influence.resize(n_creators);
  p.audience_influence.resize(n_creators);
  for (Index j = 0; j < n_creators; ++j) {
    p.creator_stubbornness[j] = bounds.creator_stubbornness.sample(rng);
    p.creator_self_influence[j] = bounds.creator_self_influence.sample(rng);
    p.audience_influence[j] = 1.0 - p.creator_self_influence[j];
  }
  return p;
}

// Edge probability exp(-delta * f(||u_i - u_j||)), f the identity or the square.
enum class HomophilyKernel { distance, squared_distance };

inline std::string to_string(HomophilyKernel k) {
  return k == HomophilyKernel::distance ? "distance" : "squared_distance";
}

inline HomophilyKernel parse_homophily_kernel(const std::string& s) {
  if (s == "distance") return HomophilyKernel::distance;
  if (s == "squared_distance") return HomophilyKernel::squared_distance;
  throw std::invalid_argument("unknown homophily kernel '" + s + "'");
}

inline double homophily_probability(std::span<const double> a, std::span<const double> b, double delta,
                                    HomophilyKernel kernel) {
  const double sq = squared_distance(a, b);
  return std::exp(-delta * (kernel == HomophilyKernel::distance ? std::sqrt(sq) : sq));
}

// Every ordered pair (j -> i), j != i, is drawn independently. Edge weights
// are left at zero for sample_params.
inline SocialGraph generate_homophily_graph(const RowMatrix& initial_opinions, double delta, Rng& rng,
                                            HomophilyKernel kernel = HomophilyKernel::distance) {
  if (!(delta > 0.0)) throw std::invalid_argument("homophily delta must be positive");
  const std::size_t n = initial_opinions.rows();
  SocialGraph graph(n);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const double p = homophily_probability(initial_opinions.row(i), initial_opinions.row(j), delta, kernel);
      if (coin(rng) < p) graph.add_edge(j, i);
    }
  }
  return graph;
}

inline RowMatrix init_opinions_uniform(std::size_t n_agents, std::size_t n_topics, Rng& rng) {
  RowMatrix m(n_agents, n_topics);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& x : m.values()) x = u(rng);
  return m;
}

}  // namespace recsim
