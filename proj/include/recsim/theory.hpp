#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/dynamics.hpp"
#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"
#include "recsim/simulation.hpp"
#include "recsim/synthgen.hpp"

// Independent checks of the analytical results: steady state under a frozen
// partition, the social/recommendation trade-off, and the filter-bubble
// contraction under a greedy recommender with stubborn creators.
namespace recsim::theory {

// The affine system x' = J x + [L u^0; G c^0] obtained by freezing the
// partition. J is the same for every topic.
struct FixedPointProblem {
  SocialGraph graph;
  UserPopulation users;
  CreatorPopulation creators;
  Partition partition;

  static FixedPointProblem from(const SimulationInput& input, const Partition& partition) {
    return {input.graph, input.users, input.creators, partition};
  }

  std::size_t dimension() const { return users.size() + creators.size(); }

  Eigen::MatrixXd iteration_matrix() const {
    const std::size_t n = users.size();
    const std::size_t m = creators.size();
    if (partition.n_users() != n || partition.n_creators() != m)
      throw std::invalid_argument("partition does not match populations");
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n + m), static_cast<Eigen::Index>(n + m));
    for (Index i = 0; i < n; ++i) {
      const double keep = 1.0 - users.stubbornness[i];
      const auto r = static_cast<Eigen::Index>(i);
      J(r, r) += keep * graph.self_weight(i);
      for (const auto& e : graph.in_edges(i)) J(r, static_cast<Eigen::Index>(e.source)) += keep * e.weight;
      J(r, static_cast<Eigen::Index>(n + partition.creator_of(i))) += keep * users.recommender_influence[i];
    }
    for (Index j = 0; j < m; ++j) {
      const double keep = 1.0 - creators.stubbornness[j];
      const auto r = static_cast<Eigen::Index>(n + j);
      const auto audience = partition.audience(j);
      if (audience.empty()) {
        J(r, r) += keep * (creators.self_influence[j] + creators.audience_influence[j]);
        continue;
      }
      J(r, r) += keep * creators.self_influence[j];
      const double per_user = creators.audience_influence[j] / static_cast<double>(audience.size());
      for (Index i : audience) J(r, static_cast<Eigen::Index>(i)) += keep * per_user;
    }
    return J;
  }

  // One column per topic.
  Eigen::MatrixXd affine_term() const {
    const std::size_t n = users.size();
    const std::size_t m = creators.size();
    const std::size_t topics = users.topics();
    Eigen::MatrixXd b(static_cast<Eigen::Index>(n + m), static_cast<Eigen::Index>(topics));
    for (Index i = 0; i < n; ++i)
      for (std::size_t k = 0; k < topics; ++k)
        b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = users.stubbornness[i] * users.prejudices(i, k);
    for (Index j = 0; j < m; ++j)
      for (std::size_t k = 0; k < topics; ++k)
        b(static_cast<Eigen::Index>(n + j), static_cast<Eigen::Index>(k)) =
            creators.stubbornness[j] * creators.prejudices(j, k);
    return b;
  }
};

// Power-iteration estimate of the spectral radius of a nonnegative matrix.
inline double spectral_radius(const Eigen::MatrixXd& J, std::size_t iterations = 200, double tol = 1e-8) {
  Eigen::VectorXd x = Eigen::VectorXd::Ones(J.rows());
  double rho = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const Eigen::VectorXd y = J * x;
    const double norm = y.lpNorm<Eigen::Infinity>();
    if (norm == 0.0) return 0.0;
    const double estimate = norm / x.lpNorm<Eigen::Infinity>();
    x = y / norm;
    const bool settled = it > 0 && std::abs(estimate - rho) < tol;
    rho = estimate;
    if (settled) break;
  }
  return rho;
}

struct Equilibrium {
  RowMatrix users;
  RowMatrix creators;
  double spectral_radius = 0.0;
};

// Unique fixed point (I - J)^{-1} [L u^0; G c^0] by dense LU.
inline Equilibrium closed_form_equilibrium(const FixedPointProblem& problem) {
  const Eigen::MatrixXd J = problem.iteration_matrix();
  Equilibrium eq;
  eq.spectral_radius = spectral_radius(J);
  if (eq.spectral_radius >= 1.0 - 1e-6)
    throw std::domain_error("frozen-partition system is not contractive (spectral radius " +
                            std::to_string(eq.spectral_radius) + ")");
  const Eigen::Index dim = J.rows();
  const Eigen::MatrixXd x =
      Eigen::PartialPivLU<Eigen::MatrixXd>(Eigen::MatrixXd::Identity(dim, dim) - J).solve(problem.affine_term());
  const std::size_t n = problem.users.size();
  const std::size_t m = problem.creators.size();
  const std::size_t topics = problem.users.topics();
  eq.users = RowMatrix(n, topics);
  eq.creators = RowMatrix(m, topics);
  for (Index i = 0; i < n; ++i)
    for (std::size_t k = 0; k < topics; ++k)
      eq.users(i, k) = x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  for (Index j = 0; j < m; ++j)
    for (std::size_t k = 0; k < topics; ++k)
      eq.creators(j, k) = x(static_cast<Eigen::Index>(n + j), static_cast<Eigen::Index>(k));
  return eq;
}

// Random stable instance: Bernoulli(0.2) social links, sampled parameters
// with every stubbornness >= floor, and a uniformly random frozen partition.
inline SimulationInput random_stable_instance(std::size_t n_users, std::size_t n_creators, std::size_t topics,
                                              double stubbornness_floor, Rng& rng, std::vector<Index>& assignment) {
  SimulationInput in;
  in.graph = SocialGraph(n_users);
  std::bernoulli_distribution link(0.2);
  for (Index i = 0; i < n_users; ++i)
    for (Index j = 0; j < n_users; ++j)
      if (i != j && link(rng)) in.graph.add_edge(j, i);
  ParameterBounds bounds = ParameterBounds::synthetic();
  bounds.user_stubbornness = {stubbornness_floor, 0.5};
  bounds.creator_stubbornness = {stubbornness_floor, 0.5};
  const auto p = sample_params(in.graph, n_creators, bounds, rng);
  in.users.opinions = init_opinions_uniform(n_users, topics, rng);
  in.users.prejudices = in.users.opinions;
  in.users.stubbornness = p.user_stubbornness;
  in.users.recommender_influence = p.recommender_influence;
  in.creators.opinions = init_opinions_uniform(n_creators, topics, rng);
  in.creators.prejudices = in.creators.opinions;
  in.creators.stubbornness = p.creator_stubbornness;
  in.creators.self_influence = p.creator_self_influence;
  in.creators.audience_influence = p.audience_influence;
  std::uniform_int_distribution<Index> pick(0, n_creators - 1);
  assignment.resize(n_users);
  for (auto& a : assignment) a = pick(rng);
  return in;
}

struct ComplementarityReport {
  Index user = 0;
  double epsilon = 0.0;
  double row_residual = 0.0;  // A_ii + sum_j A_ij + B_i - 1
  bool row_identity_holds = false;
  double shift = 0.0;       // ||u*_i(eps) - u*_i(0)||
  double projection = 0.0;  // shift projected on (c*_j - neighbor mean)
  bool moved_toward_neighbors = false;
  bool ok() const { return row_identity_holds && moved_toward_neighbors; }
};

// Moves epsilon of user i's recommender weight onto its social weights
// (proportionally to the existing edge weights) and compares equilibria.
// Moving toward the neighborhood means a negative projection on the
// creator-minus-neighbors direction.
inline ComplementarityReport complementarity_check(const FixedPointProblem& problem, Index user, double epsilon) {
  const auto in = problem.graph.in_edges(user);
  if (in.empty()) throw std::invalid_argument("complementarity check needs a user with at least one neighbor");
  const double b = problem.users.recommender_influence.at(user);
  if (!(epsilon >= 0.0) || epsilon > b) throw std::invalid_argument("epsilon must be in [0, B_i]");

  ComplementarityReport report;
  report.user = user;
  report.epsilon = epsilon;
  report.row_residual = problem.graph.self_weight(user) + problem.graph.in_weight_sum(user) + b - 1.0;
  report.row_identity_holds = std::abs(report.row_residual) <= 1e-12;

  FixedPointProblem shifted = problem;
  const double mass = problem.graph.in_weight_sum(user);
  for (std::size_t e = 0; e < in.size(); ++e) {
    const double share = mass > 0.0 ? in[e].weight / mass : 1.0 / static_cast<double>(in.size());
    shifted.graph.set_in_weight(user, e, in[e].weight + epsilon * share);
  }
  shifted.users.recommender_influence[user] = b - epsilon;

  const Equilibrium base = closed_form_equilibrium(problem);
  const Equilibrium moved = closed_form_equilibrium(shifted);
  const std::size_t topics = problem.users.topics();
  std::vector<double> neighbor_mean(topics, 0.0);
  for (const auto& e : in)
    for (std::size_t k = 0; k < topics; ++k) neighbor_mean[k] += base.users(e.source, k) / static_cast<double>(in.size());
  const auto creator = base.creators.row(problem.partition.creator_of(user));
  double shift_sq = 0.0;
  for (std::size_t k = 0; k < topics; ++k) {
    const double delta = moved.users(user, k) - base.users(user, k);
    shift_sq += delta * delta;
    report.projection += delta * (creator[k] - neighbor_mean[k]);
  }
  report.shift = std::sqrt(shift_sq);
  report.moved_toward_neighbors = epsilon == 0.0 ? report.shift == 0.0 : report.projection < 0.0;
  return report;
}

struct AlphaTrace {
  double eta = 0.0;
  std::vector<double> alpha;  // alpha^0 .. alpha^steps
  bool within_bounds = true;  // every iterate in [eta, 1]
  bool non_decreasing = true;
};

// alpha^{t+1} = 1 + eta - eta / alpha^t, evaluated as
// alpha + (alpha - eta)(1 - alpha) / alpha so eta and 1 are exact fixed points.
inline AlphaTrace alpha_recursion(double eta, double alpha0, std::size_t steps) {
  if (!(eta > 0.0 && eta < 1.0)) throw std::invalid_argument("eta must be in (0, 1)");
  if (!(alpha0 >= eta && alpha0 <= 1.0)) throw std::invalid_argument("alpha0 must be in [eta, 1]");
  AlphaTrace trace;
  trace.eta = eta;
  trace.alpha.reserve(steps + 1);
  trace.alpha.push_back(alpha0);
  for (std::size_t t = 0; t < steps; ++t) {
    const double a = trace.alpha.back();
    const double next = a + (a - eta) * (1.0 - a) / a;
    if (next < a) trace.non_decreasing = false;
    if (next < eta || next > 1.0) trace.within_bounds = false;
    trace.alpha.push_back(next);
  }
  return trace;
}

struct Lemma1Report {
  std::size_t steps = 0;
  bool partition_static = true;
  bool distances_non_increasing = true;
  bool ratios_within_bounds = true;
  double min_ratio_slack = 0.0;  // min over users/steps of ratio - eta_i
  double max_ratio = 0.0;
  std::vector<std::string> violations;
  bool ok() const { return partition_static && distances_non_increasing && ratios_within_bounds; }
};

// No user-user edges, stubborn creators, positive self weights, B_i = 1 - A_ii.
inline SimulationInput make_lemma1_instance(std::size_t n_users, std::size_t n_creators, std::size_t topics, Rng& rng) {
  std::uniform_real_distribution<double> opinion(-1.0, 1.0);
  std::uniform_real_distribution<double> stubborn(0.0, 0.5);
  std::uniform_real_distribution<double> self(0.5, 0.8);
  SimulationInput in;
  in.graph = SocialGraph(n_users);
  in.users.opinions = RowMatrix(n_users, topics);
  for (double& x : in.users.opinions.values()) x = opinion(rng);
  in.users.prejudices = in.users.opinions;
  in.users.stubbornness.resize(n_users);
  in.users.recommender_influence.resize(n_users);
  for (Index i = 0; i < n_users; ++i) {
    in.users.stubbornness[i] = stubborn(rng);
    const double a = self(rng);
    in.graph.set_self_weight(i, a);
    in.users.recommender_influence[i] = 1.0 - a;
  }
  in.creators.opinions = RowMatrix(n_creators, topics);
  for (double& x : in.creators.opinions.values()) x = opinion(rng);
  in.creators.prejudices = in.creators.opinions;
  in.creators.stubbornness.assign(n_creators, 1.0);
  in.creators.self_influence.resize(n_creators);
  in.creators.audience_influence.resize(n_creators);
  for (Index j = 0; j < n_creators; ++j) {
    in.creators.self_influence[j] = self(rng);
    in.creators.audience_influence[j] = 1.0 - in.creators.self_influence[j];
  }
  return in;
}

// Runs the scenario and checks: partition fixed after t = 0, each user's
// distance to its creator never grows, and the per-step contraction ratio
// stays in [eta_i, 1] with eta_i = (1 - L_i) A_ii.
inline Lemma1Report lemma1_scenario_check(SimulationInput input, std::size_t horizon, std::uint64_t seed,
                                          double tol = 1e-12) {
  if (input.graph.n_edges() != 0) throw std::invalid_argument("scenario requires a diagonal social matrix");
  for (double g : input.creators.stubbornness)
    if (g != 1.0) throw std::invalid_argument("scenario requires fully stubborn creators");

  const std::size_t n = input.users.size();
  std::vector<double> eta(n);
  for (Index i = 0; i < n; ++i) eta[i] = (1.0 - input.users.stubbornness[i]) * input.graph.self_weight(i);

  SimulationOptions options;
  options.recommender = {.hops = 0, .k = 1, .temperature = 0.5, .score_basis = ScoreBasis::distance_to_user};
  options.horizon = horizon;
  options.seed = seed;
  options.metrics_every = 0;

  Lemma1Report report;
  report.min_ratio_slack = std::numeric_limits<double>::infinity();
  std::vector<Index> first;
  std::vector<double> previous;
  const auto note = [&](std::string msg) {
    if (report.violations.size() < 20) report.violations.push_back(std::move(msg));
  };

  Simulation sim(std::move(input), options);
  sim.run([&](const StepView& v) {
    report.steps = v.t;
    const auto assignment = v.partition.assignment();
    if (v.t == 0) {
      first.assign(assignment.begin(), assignment.end());
      previous.assign(v.distances.begin(), v.distances.end());
      return;
    }
    if (!std::equal(first.begin(), first.end(), assignment.begin())) {
      if (report.partition_static) note("partition changed at t=" + std::to_string(v.t));
      report.partition_static = false;
    }
    for (Index i = 0; i < n; ++i) {
      const double now = v.distances[i];
      if (now > previous[i] * (1.0 + tol)) {
        report.distances_non_increasing = false;
        note("distance of user " + std::to_string(i) + " grew at t=" + std::to_string(v.t));
      }
      if (previous[i] > 0.0) {
        const double ratio = now / previous[i];
        report.min_ratio_slack = std::min(report.min_ratio_slack, ratio - eta[i]);
        report.max_ratio = std::max(report.max_ratio, ratio);
        if (ratio < eta[i] - tol || ratio > 1.0 + tol) {
          report.ratios_within_bounds = false;
          note("ratio " + std::to_string(ratio) + " of user " + std::to_string(i) + " outside [eta,1] at t=" +
               std::to_string(v.t));
        }
      }
      previous[i] = now;
    }
  });
  return report;
}

}  // namespace recsim::theory
