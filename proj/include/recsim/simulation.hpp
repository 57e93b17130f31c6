#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "recsim/dynamics.hpp"
#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"
#include "recsim/metrics.hpp"
#include "recsim/recommender.hpp"

namespace recsim {

struct SimulationInput {
  SocialGraph graph;
  UserPopulation users;
  CreatorPopulation creators;
};

struct SimulationOptions {
  RecommenderConfig recommender;
  std::size_t horizon = 50;
  std::uint64_t seed = 0;
  std::size_t metrics_every = 1;  // 0: no metric rows at all
  bool clusterization = true;
  ClusteringOptions clustering;
  // When set, every step uses this assignment and the recommender is bypassed.
  std::optional<std::vector<Index>> fixed_assignment;
  // Slack on the [-1, 1] convexity check, for inputs that already sit on the
  // boundary (clamped prejudices).
  double bound_tolerance = 0.0;
};

struct StepMetrics {
  std::size_t t = 0;
  double sat_running = 0.0;   // mean over users of -(1/(t+1)) sum_{s<=t} d_i^s
  double sat_instant = 0.0;   // mean over users of -d_i^t
  double clusterization = 0.0;
  std::size_t chosen_k = 0;
  double sat_variance = 0.0;  // over users, of the running satisfaction
  double sil_variance = 0.0;  // over users, of the silhouettes
};

// Everything known at time t once the step-t consumption has been sampled.
struct StepView {
  std::size_t t;
  const RowMatrix& users;
  const RowMatrix& creators;
  const Partition& partition;
  std::span<const double> distances;
  const StepMetrics* metrics;         // null when no metrics row is due
  const Clusterization* clustering;   // null unless clusterization was computed
};

class InvariantViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Closed-loop user / creator / recommender dynamics. Each step: references
// and candidate sets from the time-t state, one sampled creator per user,
// the partition, then synchronous user and creator updates.
class Simulation {
 public:
  using Observer = std::function<void(const StepView&)>;

  Simulation(SimulationInput input, SimulationOptions options)
      : input_(std::move(input)),
        options_(std::move(options)),
        recommender_(input_.graph, options_.recommender),
        cumulative_(input_.users.size(), 0.0) {
    const auto& users = input_.users;
    const auto& creators = input_.creators;
    if (users.size() == 0 || creators.size() == 0) throw std::invalid_argument("need at least one user and one creator");
    if (users.topics() != creators.topics()) throw std::invalid_argument("users and creators disagree on topic count");
    if (input_.graph.n_users() != users.size()) throw std::invalid_argument("graph size does not match user count");
    options_.recommender.validate(creators.size());
    if (options_.fixed_assignment && options_.fixed_assignment->size() != users.size())
      throw std::invalid_argument("fixed assignment must name one creator per user");
    const auto rows = validate_rows(input_.graph, users.recommender_influence);
    if (!rows.ok())
      throw std::invalid_argument("influence row of user " + std::to_string(rows.failing.front()) +
                                  " is not stochastic");
  }

  const SimulationInput& state() const noexcept { return input_; }
  const SimulationOptions& options() const noexcept { return options_; }

  std::vector<Index> sample_assignment(std::size_t t) const {
    if (options_.fixed_assignment) return *options_.fixed_assignment;
    const auto& u = input_.users.opinions;
    const auto& c = input_.creators.opinions;
    std::vector<Index> choice(u.rows());
    for (Index i = 0; i < u.rows(); ++i) {
      Rng rng = make_rng(options_.seed, {0x5e1ec7ULL, t, i});
      choice[i] = recommender_.choose(u, c, i, rng);
    }
    return choice;
  }

  void run(const Observer& observer = {}) {
    auto& users = input_.users;
    auto& creators = input_.creators;
    const std::size_t n = users.size();
    std::vector<double> dist(n);
    std::vector<double> running(n);

    for (std::size_t t = 0;; ++t) {
      const Partition partition(sample_assignment(t), creators.size());
      for (Index i = 0; i < n; ++i) {
        dist[i] = distance(users.opinions.row(i), creators.opinions.row(partition.creator_of(i)));
        cumulative_[i] += dist[i];
      }

      std::optional<StepMetrics> metrics;
      std::optional<Clusterization> clusters;
      if (options_.metrics_every > 0 && t % options_.metrics_every == 0) {
        metrics.emplace();
        metrics->t = t;
        for (Index i = 0; i < n; ++i) running[i] = -cumulative_[i] / static_cast<double>(t + 1);
        const auto sat = mean_variance(running);
        metrics->sat_running = sat.mean;
        metrics->sat_variance = sat.variance;
        double inst = 0.0;
        for (double d : dist) inst -= d;
        metrics->sat_instant = inst / static_cast<double>(n);
        if (options_.clusterization && n >= 2) {
          clusters = global_clusterization(users.opinions, derive_seed(options_.seed, {0xc1a55ULL, t}),
                                           options_.clustering);
          metrics->clusterization = clusters->value;
          metrics->chosen_k = clusters->chosen_k;
          metrics->sil_variance = clusters->variance;
        }
      }

      if (observer) {
        observer(StepView{t, users.opinions, creators.opinions, partition, dist, metrics ? &*metrics : nullptr,
                          clusters ? &*clusters : nullptr});
      }
      if (t == options_.horizon) break;

      RowMatrix next_users = user_step(users, input_.graph, creators, partition);
      RowMatrix next_creators = creator_step(creators, users, partition);
      users.opinions = std::move(next_users);
      creators.opinions = std::move(next_creators);
      check_bounds(t + 1);
    }
  }

 private:
  void check_bounds(std::size_t t) const {
    const double excess = std::max(bound_excess(input_.users.opinions), bound_excess(input_.creators.opinions));
    if (excess > options_.bound_tolerance)
      throw InvariantViolation("opinion left [-1,1] at t=" + std::to_string(t) + " by " + std::to_string(excess));
  }

  SimulationInput input_;
  SimulationOptions options_;
  Recommender recommender_;
  std::vector<double> cumulative_;
};

// Full in-memory record of a run, one entry per t = 0..T.
struct Trajectory {
  std::vector<RowMatrix> users;
  std::vector<RowMatrix> creators;
  std::vector<Partition> partitions;
  ConsumptionLog consumption;
  std::vector<StepMetrics> metrics;
};

inline Trajectory simulate(SimulationInput input, SimulationOptions options) {
  Trajectory traj;
  traj.consumption = ConsumptionLog(input.users.size());
  Simulation sim(std::move(input), std::move(options));
  sim.run([&](const StepView& v) {
    traj.users.push_back(v.users);
    traj.creators.push_back(v.creators);
    traj.partitions.push_back(v.partition);
    std::vector<ConsumptionRecord> step(v.distances.size());
    for (Index i = 0; i < step.size(); ++i) step[i] = {v.partition.creator_of(i), v.distances[i]};
    traj.consumption.append(std::move(step));
    if (v.metrics) traj.metrics.push_back(*v.metrics);
  });
  return traj;
}

}  // namespace recsim
