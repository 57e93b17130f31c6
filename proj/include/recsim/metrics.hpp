#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "recsim/matrix.hpp"

namespace recsim {

// ---------------------------------------------------------------------------
// Satisfaction

struct ConsumptionRecord {
  Index creator;
  double distance;  // ||u_i^t - c_{creator}^t||
};

// Per-step, per-user record of what was consumed and how far it was.
class ConsumptionLog {
 public:
  explicit ConsumptionLog(std::size_t n_users = 0) : n_users_(n_users) {}

  void append(std::vector<ConsumptionRecord> step) {
    if (step.size() != n_users_) throw std::invalid_argument("consumption step must cover every user");
    steps_.push_back(std::move(step));
  }

  std::size_t n_users() const noexcept { return n_users_; }
  std::size_t n_steps() const noexcept { return steps_.size(); }
  const ConsumptionRecord& at(std::size_t t, Index user) const { return steps_.at(t).at(user); }

  std::vector<double> distances_of(Index user) const {
    std::vector<double> d;
    d.reserve(steps_.size());
    for (const auto& s : steps_) d.push_back(s.at(user).distance);
    return d;
  }

 private:
  std::size_t n_users_;
  std::vector<std::vector<ConsumptionRecord>> steps_;
};

// Negative mean distance to the content actually consumed at each step.
inline double user_satisfaction(std::span<const double> distances) {
  if (distances.empty()) throw std::invalid_argument("satisfaction needs a nonempty consumption log");
  double s = 0.0;
  for (double d : distances) s += d;
  return -s / static_cast<double>(distances.size());
}

struct MeanVariance {
  double mean = 0.0;
  double variance = 0.0;  // population variance over users
};

inline MeanVariance mean_variance(std::span<const double> xs) {
  MeanVariance mv;
  if (xs.empty()) return mv;
  for (double x : xs) mv.mean += x;
  mv.mean /= static_cast<double>(xs.size());
  for (double x : xs) mv.variance += (x - mv.mean) * (x - mv.mean);
  mv.variance /= static_cast<double>(xs.size());
  return mv;
}

inline MeanVariance global_satisfaction(const ConsumptionLog& log) {
  std::vector<double> per_user(log.n_users());
  for (Index i = 0; i < log.n_users(); ++i) per_user[i] = user_satisfaction(log.distances_of(i));
  return mean_variance(per_user);
}

// ---------------------------------------------------------------------------
// k-means

struct ClusterModel {
  std::size_t k = 0;
  RowMatrix centroids;
  std::vector<Index> labels;
  double distortion = 0.0;  // sum of squared distances to assigned centroid
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t max_iter = 300;
  double tol = 1e-6;
};

namespace detail {

inline Index nearest_centroid(std::span<const double> p, const RowMatrix& centroids, double* best_sq = nullptr) {
  Index best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < centroids.rows(); ++c) {
    const double d = squared_distance(p, centroids.row(c));
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (best_sq) *best_sq = best_d;
  return best;
}

// k-means++ seeding.
inline RowMatrix seed_centroids(const RowMatrix& points, std::size_t k, Rng& rng) {
  const std::size_t n = points.rows();
  RowMatrix centroids(k, points.cols());
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  std::vector<bool> taken(n, false);
  Index pick = first(rng);
  taken[pick] = true;
  std::copy_n(points.row(pick).begin(), points.cols(), centroids.row(0).begin());
  std::vector<double> d2(n);
  for (Index i = 0; i < n; ++i) d2[i] = squared_distance(points.row(i), centroids.row(0));
  for (std::size_t c = 1; c < k; ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    if (total > 0.0) {
      std::discrete_distribution<std::size_t> weighted(d2.begin(), d2.end());
      pick = weighted(rng);
    } else {
      // All remaining points coincide with a centroid; take the first unused.
      pick = static_cast<Index>(std::find(taken.begin(), taken.end(), false) - taken.begin());
      if (pick >= n) pick = 0;
    }
    taken[pick] = true;
    std::copy_n(points.row(pick).begin(), points.cols(), centroids.row(c).begin());
    for (Index i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(points.row(i), centroids.row(c)));
  }
  return centroids;
}

}  // namespace detail

// Lloyd's algorithm from a k-means++ start. Stops when no centroid moves by
// tol or more, or after max_iter sweeps. Empty clusters are re-seeded at the
// point farthest from its centroid.
inline ClusterModel kmeans(const RowMatrix& points, std::size_t k, Rng& rng, KMeansOptions options = {}) {
  const std::size_t n = points.rows();
  const std::size_t dim = points.cols();
  if (k < 1) throw std::invalid_argument("k-means needs k >= 1");
  if (k > n) throw std::invalid_argument("k-means needs k <= number of points");

  ClusterModel model;
  model.k = k;
  model.centroids = detail::seed_centroids(points, k, rng);
  model.labels.assign(n, 0);
  std::vector<double> sq(n);
  std::vector<std::size_t> counts(k);
  RowMatrix sums(k, dim);

  for (model.iterations = 1; model.iterations <= options.max_iter; ++model.iterations) {
    for (Index i = 0; i < n; ++i) model.labels[i] = detail::nearest_centroid(points.row(i), model.centroids, &sq[i]);

    std::fill(counts.begin(), counts.end(), 0);
    std::fill(sums.values().begin(), sums.values().end(), 0.0);
    for (Index i = 0; i < n; ++i) {
      ++counts[model.labels[i]];
      auto s = sums.row(model.labels[i]);
      const auto p = points.row(i);
      for (std::size_t d = 0; d < dim; ++d) s[d] += p[d];
    }

    for (Index c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      const Index far = static_cast<Index>(std::max_element(sq.begin(), sq.end()) - sq.begin());
      const Index old = model.labels[far];
      auto s_old = sums.row(old);
      auto s_new = sums.row(c);
      const auto p = points.row(far);
      for (std::size_t d = 0; d < dim; ++d) {
        s_old[d] -= p[d];
        s_new[d] = p[d];
      }
      --counts[old];
      counts[c] = 1;
      model.labels[far] = c;
      sq[far] = 0.0;
    }

    double shift = 0.0;
    for (Index c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // donor emptied by re-seeding; keep position
      auto centroid = model.centroids.row(c);
      double moved = 0.0;
      for (std::size_t d = 0; d < dim; ++d) {
        const double v = sums(c, d) / static_cast<double>(counts[c]);
        moved += (v - centroid[d]) * (v - centroid[d]);
        centroid[d] = v;
      }
      shift = std::max(shift, std::sqrt(moved));
    }
    if (shift < options.tol) break;
  }
  model.iterations = std::min(model.iterations, options.max_iter);

  model.distortion = 0.0;
  for (Index i = 0; i < n; ++i) {
    model.labels[i] = detail::nearest_centroid(points.row(i), model.centroids, &sq[i]);
    model.distortion += sq[i];
  }
  return model;
}

// ---------------------------------------------------------------------------
// Silhouette

inline std::size_t count_clusters(std::span<const Index> labels) {
  std::vector<Index> seen(labels.begin(), labels.end());
  std::sort(seen.begin(), seen.end());
  return static_cast<std::size_t>(std::unique(seen.begin(), seen.end()) - seen.begin());
}

namespace detail {

// s = (b - a) / max(a, b) given the per-cluster distance sums of one point.
inline double silhouette_from_sums(Index own, std::span<const double> sums, std::span<const std::size_t> sizes) {
  if (sizes[own] <= 1) return 0.0;
  const double a = sums[own] / static_cast<double>(sizes[own] - 1);
  double b = std::numeric_limits<double>::infinity();
  for (Index c = 0; c < sizes.size(); ++c) {
    if (c == own || sizes[c] == 0) continue;
    b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
  }
  const double denom = std::max(a, b);
  return denom > 0.0 ? (b - a) / denom : 0.0;
}

inline std::size_t label_span(std::span<const Index> labels) {
  return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
}

}  // namespace detail

// Silhouette of a single point. Singleton clusters score 0.
inline double silhouette(Index i, const RowMatrix& points, std::span<const Index> labels) {
  if (labels.size() != points.rows()) throw std::invalid_argument("one label per point required");
  if (i >= points.rows()) throw std::out_of_range("point index out of range");
  if (count_clusters(labels) < 2) throw std::invalid_argument("silhouette needs at least two clusters");
  const std::size_t n_labels = detail::label_span(labels);
  std::vector<double> sums(n_labels, 0.0);
  std::vector<std::size_t> sizes(n_labels, 0);
  for (Index j = 0; j < points.rows(); ++j) {
    ++sizes[labels[j]];
    if (j != i) sums[labels[j]] += distance(points.row(i), points.row(j));
  }
  return detail::silhouette_from_sums(labels[i], sums, sizes);
}

// Symmetric pairwise Euclidean distances, row-major n x n.
inline std::vector<double> pairwise_distances(const RowMatrix& points) {
  const std::size_t n = points.rows();
  std::vector<double> d(n * n, 0.0);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) d[i * n + j] = d[j * n + i] = distance(points.row(i), points.row(j));
  return d;
}

// All silhouettes from a precomputed distance matrix.
inline std::vector<double> silhouette_values(std::span<const double> dist, std::size_t n,
                                             std::span<const Index> labels) {
  if (labels.size() != n || dist.size() != n * n) throw std::invalid_argument("distance matrix / label size mismatch");
  if (count_clusters(labels) < 2) throw std::invalid_argument("silhouette needs at least two clusters");
  const std::size_t n_labels = detail::label_span(labels);
  std::vector<std::size_t> sizes(n_labels, 0);
  for (Index l : labels) ++sizes[l];
  std::vector<double> out(n);
  std::vector<double> sums(n_labels);
  for (Index i = 0; i < n; ++i) {
    std::fill(sums.begin(), sums.end(), 0.0);
    const double* row = dist.data() + i * n;
    for (Index j = 0; j < n; ++j) sums[labels[j]] += row[j];
    out[i] = detail::silhouette_from_sums(labels[i], sums, sizes);
  }
  return out;
}

inline std::vector<double> silhouette_values(const RowMatrix& points, std::span<const Index> labels) {
  return silhouette_values(pairwise_distances(points), points.rows(), labels);
}

// ---------------------------------------------------------------------------
// Global clusterization

struct ClusteringOptions {
  std::size_t k_min = 2;
  std::size_t k_max = 10;  // clipped to N - 1 (but never below k_min)
  std::size_t restarts = 3;
  KMeansOptions kmeans;
};

struct Clusterization {
  double value = 0.0;  // mean silhouette of the selected clustering
  std::size_t chosen_k = 0;
  ClusterModel model;
  std::vector<double> silhouettes;
  double variance = 0.0;  // of per-point silhouettes
};

// Runs k-means over a range of k (best-of-restarts by distortion) and keeps
// the k with the highest mean silhouette. Points are visited in
// lexicographic order internally so the result does not depend on input order.
inline Clusterization global_clusterization(const RowMatrix& points, std::uint64_t seed,
                                            const ClusteringOptions& options = {}) {
  const std::size_t n = points.rows();
  if (n < 2) throw std::invalid_argument("clusterization needs at least two points");
  const std::size_t k_lo = std::max<std::size_t>(options.k_min, 2);
  const std::size_t k_hi = std::min(n, std::max(k_lo, std::min(options.k_max, n - 1)));
  if (k_lo > k_hi) throw std::invalid_argument("empty k range");

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    const auto ra = points.row(a), rb = points.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  RowMatrix sorted(n, points.cols());
  for (Index s = 0; s < n; ++s) std::copy_n(points.row(order[s]).begin(), points.cols(), sorted.row(s).begin());
  const auto dist = pairwise_distances(sorted);

  Clusterization best;
  best.value = -std::numeric_limits<double>::infinity();
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    ClusterModel model;
    for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1); ++r) {
      Rng rng = make_rng(seed, {k, r});
      ClusterModel candidate = kmeans(sorted, k, rng, options.kmeans);
      if (r == 0 || candidate.distortion < model.distortion) model = std::move(candidate);
    }
    std::vector<double> sil;
    double mean = 0.0;
    if (count_clusters(model.labels) >= 2) {
      sil = silhouette_values(dist, n, model.labels);
      mean = mean_variance(sil).mean;
    } else {
      sil.assign(n, 0.0);  // every point coincides: no structure
    }
    if (mean > best.value) {
      best.value = mean;
      best.chosen_k = k;
      best.model = std::move(model);
      best.silhouettes = std::move(sil);
    }
  }

  // Map back to caller order.
  std::vector<Index> labels(n);
  std::vector<double> sil(n);
  for (Index s = 0; s < n; ++s) {
    labels[order[s]] = best.model.labels[s];
    sil[order[s]] = best.silhouettes[s];
  }
  best.model.labels = std::move(labels);
  best.silhouettes = std::move(sil);
  best.variance = mean_variance(best.silhouettes).variance;
  return best;
}

}  // namespace recsim
