#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "recsim/graph.hpp"
#include "recsim/matrix.hpp"
#include "recsim/metrics.hpp"

namespace recsim {

struct LoadedGraph {
  SocialGraph graph;
  std::vector<std::int64_t> original_ids;  // dense index -> id in the file
};

// SNAP-style edge list: one "a b" pair per line, '#' comments. Each line is
// an undirected friendship and becomes both directed edges. Duplicates and
// self-loops are dropped. Dense indices follow ascending original id.
inline LoadedGraph parse_edge_list(std::istream& in) {
  std::set<std::pair<std::int64_t, std::int64_t>> pairs;
  std::set<std::int64_t> ids;
  std::string line;
  std::size_t line_no = 0;
  const auto parse_id = [&](std::string_view tok) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size())
      throw std::runtime_error("malformed edge list line " + std::to_string(line_no) + ": '" + std::string(tok) +
                               "' is not an integer");
    return v;
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string a, b, extra;
    if (!(fields >> a >> b) || (fields >> extra))
      throw std::runtime_error("malformed edge list line " + std::to_string(line_no) + ": expected two node ids");
    const std::int64_t u = parse_id(a);
    const std::int64_t v = parse_id(b);
    ids.insert(u);
    ids.insert(v);
    if (u != v) pairs.insert(std::minmax(u, v));
  }
  if (ids.empty()) throw std::runtime_error("edge list contains no edges");

  LoadedGraph out;
  out.original_ids.assign(ids.begin(), ids.end());
  std::map<std::int64_t, Index> dense;
  for (Index i = 0; i < out.original_ids.size(); ++i) dense[out.original_ids[i]] = i;
  out.graph = SocialGraph(out.original_ids.size());
  for (const auto& [u, v] : pairs) {
    out.graph.add_edge(dense[u], dense[v]);
    out.graph.add_edge(dense[v], dense[u]);
  }
  return out;
}

inline LoadedGraph load_edge_list(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list " + path.string());
  return parse_edge_list(in);
}

struct CommunityAssignment {
  std::vector<Index> community;  // per user, in 0..K-1
  std::size_t n_communities = 0;
};

struct SpectralOptions {
  double tol = 1e-6;
  std::size_t max_iter = 2000;
  std::size_t oversample = 10;  // extra block columns beyond K
  std::uint64_t seed = 0;
  std::size_t kmeans_restarts = 5;
};

struct LaplacianEigenpairs {
  std::vector<double> eigenvalues;  // ascending
  RowMatrix vectors;                // N x K, columns are unit eigenvectors
  std::size_t iterations = 0;
  double max_residual = 0.0;        // max_k ||L v_k - lambda_k v_k||
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

// Symmetric 0/1 skeleton of the graph, edge direction ignored.
inline std::vector<std::vector<Index>> undirected_skeleton(const SocialGraph& graph) {
  const std::size_t n = graph.n_users();
  std::vector<std::vector<Index>> adj(n);
  for (Index i = 0; i < n; ++i) {
    for (const auto& e : graph.in_edges(i)) {
      adj[i].push_back(e.source);
      adj[e.source].push_back(i);
    }
  }
  for (auto& a : adj) {
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
  }
  return adj;
}

}  // namespace detail

// The K smallest eigenpairs of L = I - D^{-1/2} W D^{-1/2} by orthogonal
// iteration with Rayleigh-Ritz on the shifted operator 2I - L, whose spectrum
// is reversed and nonnegative. Isolated vertices get L_ii = 1.
inline LaplacianEigenpairs smallest_laplacian_eigenpairs(const SocialGraph& graph, std::size_t K,
                                                         const SpectralOptions& options = {}) {
  const auto adj = detail::undirected_skeleton(graph);
  const Eigen::Index n = static_cast<Eigen::Index>(adj.size());
  if (K < 1 || static_cast<Eigen::Index>(K) > n) throw std::invalid_argument("need 1 <= K <= N eigenpairs");

  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double di = static_cast<double>(adj[i].size());
    for (Index j : adj[i])
      entries.emplace_back(i, static_cast<Eigen::Index>(j), 1.0 / std::sqrt(di * static_cast<double>(adj[j].size())));
  }
  Eigen::SparseMatrix<double, Eigen::RowMajor> normalized(n, n);
  normalized.setFromTriplets(entries.begin(), entries.end());

  // (2I - L) X = X + D^{-1/2} W D^{-1/2} X
  const auto apply = [&](const Eigen::MatrixXd& X) -> Eigen::MatrixXd { return X + normalized * X; };

  const Eigen::Index block = std::min<Eigen::Index>(n, static_cast<Eigen::Index>(K + options.oversample));
  Rng rng(derive_seed(options.seed, {0x5bec7ULL}));
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd Q(n, block);
  for (Eigen::Index c = 0; c < block; ++c)
    for (Eigen::Index r = 0; r < n; ++r) Q(r, c) = gauss(rng);
  Q = Eigen::HouseholderQR<Eigen::MatrixXd>(Q).householderQ() * Eigen::MatrixXd::Identity(n, block);

  LaplacianEigenpairs out;
  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    const Eigen::MatrixXd Z = apply(Q);
    const Eigen::MatrixXd H = Q.transpose() * Z;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (H + H.transpose()));
    // Eigen sorts ascending; the largest Ritz values of 2I - L come last.
    Eigen::MatrixXd V = ritz.eigenvectors().rowwise().reverse();
    Eigen::VectorXd theta = ritz.eigenvalues().reverse();
    const Eigen::MatrixXd X = Q * V;
    const Eigen::MatrixXd MX = Z * V;

    double worst = 0.0;
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(K); ++c)
      worst = std::max(worst, (MX.col(c) - theta(c) * X.col(c)).norm());

    out.iterations = it;
    out.max_residual = worst;
    if (worst <= options.tol) {
      out.eigenvalues.resize(K);
      out.vectors = RowMatrix(static_cast<std::size_t>(n), K);
      for (std::size_t c = 0; c < K; ++c) {
        out.eigenvalues[c] = 2.0 - theta(static_cast<Eigen::Index>(c));
        const Eigen::VectorXd v = X.col(static_cast<Eigen::Index>(c)).normalized();
        for (Eigen::Index r = 0; r < n; ++r) out.vectors(static_cast<Index>(r), c) = v(r);
      }
      return out;
    }
    Q = Eigen::HouseholderQR<Eigen::MatrixXd>(MX).householderQ() * Eigen::MatrixXd::Identity(n, block);
  }
  throw ConvergenceError("Laplacian eigensolver did not converge in " + std::to_string(options.max_iter) +
                         " iterations (residual " + std::to_string(out.max_residual) + ")");
}

// Spectral clustering: row-normalized K-dimensional Laplacian embedding, then
// k-means with k = K (best of a few restarts).
inline CommunityAssignment spectral_communities(const SocialGraph& graph, std::size_t K,
                                                const SpectralOptions& options = {}) {
  const std::size_t n = graph.n_users();
  if (K < 1) throw std::invalid_argument("need at least one community");
  if (K > n) throw std::invalid_argument("more communities than users");
  CommunityAssignment out;
  out.n_communities = K;
  if (K == 1) {
    out.community.assign(n, 0);
    return out;
  }
  const auto eig = smallest_laplacian_eigenpairs(graph, K, options);
  RowMatrix embedding = eig.vectors;
  for (Index i = 0; i < n; ++i) {
    auto r = embedding.row(i);
    double norm = 0.0;
    for (double x : r) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (double& x : r) x /= norm;
  }
  ClusterModel best;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.kmeans_restarts, 1); ++r) {
    Rng rng = make_rng(options.seed, {0xc1057ULL, r});
    ClusterModel m = kmeans(embedding, K, rng);
    if (r == 0 || m.distortion < best.distortion) best = std::move(m);
  }
  out.community = std::move(best.labels);
  return out;
}

inline RowMatrix sample_community_centers(std::size_t K, std::size_t n_topics, Rng& rng) {
  RowMatrix centers(K, n_topics);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& x : centers.values()) x = u(rng);
  return centers;
}

// u_i^0 = center(community(i)) + N(0, sigma^2) per coordinate, clamped to [-1, 1].
inline RowMatrix init_opinions_from_communities(const CommunityAssignment& assignment, const RowMatrix& centers,
                                                double sigma, Rng& rng) {
  if (centers.rows() < assignment.n_communities) throw std::invalid_argument("missing community centers");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
  RowMatrix u(assignment.community.size(), centers.cols());
  std::normal_distribution<double> noise(0.0, sigma > 0.0 ? sigma : 1.0);
  for (Index i = 0; i < u.rows(); ++i) {
    const auto c = centers.row(assignment.community[i]);
    auto out = u.row(i);
    for (std::size_t k = 0; k < out.size(); ++k) {
      const double eps = sigma > 0.0 ? noise(rng) : 0.0;
      out[k] = std::clamp(c[k] + eps, -1.0, 1.0);
    }
  }
  return u;
}

}  // namespace recsim
