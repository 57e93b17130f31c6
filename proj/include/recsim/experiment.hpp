#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "recsim/graph.hpp"
#include "recsim/ingest.hpp"
#include "recsim/metrics.hpp"
#include "recsim/recommender.hpp"
#include "recsim/simulation.hpp"
#include "recsim/synthgen.hpp"
#include "recsim/theory.hpp"

namespace recsim {

using json = nlohmann::ordered_json;

inline constexpr int kConfigSchemaVersion = 1;

enum class GraphSource { homophily, edge_list };
enum class ParameterMode { table1, table4 };

struct GraphConfig {
  GraphSource source = GraphSource::homophily;
  double delta = 9.0;
  HomophilyKernel kernel = HomophilyKernel::distance;
  std::string path;              // edge_list
  std::size_t communities = 34;  // edge_list
  double sigma = 0.15;           // edge_list
};

struct ExperimentConfig {
  std::size_t n_users = 600;
  std::size_t n_creators = 50;
  std::size_t n_topics = 2;
  std::size_t horizon = 50;
  RecommenderConfig recommender{.hops = 0, .k = 5, .temperature = 0.5, .score_basis = ScoreBasis::distance_to_user};
  GraphConfig graph;
  ParameterMode parameter_mode = ParameterMode::table1;
  std::optional<ParameterBounds> bounds;  // overrides the parameter_mode defaults
  std::uint64_t seed = 1;
  std::size_t metrics_every = 1;
  std::vector<std::size_t> snapshot_times;  // empty: {0, horizon}
  ClusteringOptions clustering;

  std::vector<std::size_t> effective_snapshot_times() const {
    if (snapshot_times.empty()) return horizon == 0 ? std::vector<std::size_t>{0} : std::vector<std::size_t>{0, horizon};
    return snapshot_times;
  }

  ParameterBounds effective_bounds() const {
    if (bounds) return *bounds;
    return parameter_mode == ParameterMode::table1 ? ParameterBounds::synthetic() : ParameterBounds::real_network();
  }

  void validate() const {
    if (n_topics == 0 || n_creators == 0) throw std::invalid_argument("n_topics and n_creators must be positive");
    if (graph.source == GraphSource::homophily && n_users == 0) throw std::invalid_argument("n_users must be positive");
    if (metrics_every == 0) throw std::invalid_argument("metrics_every must be positive");
    recommender.validate(n_creators);
    if (graph.source == GraphSource::homophily && !(graph.delta > 0.0))
      throw std::invalid_argument("homophily delta must be positive");
    if (graph.source == GraphSource::edge_list) {
      if (graph.path.empty()) throw std::invalid_argument("edge_list graph needs a path");
      if (graph.communities < 1) throw std::invalid_argument("need at least one community");
      if (!(graph.sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
    }
    for (std::size_t t : snapshot_times)
      if (t > horizon) throw std::invalid_argument("snapshot time " + std::to_string(t) + " exceeds horizon");
    effective_bounds().validate();
  }
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

inline json range_json(const Range& r) { return json::array({r.lower, r.upper}); }

inline Range range_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("bounds entries must be [lower, upper]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw std::invalid_argument("unknown key '" + key + "' in " + where);
  }
}

}  // namespace detail

inline json to_json(const ParameterBounds& b) {
  return json{{"user_stubbornness", detail::range_json(b.user_stubbornness)},
              {"self_influence", detail::range_json(b.self_influence)},
              {"recommender_influence", detail::range_json(b.recommender_influence)},
              {"neighbor_influence", detail::range_json(b.neighbor_influence)},
              {"creator_stubbornness", detail::range_json(b.creator_stubbornness)},
              {"creator_self_influence", detail::range_json(b.creator_self_influence)},
              {"audience_influence", detail::range_json(b.audience_influence)},
              {"neighbor_mode", b.neighbor_mode == NeighborMode::per_edge ? "per_edge" : "total_mass"}};
}

inline ParameterBounds bounds_from_json(const json& j, ParameterBounds b) {
  detail::reject_unknown(j,
                         {"user_stubbornness", "self_influence", "recommender_influence", "neighbor_influence",
                          "creator_stubbornness", "creator_self_influence", "audience_influence", "neighbor_mode"},
                         "bounds");
  if (j.contains("user_stubbornness")) b.user_stubbornness = detail::range_from(j["user_stubbornness"]);
  if (j.contains("self_influence")) b.self_influence = detail::range_from(j["self_influence"]);
  if (j.contains("recommender_influence")) b.recommender_influence = detail::range_from(j["recommender_influence"]);
  if (j.contains("neighbor_influence")) b.neighbor_influence = detail::range_from(j["neighbor_influence"]);
  if (j.contains("creator_stubbornness")) b.creator_stubbornness = detail::range_from(j["creator_stubbornness"]);
  if (j.contains("creator_self_influence")) b.creator_self_influence = detail::range_from(j["creator_self_influence"]);
  if (j.contains("audience_influence")) b.audience_influence = detail::range_from(j["audience_influence"]);
  if (j.contains("neighbor_mode")) {
    const auto mode = j["neighbor_mode"].get<std::string>();
    if (mode == "per_edge") b.neighbor_mode = NeighborMode::per_edge;
    else if (mode == "total_mass") b.neighbor_mode = NeighborMode::total_mass;
    else throw std::invalid_argument("unknown neighbor_mode '" + mode + "'");
  }
  return b;
}

inline json to_json(const ExperimentConfig& c) {
  json graph;
  if (c.graph.source == GraphSource::homophily) {
    graph = {{"source", "homophily"}, {"delta", c.graph.delta}, {"kernel", to_string(c.graph.kernel)}};
  } else {
    graph = {{"source", "edge_list"},
             {"path", c.graph.path},
             {"communities", c.graph.communities},
             {"sigma", c.graph.sigma}};
  }
  json j{{"schema_version", kConfigSchemaVersion},
         {"n_users", c.n_users},
         {"n_creators", c.n_creators},
         {"n_topics", c.n_topics},
         {"horizon", c.horizon},
         {"recommender",
          {{"d", c.recommender.hops},
           {"k", c.recommender.k},
           {"temperature", c.recommender.temperature},
           {"score_basis", to_string(c.recommender.score_basis)}}},
         {"graph", graph},
         {"parameter_mode", c.parameter_mode == ParameterMode::table1 ? "table1" : "table4"},
         {"seed", c.seed},
         {"metrics_every", c.metrics_every},
         {"snapshot_times", c.snapshot_times},
         {"clustering",
          {{"k_min", c.clustering.k_min}, {"k_max", c.clustering.k_max}, {"restarts", c.clustering.restarts}}}};
  if (c.bounds) j["bounds"] = to_json(*c.bounds);
  return j;
}

// Missing keys keep their defaults.
inline ExperimentConfig config_from_json(const json& j) {
  detail::reject_unknown(j,
                         {"schema_version", "n_users", "n_creators", "n_topics", "horizon", "recommender", "graph",
                          "parameter_mode", "bounds", "seed", "metrics_every", "snapshot_times", "clustering"},
                         "config");
  if (j.contains("schema_version") && j["schema_version"].get<int>() != kConfigSchemaVersion)
    throw std::invalid_argument("unsupported config schema_version " + j["schema_version"].dump());
  ExperimentConfig c;
  if (j.contains("n_users")) c.n_users = j["n_users"].get<std::size_t>();
  if (j.contains("n_creators")) c.n_creators = j["n_creators"].get<std::size_t>();
  if (j.contains("n_topics")) c.n_topics = j["n_topics"].get<std::size_t>();
  if (j.contains("horizon")) c.horizon = j["horizon"].get<std::size_t>();
  if (j.contains("recommender")) {
    const auto& r = j["recommender"];
    detail::reject_unknown(r, {"d", "k", "temperature", "score_basis"}, "recommender");
    if (r.contains("d")) c.recommender.hops = r["d"].get<std::size_t>();
    if (r.contains("k")) c.recommender.k = r["k"].get<std::size_t>();
    if (r.contains("temperature")) c.recommender.temperature = r["temperature"].get<double>();
    if (r.contains("score_basis")) c.recommender.score_basis = parse_score_basis(r["score_basis"].get<std::string>());
  }
  if (j.contains("graph")) {
    const auto& g = j["graph"];
    detail::reject_unknown(g, {"source", "delta", "kernel", "path", "communities", "sigma"}, "graph");
    const auto source = g.value("source", std::string("homophily"));
    if (source == "homophily") c.graph.source = GraphSource::homophily;
    else if (source == "edge_list") c.graph.source = GraphSource::edge_list;
    else throw std::invalid_argument("unknown graph source '" + source + "'");
    if (g.contains("delta")) c.graph.delta = g["delta"].get<double>();
    if (g.contains("kernel")) c.graph.kernel = parse_homophily_kernel(g["kernel"].get<std::string>());
    if (g.contains("path")) c.graph.path = g["path"].get<std::string>();
    if (g.contains("communities")) c.graph.communities = g["communities"].get<std::size_t>();
    if (g.contains("sigma")) c.graph.sigma = g["sigma"].get<double>();
  }
  if (j.contains("parameter_mode")) {
    const auto mode = j["parameter_mode"].get<std::string>();
    if (mode == "table1") c.parameter_mode = ParameterMode::table1;
    else if (mode == "table4") c.parameter_mode = ParameterMode::table4;
    else throw std::invalid_argument("unknown parameter_mode '" + mode + "'");
  }
  if (j.contains("bounds")) c.bounds = bounds_from_json(j["bounds"], c.effective_bounds());
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("metrics_every")) c.metrics_every = j["metrics_every"].get<std::size_t>();
  if (j.contains("snapshot_times")) c.snapshot_times = j["snapshot_times"].get<std::vector<std::size_t>>();
  if (j.contains("clustering")) {
    const auto& k = j["clustering"];
    detail::reject_unknown(k, {"k_min", "k_max", "restarts"}, "clustering");
    if (k.contains("k_min")) c.clustering.k_min = k["k_min"].get<std::size_t>();
    if (k.contains("k_max")) c.clustering.k_max = k["k_max"].get<std::size_t>();
    if (k.contains("restarts")) c.clustering.restarts = k["restarts"].get<std::size_t>();
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  return config_from_json(json::parse(in));
}

// ---------------------------------------------------------------------------
// Population construction

// Stream tags for the sub-generators derived from the run seed.
enum class Stream : std::uint64_t {
  user_opinions = 1, creator_opinions, graph, parameters, spectral, centers, community_noise
};

inline Rng stream_rng(std::uint64_t seed, Stream s) { return make_rng(seed, {static_cast<std::uint64_t>(s)}); }

struct Experiment {
  SimulationInput input;
  std::vector<std::int64_t> node_ids;  // edge_list only: dense index -> original id
  std::optional<CommunityAssignment> communities;
};

inline UserPopulation make_users(RowMatrix opinions, const PopulationParameters& p) {
  UserPopulation u;
  u.prejudices = opinions;
  u.opinions = std::move(opinions);
  u.stubbornness = p.user_stubbornness;
  u.recommender_influence = p.recommender_influence;
  return u;
}

inline CreatorPopulation make_creators(RowMatrix opinions, const PopulationParameters& p) {
  CreatorPopulation c;
  c.prejudices = opinions;
  c.opinions = std::move(opinions);
  c.stubbornness = p.creator_stubbornness;
  c.self_influence = p.creator_self_influence;
  c.audience_influence = p.audience_influence;
  return c;
}

inline Experiment build_experiment(const ExperimentConfig& config) {
  config.validate();
  Experiment ex;
  RowMatrix user_opinions;
  if (config.graph.source == GraphSource::homophily) {
    Rng opinions_rng = stream_rng(config.seed, Stream::user_opinions);
    user_opinions = init_opinions_uniform(config.n_users, config.n_topics, opinions_rng);
    Rng graph_rng = stream_rng(config.seed, Stream::graph);
    ex.input.graph = generate_homophily_graph(user_opinions, config.graph.delta, graph_rng, config.graph.kernel);
  } else {
    LoadedGraph loaded = load_edge_list(config.graph.path);
    ex.input.graph = std::move(loaded.graph);
    ex.node_ids = std::move(loaded.original_ids);
    SpectralOptions spectral;
    spectral.seed = derive_seed(config.seed, {static_cast<std::uint64_t>(Stream::spectral)});
    ex.communities = spectral_communities(ex.input.graph, config.graph.communities, spectral);
    Rng centers_rng = stream_rng(config.seed, Stream::centers);
    const RowMatrix centers = sample_community_centers(config.graph.communities, config.n_topics, centers_rng);
    Rng noise_rng = stream_rng(config.seed, Stream::community_noise);
    user_opinions = init_opinions_from_communities(*ex.communities, centers, config.graph.sigma, noise_rng);
  }
  Rng creators_rng = stream_rng(config.seed, Stream::creator_opinions);
  RowMatrix creator_opinions = init_opinions_uniform(config.n_creators, config.n_topics, creators_rng);
  Rng params_rng = stream_rng(config.seed, Stream::parameters);
  const auto params = sample_params(ex.input.graph, config.n_creators, config.effective_bounds(), params_rng);
  ex.input.users = make_users(std::move(user_opinions), params);
  ex.input.creators = make_creators(std::move(creator_opinions), params);
  return ex;
}

inline SimulationOptions simulation_options(const ExperimentConfig& config) {
  SimulationOptions o;
  o.recommender = config.recommender;
  o.horizon = config.horizon;
  o.seed = config.seed;
  o.metrics_every = config.metrics_every;
  o.clustering = config.clustering;
  // Clamped community prejudices sit exactly on the boundary.
  if (config.graph.source == GraphSource::edge_list) o.bound_tolerance = 1e-12;
  return o;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double x) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, end);
}

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw std::runtime_error("sha256 init failed");
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

inline constexpr const char* kMetricsHeader =
    "t,sat_running,sat_instant,neg_clusterization,chosen_k,sat_variance,sil_variance";

inline std::string metrics_row(const StepMetrics& m) {
  return std::to_string(m.t) + ',' + format_double(m.sat_running) + ',' + format_double(m.sat_instant) + ',' +
         format_double(-m.clusterization) + ',' + std::to_string(m.chosen_k) + ',' + format_double(m.sat_variance) +
         ',' + format_double(m.sil_variance);
}

inline std::string opinion_header(const char* prefix, std::size_t topics) {
  std::string h = prefix;
  for (std::size_t k = 0; k < topics; ++k) h += ",x" + std::to_string(k);
  return h;
}

inline void write_opinion_rows(std::ostream& out, const std::string& lead, const RowMatrix& m) {
  for (Index r = 0; r < m.rows(); ++r) {
    out << lead << r;
    for (double x : m.row(r)) out << ',' << format_double(x);
    out << '\n';
  }
}

inline void write_population(const std::filesystem::path& dir, const Experiment& ex) {
  const auto& users = ex.input.users;
  const auto& creators = ex.input.creators;
  const auto& graph = ex.input.graph;
  {
    auto out = open_output(dir / "users.csv");
    out << opinion_header("user_id,stubbornness,self_influence,recommender_influence", users.topics()) << '\n';
    for (Index i = 0; i < users.size(); ++i) {
      out << i << ',' << format_double(users.stubbornness[i]) << ',' << format_double(graph.self_weight(i)) << ','
          << format_double(users.recommender_influence[i]);
      for (double x : users.prejudices.row(i)) out << ',' << format_double(x);
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "creators.csv");
    out << opinion_header("creator_id,stubbornness,self_influence,audience_influence", creators.topics()) << '\n';
    for (Index j = 0; j < creators.size(); ++j) {
      out << j << ',' << format_double(creators.stubbornness[j]) << ',' << format_double(creators.self_influence[j])
          << ',' << format_double(creators.audience_influence[j]);
      for (double x : creators.prejudices.row(j)) out << ',' << format_double(x);
      out << '\n';
    }
  }
  {
    auto out = open_output(dir / "edges.csv");
    out << "source,target,weight\n";
    for (const auto& e : graph.edges()) out << e.source << ',' << e.target << ',' << format_double(e.weight) << '\n';
  }
  if (!ex.node_ids.empty()) {
    auto out = open_output(dir / "node_map.csv");
    out << "original_id,dense_index\n";
    for (Index i = 0; i < ex.node_ids.size(); ++i) out << ex.node_ids[i] << ',' << i << '\n';
  }
  if (ex.communities) {
    auto out = open_output(dir / "communities.csv");
    out << "user_id,community\n";
    for (Index i = 0; i < ex.communities->community.size(); ++i) out << i << ',' << ex.communities->community[i] << '\n';
  }
}

inline void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& config,
                           const std::vector<std::string>& files, json extra = json::object()) {
  json manifest{{"schema_version", kConfigSchemaVersion}, {"seed", config.seed}};
  json hashes = json::object();
  for (const auto& f : files) hashes[f] = sha256_file(dir / f);
  manifest["sha256"] = hashes;
  for (auto& [k, v] : extra.items()) manifest[k] = v;
  auto out = open_output(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
}

// Writes the population files without running the dynamics.
inline void generate_population(const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Experiment ex = build_experiment(config);
  {
    auto out = open_output(dir / "config.json");
    out << to_json(config).dump(2) << '\n';
  }
  write_population(dir, ex);
  std::vector<std::string> files{"config.json", "users.csv", "creators.csv", "edges.csv"};
  if (!ex.node_ids.empty()) files.push_back("node_map.csv");
  if (ex.communities) files.push_back("communities.csv");
  write_manifest(dir, config, files,
                 json{{"n_users", ex.input.users.size()},
                      {"n_edges", ex.input.graph.n_edges()},
                      {"average_in_degree", average_in_degree(ex.input.graph)}});
}

struct RunSummary {
  std::vector<StepMetrics> metrics;
  std::size_t n_users = 0;
  double average_in_degree = 0.0;
};

// Full experiment: config echo, metrics.csv, snapshots.csv, clusters.csv,
// consumption.csv, population files and a manifest of content hashes.
inline RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Experiment ex = build_experiment(config);
  {
    auto out = open_output(dir / "config.json");
    out << to_json(config).dump(2) << '\n';
  }
  write_population(dir, ex);

  RunSummary summary;
  summary.n_users = ex.input.users.size();
  summary.average_in_degree = average_in_degree(ex.input.graph);
  const std::size_t topics = ex.input.users.topics();
  auto metrics = open_output(dir / "metrics.csv");
  auto snapshots = open_output(dir / "snapshots.csv");
  auto clusters = open_output(dir / "clusters.csv");
  auto consumption = open_output(dir / "consumption.csv");
  metrics << kMetricsHeader << '\n';
  snapshots << opinion_header("t,agent_kind,agent_id", topics) << '\n';
  clusters << "t,user_id,cluster,silhouette\n";
  consumption << "t,user_id,creator_id,distance\n";

  const SimulationOptions options = simulation_options(config);
  const auto snapshot_times = config.effective_snapshot_times();
  Simulation sim(std::move(ex.input), options);
  sim.run([&](const StepView& v) {
    for (Index i = 0; i < v.distances.size(); ++i)
      consumption << v.t << ',' << i << ',' << v.partition.creator_of(i) << ',' << format_double(v.distances[i])
                  << '\n';
    if (v.metrics) {
      metrics << metrics_row(*v.metrics) << '\n';
      summary.metrics.push_back(*v.metrics);
    }
    if (std::find(snapshot_times.begin(), snapshot_times.end(), v.t) != snapshot_times.end()) {
      const std::string t = std::to_string(v.t);
      write_opinion_rows(snapshots, t + ",user,", v.users);
      write_opinion_rows(snapshots, t + ",creator,", v.creators);
      std::optional<Clusterization> own;
      const Clusterization* cl = v.clustering;
      if (!cl && v.users.rows() >= 2) {
        own = global_clusterization(v.users, derive_seed(config.seed, {0xc1a55ULL, v.t}), config.clustering);
        cl = &*own;
      }
      if (cl) {
        for (Index i = 0; i < v.users.rows(); ++i)
          clusters << t << ',' << i << ',' << cl->model.labels[i] << ',' << format_double(cl->silhouettes[i]) << '\n';
      }
    }
  });
  metrics.close();
  snapshots.close();
  clusters.close();
  consumption.close();

  std::vector<std::string> files{"config.json", "users.csv",    "creators.csv", "edges.csv",
                                 "metrics.csv", "snapshots.csv", "clusters.csv", "consumption.csv"};
  if (!ex.node_ids.empty()) files.push_back("node_map.csv");
  if (ex.communities) files.push_back("communities.csv");
  write_manifest(dir, config, files,
                 json{{"n_users", summary.n_users}, {"average_in_degree", summary.average_in_degree}});
  return summary;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  std::vector<std::size_t> d_values{0, 3, 6};
  std::vector<std::size_t> k_values;  // empty: the base config's k
  std::vector<double> delta_values;   // empty: the base config's delta
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t workers = 0;  // 0: RECSIM_WORKERS or hardware concurrency
};

struct SweepCell {
  std::size_t d = 0;
  std::size_t k = 0;
  double delta = 0.0;
  std::uint64_t seed = 0;
  StepMetrics final;
};

struct SweepGroup {
  std::size_t d = 0;
  std::size_t k = 0;
  double delta = 0.0;
  std::size_t runs = 0;
  double median_sat_running = 0.0;
  double var_sat_running = 0.0;
  double median_clusterization = 0.0;
  double var_clusterization = 0.0;
};

inline std::size_t default_workers() {
  if (const char* env = std::getenv("RECSIM_WORKERS")) {
    std::size_t w = 0;
    const std::string_view s(env);
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), w);
    if (ec == std::errc{} && ptr == s.data() + s.size() && w > 0) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const std::size_t h = xs.size() / 2;
  return xs.size() % 2 ? xs[h] : 0.5 * (xs[h - 1] + xs[h]);
}

// Final-step metrics of one run, with clusterization evaluated only at t = T.
inline StepMetrics final_metrics(const ExperimentConfig& config) {
  Experiment ex = build_experiment(config);
  SimulationOptions options = simulation_options(config);
  options.metrics_every = std::max<std::size_t>(config.horizon, 1);
  StepMetrics last;
  Simulation sim(std::move(ex.input), options);
  sim.run([&](const StepView& v) {
    if (v.metrics && v.t == config.horizon) last = *v.metrics;
  });
  return last;
}

inline std::vector<SweepCell> sweep_cells(const ExperimentConfig& base, const SweepSpec& spec) {
  std::vector<SweepCell> cells;
  const auto ks = spec.k_values.empty() ? std::vector<std::size_t>{base.recommender.k} : spec.k_values;
  const auto deltas = spec.delta_values.empty() ? std::vector<double>{base.graph.delta} : spec.delta_values;
  for (double delta : deltas)
    for (std::size_t k : ks)
      for (std::size_t d : spec.d_values)
        for (std::uint64_t seed : spec.seeds) cells.push_back({d, k, delta, seed, {}});

  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  const auto worker = [&] {
    for (std::size_t c = next++; c < cells.size(); c = next++) {
      try {
        ExperimentConfig cfg = base;
        cfg.recommender.hops = cells[c].d;
        cfg.recommender.k = cells[c].k;
        cfg.graph.delta = cells[c].delta;
        cfg.seed = cells[c].seed;
        cells[c].final = final_metrics(cfg);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min(cells.size(), spec.workers ? spec.workers : default_workers());
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n_workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return cells;
}

inline std::vector<SweepGroup> summarize(const std::vector<SweepCell>& cells) {
  std::vector<SweepGroup> groups;
  for (const auto& cell : cells) {
    const bool seen = std::any_of(groups.begin(), groups.end(), [&](const SweepGroup& g) {
      return g.d == cell.d && g.k == cell.k && g.delta == cell.delta;
    });
    if (seen) continue;
    std::vector<double> sat, cl;
    for (const auto& other : cells) {
      if (other.d != cell.d || other.k != cell.k || other.delta != cell.delta) continue;
      sat.push_back(other.final.sat_running);
      cl.push_back(other.final.clusterization);
    }
    SweepGroup g{cell.d, cell.k, cell.delta, sat.size()};
    g.median_sat_running = median(sat);
    g.var_sat_running = mean_variance(sat).variance;
    g.median_clusterization = median(cl);
    g.var_clusterization = mean_variance(cl).variance;
    groups.push_back(g);
  }
  return groups;
}

inline std::vector<SweepGroup> run_sweep(const ExperimentConfig& base, const SweepSpec& spec,
                                         const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto cells = sweep_cells(base, spec);
  const auto groups = summarize(cells);
  {
    auto out = open_output(dir / "config.json");
    json j = to_json(base);
    j["sweep"] = {{"d_values", spec.d_values},
                  {"k_values", spec.k_values},
                  {"delta_values", spec.delta_values},
                  {"seeds", spec.seeds}};
    out << j.dump(2) << '\n';
  }
  {
    auto out = open_output(dir / "sweep.csv");
    out << "d,k,delta,seed," << kMetricsHeader << '\n';
    for (const auto& c : cells)
      out << c.d << ',' << c.k << ',' << format_double(c.delta) << ',' << c.seed << ',' << metrics_row(c.final) << '\n';
  }
  {
    auto out = open_output(dir / "summary.csv");
    out << "d,k,delta,runs,median_sat_running,var_sat_running,median_neg_clusterization,var_clusterization\n";
    for (const auto& g : groups)
      out << g.d << ',' << g.k << ',' << format_double(g.delta) << ',' << g.runs << ','
          << format_double(g.median_sat_running) << ',' << format_double(g.var_sat_running) << ','
          << format_double(-g.median_clusterization) << ',' << format_double(g.var_clusterization) << '\n';
  }
  return groups;
}

// ---------------------------------------------------------------------------
// Verification suites

inline const std::vector<std::string>& verify_suites() {
  static const std::vector<std::string> names{"theorem1", "lemma1", "alpha", "complementarity"};
  return names;
}

inline json verify_theorem1(std::uint64_t seed) {
  json cases = json::array();
  bool ok = true;
  double worst = 0.0;
  for (std::uint64_t c = 0; c < 20; ++c) {
    Rng rng = make_rng(seed, {0x7e0ULL, c});
    std::vector<Index> assignment;
    SimulationInput in = theory::random_stable_instance(20, 3, 2, 0.05, rng, assignment);
    const auto problem = theory::FixedPointProblem::from(in, Partition(assignment, 3));
    const auto eq = theory::closed_form_equilibrium(problem);
    SimulationOptions o;
    o.recommender.k = 1;
    o.horizon = 10000;
    o.metrics_every = 0;
    o.fixed_assignment = assignment;
    const auto traj_end = [&] {
      RowMatrix users, creators;
      Simulation sim(in, o);
      sim.run([&](const StepView& v) {
        if (v.t == o.horizon) {
          users = v.users;
          creators = v.creators;
        }
      });
      return std::pair{users, creators};
    }();
    double err = 0.0;
    for (Index i = 0; i < eq.users.values().size(); ++i)
      err = std::max(err, std::abs(eq.users.values()[i] - traj_end.first.values()[i]));
    for (Index j = 0; j < eq.creators.values().size(); ++j)
      err = std::max(err, std::abs(eq.creators.values()[j] - traj_end.second.values()[j]));
    worst = std::max(worst, err);
    const bool pass = err <= 1e-8;
    ok = ok && pass;
    cases.push_back({{"instance", c}, {"spectral_radius", eq.spectral_radius}, {"max_abs_error", err}, {"pass", pass}});
  }
  return {{"suite", "theorem1"}, {"pass", ok}, {"tolerance", 1e-8}, {"max_abs_error", worst}, {"cases", cases}};
}

inline json verify_lemma1(std::uint64_t seed) {
  json cases = json::array();
  bool ok = true;
  for (std::uint64_t s = 0; s < 5; ++s) {
    Rng rng = make_rng(seed, {0x1e3aULL, s});
    auto report = theory::lemma1_scenario_check(theory::make_lemma1_instance(50, 5, 2, rng), 200, seed + s);
    ok = ok && report.ok();
    cases.push_back({{"seed_index", s},
                     {"steps", report.steps},
                     {"partition_static", report.partition_static},
                     {"distances_non_increasing", report.distances_non_increasing},
                     {"ratios_within_bounds", report.ratios_within_bounds},
                     {"min_ratio_minus_eta", report.min_ratio_slack},
                     {"max_ratio", report.max_ratio},
                     {"violations", report.violations}});
  }
  return {{"suite", "lemma1"}, {"pass", ok}, {"cases", cases}};
}

inline json verify_alpha() {
  bool ok = true;
  std::size_t points = 0;
  json failures = json::array();
  for (int e = 1; e <= 9; ++e) {
    const double eta = e / 10.0;
    for (int a = 0; a <= 10; ++a) {
      const double alpha0 = eta + (1.0 - eta) * a / 10.0;
      const auto trace = theory::alpha_recursion(eta, alpha0, 200);
      ++points;
      bool pass = trace.within_bounds && trace.non_decreasing;
      if (a == 0 || a == 10)
        pass = pass && std::all_of(trace.alpha.begin(), trace.alpha.end(), [&](double x) { return x == alpha0; });
      if (!pass) failures.push_back({{"eta", eta}, {"alpha0", alpha0}});
      ok = ok && pass;
    }
  }
  return {{"suite", "alpha"}, {"pass", ok}, {"grid_points", points}, {"failures", failures}};
}

inline json verify_complementarity(std::uint64_t seed) {
  json cases = json::array();
  bool ok = true;
  for (std::uint64_t c = 0; c < 10; ++c) {
    Rng rng = make_rng(seed, {0xc0b1ULL, c});
    std::vector<Index> assignment;
    SimulationInput in = theory::random_stable_instance(20, 3, 2, 0.05, rng, assignment);
    const auto problem = theory::FixedPointProblem::from(in, Partition(assignment, 3));
    Index user = 0;
    while (user < 20 && in.graph.in_edges(user).empty()) ++user;
    if (user == 20) continue;
    const auto report = theory::complementarity_check(problem, user, 0.05);
    ok = ok && report.ok();
    cases.push_back({{"instance", c},
                     {"user", user},
                     {"row_residual", report.row_residual},
                     {"projection", report.projection},
                     {"moved_toward_neighbors", report.moved_toward_neighbors}});
  }
  return {{"suite", "complementarity"}, {"pass", ok}, {"cases", cases}};
}

inline json verify(const std::string& suite, std::uint64_t seed = 1) {
  const auto run_one = [&](const std::string& name) -> json {
    if (name == "theorem1") return verify_theorem1(seed);
    if (name == "lemma1") return verify_lemma1(seed);
    if (name == "alpha") return verify_alpha();
    if (name == "complementarity") return verify_complementarity(seed);
    throw std::invalid_argument("unknown verification suite '" + name + "'");
  };
  json report{{"seed", seed}, {"suites", json::array()}};
  bool ok = true;
  const std::vector<std::string> names = suite == "all" ? verify_suites() : std::vector<std::string>{suite};
  for (const auto& name : names) {
    json r = run_one(name);
    ok = ok && r["pass"].get<bool>();
    report["suites"].push_back(std::move(r));
  }
  report["pass"] = ok;
  return report;
}

}  // namespace recsim
