#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "recsim/experiment.hpp"

using namespace recsim;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() / (std::string("recsim_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n_users = 60;
  c.n_creators = 8;
  c.horizon = 6;
  c.graph.delta = 4.0;
  c.recommender.hops = 1;
  c.recommender.k = 3;
  c.seed = 17;
  return c;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RECSIM_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, JsonRoundTrip) {
  ExperimentConfig c = small_config();
  c.graph.kernel = HomophilyKernel::squared_distance;
  c.snapshot_times = {0, 3, 6};
  c.parameter_mode = ParameterMode::table4;
  const auto back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
}

TEST(Config, RejectsBadInput) {
  EXPECT_THROW(config_from_json(json{{"n_user", 5}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"schema_version", 2}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"graph", {{"source", "random"}}}}), std::invalid_argument);
  EXPECT_THROW(config_from_json(json{{"recommender", {{"tau", 1.0}}}}), std::invalid_argument);
  ExperimentConfig c = small_config();
  c.snapshot_times = {0, 7};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.n_users = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.metrics_every = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small_config();
  c.recommender.k = 9;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Config, BoundsOverride) {
  const auto c = config_from_json(json{{"bounds", {{"user_stubbornness", {0.1, 0.2}}}}});
  ASSERT_TRUE(c.bounds.has_value());
  EXPECT_EQ(c.effective_bounds().user_stubbornness.lower, 0.1);
  EXPECT_EQ(c.effective_bounds().self_influence.lower, 0.5);
}

TEST(Run, ZeroHorizonWritesSingleMetricsRow) {
  TempDir dir;
  ExperimentConfig c = small_config();
  c.horizon = 0;
  run_experiment(c, dir.path());
  const auto m = lines(dir / "metrics.csv");
  ASSERT_EQ(m.size(), 2u);
  EXPECT_EQ(m[0], "t,sat_running,sat_instant,neg_clusterization,chosen_k,sat_variance,sil_variance");
  EXPECT_EQ(m[1].substr(0, 2), "0,");
}

TEST(Run, WritesAllFilesWithSchemas) {
  TempDir dir;
  const auto c = small_config();
  run_experiment(c, dir.path());
  for (const char* f : {"config.json", "metrics.csv", "snapshots.csv", "consumption.csv", "clusters.csv",
                        "manifest.json", "users.csv", "creators.csv", "edges.csv"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_EQ(lines(dir / "snapshots.csv")[0], "t,agent_kind,agent_id,x0,x1");
  EXPECT_EQ(lines(dir / "consumption.csv")[0], "t,user_id,creator_id,distance");
  EXPECT_EQ(lines(dir / "clusters.csv")[0], "t,user_id,cluster,silhouette");
  // default snapshots at 0 and T, users then creators
  EXPECT_EQ(lines(dir / "snapshots.csv").size(), 1 + 2 * (60 + 8));
  EXPECT_EQ(lines(dir / "consumption.csv").size(), 1 + 7 * 60);
  const auto manifest = json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 17);
  for (const auto& [file, hash] : manifest["sha256"].items()) EXPECT_EQ(hash, sha256_file(dir / file)) << file;
  EXPECT_EQ(json::parse(slurp(dir / "config.json")).dump(), to_json(c).dump());
}

TEST(Run, MetricsRowCount) {
  for (std::size_t every : {1, 2, 4, 5}) {
    TempDir dir;
    ExperimentConfig c = small_config();
    c.horizon = 9;
    c.metrics_every = every;
    run_experiment(c, dir.path());
    EXPECT_EQ(lines(dir / "metrics.csv").size(), 1 + 9 / every + 1);
  }
}

TEST(Run, ByteIdenticalRepeats) {
  TempDir a, b;
  const auto c = small_config();
  run_experiment(c, a / "run");
  run_experiment(c, b / "run");
  for (const char* f : {"metrics.csv", "snapshots.csv", "consumption.csv", "clusters.csv", "manifest.json"})
    EXPECT_EQ(slurp(a / "run" / f), slurp(b / "run" / f)) << f;
  ExperimentConfig other = c;
  other.seed = 18;
  run_experiment(other, b / "other");
  EXPECT_NE(slurp(a / "run" / "metrics.csv"), slurp(b / "other" / "metrics.csv"));
}

TEST(Run, ConsumptionLogReproducesSatisfaction) {
  TempDir dir;
  const auto c = small_config();
  const auto summary = run_experiment(c, dir.path());
  std::vector<double> cumulative(c.n_users, 0.0);
  const auto rows = lines(dir / "consumption.csv");
  std::size_t next = 1;
  for (const auto& m : summary.metrics) {
    for (; next < rows.size(); ++next) {
      std::istringstream f(rows[next]);
      std::string t, user, creator, d;
      std::getline(f, t, ',');
      if (std::stoul(t) > m.t) break;
      std::getline(f, user, ',');
      std::getline(f, creator, ',');
      std::getline(f, d, ',');
      cumulative[std::stoul(user)] += std::stod(d);
    }
    std::vector<double> sat(c.n_users);
    for (Index i = 0; i < c.n_users; ++i) sat[i] = -cumulative[i] / static_cast<double>(m.t + 1);
    EXPECT_EQ(mean_variance(sat).mean, m.sat_running);
  }
}

TEST(Sweep, SingleCellMatchesRun) {
  TempDir dir;
  const auto c = small_config();
  SweepSpec spec;
  spec.d_values = {c.recommender.hops};
  spec.seeds = {c.seed};
  spec.workers = 1;
  const auto groups = run_sweep(c, spec, dir / "sweep");
  const auto summary = run_experiment(c, dir / "run");
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].runs, 1u);
  EXPECT_EQ(groups[0].median_sat_running, summary.metrics.back().sat_running);
  EXPECT_EQ(groups[0].median_clusterization, summary.metrics.back().clusterization);
  const auto sweep_rows = lines(dir / "sweep" / "sweep.csv");
  const auto run_rows = lines(dir / "run" / "metrics.csv");
  ASSERT_EQ(sweep_rows.size(), 2u);
  EXPECT_EQ(sweep_rows[1], "1,3,4,17," + run_rows.back());
}

TEST(Sweep, WorkerCountDoesNotChangeResults) {
  TempDir dir;
  auto c = small_config();
  c.horizon = 4;
  SweepSpec spec;
  spec.d_values = {0, 2};
  spec.k_values = {1, 3};
  spec.seeds = {1, 2, 3};
  spec.workers = 1;
  run_sweep(c, spec, dir / "one");
  spec.workers = 4;
  run_sweep(c, spec, dir / "four");
  EXPECT_EQ(slurp(dir / "one" / "sweep.csv"), slurp(dir / "four" / "sweep.csv"));
  EXPECT_EQ(slurp(dir / "one" / "summary.csv"), slurp(dir / "four" / "summary.csv"));
  EXPECT_EQ(lines(dir / "one" / "sweep.csv").size(), 1 + 2 * 2 * 3);
  EXPECT_EQ(lines(dir / "one" / "summary.csv").size(), 1 + 2 * 2);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
}

TEST(EdgeListRun, WritesNodeMapAndCommunities) {
  TempDir dir;
  {
    std::ofstream out(dir / "edges.txt");
    out << "# two triangles joined by a bridge\n";
    out << "10 11\n11 12\n10 12\n20 21\n21 22\n20 22\n12 20\n";
  }
  ExperimentConfig c;
  c.graph.source = GraphSource::edge_list;
  c.graph.path = (dir / "edges.txt").string();
  c.graph.communities = 2;
  c.n_creators = 3;
  c.n_topics = 3;
  c.horizon = 5;
  c.recommender.k = 2;
  c.parameter_mode = ParameterMode::table4;
  run_experiment(c, dir / "run");
  const auto map = lines(dir / "run" / "node_map.csv");
  ASSERT_EQ(map.size(), 7u);
  EXPECT_EQ(map[0], "original_id,dense_index");
  EXPECT_EQ(map[1], "10,0");
  EXPECT_EQ(map[6], "22,5");
  const auto comm = lines(dir / "run" / "communities.csv");
  ASSERT_EQ(comm.size(), 7u);
  EXPECT_EQ(comm[1].back(), comm[3].back());
  EXPECT_NE(comm[1].back(), comm[4].back());
}

TEST(Verify, SuitesPass) {
  for (const auto& s : {"theorem1", "lemma1", "alpha", "complementarity", "all"}) {
    const auto r = verify(s, 1);
    EXPECT_TRUE(r["pass"].get<bool>()) << s;
  }
  EXPECT_THROW(verify("lemma2"), std::invalid_argument);
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  EXPECT_EQ(run_cli("verify --suite alpha"), 0);
  EXPECT_NE(run_cli("verify --suite nonsense"), 0);
  EXPECT_NE(run_cli("simulate --n-users 0 -o " + (dir / "bad").string()), 0);
  EXPECT_NE(run_cli("frobnicate"), 0);
  {
    std::ofstream cfg(dir / "c.json");
    cfg << to_json(small_config()).dump();
  }
  EXPECT_EQ(run_cli("simulate --config " + (dir / "c.json").string() + " --horizon 3 -o " + (dir / "ok").string()), 0);
  EXPECT_EQ(lines(dir / "ok" / "metrics.csv").size(), 5u);
  EXPECT_EQ(json::parse(slurp(dir / "ok" / "config.json"))["horizon"], 3);
  {
    std::ofstream cfg(dir / "bad.json");
    cfg << R"({"n_users": 10, "typo": 1})";
  }
  EXPECT_NE(run_cli("simulate --config " + (dir / "bad.json").string() + " -o " + (dir / "x").string()), 0);
  EXPECT_EQ(run_cli("generate --n-users 30 --n-creators 4 --k 2 -o " + (dir / "pop").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "pop" / "edges.csv"));
}
