// Command-line driver: generate, simulate, sweep, ingest, verify.
#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "recsim/experiment.hpp"

namespace {

using recsim::ExperimentConfig;

// Flags mirror ExperimentConfig. Unset flags leave the loaded config alone.
struct ConfigFlags {
  std::string config_path;
  std::optional<std::size_t> n_users, n_creators, n_topics, horizon, d, k, metrics_every, communities;
  std::optional<double> temperature, delta, sigma;
  std::optional<std::string> score_basis, kernel, edge_list, parameter_mode;
  std::optional<std::uint64_t> seed;
  std::vector<std::size_t> snapshot_times;

  void attach(CLI::App& app) {
    app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
    app.add_option("--n-users", n_users);
    app.add_option("--n-creators", n_creators);
    app.add_option("--n-topics", n_topics);
    app.add_option("--horizon,-T", horizon);
    app.add_option("--d", d, "recommender hop radius");
    app.add_option("--k", k, "candidate set size");
    app.add_option("--temperature", temperature);
    app.add_option("--score-basis", score_basis)->check(CLI::IsMember({"distance_to_user", "distance_to_reference"}));
    app.add_option("--delta", delta, "homophily strength");
    app.add_option("--kernel", kernel)->check(CLI::IsMember({"distance", "squared_distance"}));
    app.add_option("--edge-list", edge_list, "use a SNAP edge list instead of the homophily graph");
    app.add_option("--communities", communities);
    app.add_option("--sigma", sigma);
    app.add_option("--parameter-mode", parameter_mode)->check(CLI::IsMember({"table1", "table4"}));
    app.add_option("--seed", seed);
    app.add_option("--metrics-every", metrics_every);
    app.add_option("--snapshot-times", snapshot_times);
  }

  ExperimentConfig resolve() const {
    ExperimentConfig c = config_path.empty() ? ExperimentConfig{} : recsim::load_config(config_path);
    if (n_users) c.n_users = *n_users;
    if (n_creators) c.n_creators = *n_creators;
    if (n_topics) c.n_topics = *n_topics;
    if (horizon) c.horizon = *horizon;
    if (d) c.recommender.hops = *d;
    if (k) c.recommender.k = *k;
    if (temperature) c.recommender.temperature = *temperature;
    if (score_basis) c.recommender.score_basis = recsim::parse_score_basis(*score_basis);
    if (delta) c.graph.delta = *delta;
    if (kernel) c.graph.kernel = recsim::parse_homophily_kernel(*kernel);
    if (edge_list) {
      c.graph.source = recsim::GraphSource::edge_list;
      c.graph.path = *edge_list;
      if (!parameter_mode) c.parameter_mode = recsim::ParameterMode::table4;
    }
    if (communities) c.graph.communities = *communities;
    if (sigma) c.graph.sigma = *sigma;
    if (parameter_mode)
      c.parameter_mode = *parameter_mode == "table1" ? recsim::ParameterMode::table1 : recsim::ParameterMode::table4;
    if (seed) c.seed = *seed;
    if (metrics_every) c.metrics_every = *metrics_every;
    if (!snapshot_times.empty()) c.snapshot_times = snapshot_times;
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recommender / opinion dynamics simulator"};
  app.require_subcommand(1);

  ConfigFlags gen_flags, sim_flags, sweep_flags, ingest_flags;
  std::string gen_out = "population", sim_out = "run", sweep_out = "sweep", ingest_out = "ingest";

  auto* generate = app.add_subcommand("generate", "sample a population and write it to files");
  gen_flags.attach(*generate);
  generate->add_option("--out,-o", gen_out, "output directory");

  auto* simulate = app.add_subcommand("simulate", "run the closed-loop dynamics");
  sim_flags.attach(*simulate);
  simulate->add_option("--out,-o", sim_out, "output directory");

  recsim::SweepSpec spec;
  auto* sweep = app.add_subcommand("sweep", "final metrics over a grid of d, k, delta and seeds");
  sweep_flags.attach(*sweep);
  sweep->add_option("--out,-o", sweep_out, "output directory");
  sweep->add_option("--d-values", spec.d_values)->expected(1, -1);
  sweep->add_option("--k-values", spec.k_values)->expected(1, -1);
  sweep->add_option("--delta-values", spec.delta_values)->expected(1, -1);
  sweep->add_option("--seeds", spec.seeds)->expected(1, -1);

  auto* ingest = app.add_subcommand("ingest", "load an edge list, detect communities, seed opinions");
  ingest_flags.attach(*ingest);
  ingest->add_option("--out,-o", ingest_out, "output directory");

  std::string suite = "all";
  std::uint64_t verify_seed = 1;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "run the analytical oracle suites");
  verify->add_option("--suite", suite, "theorem1 | lemma1 | alpha | complementarity | all");
  verify->add_option("--seed", verify_seed);
  verify->add_option("--out,-o", verify_out, "write the JSON report here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      recsim::generate_population(gen_flags.resolve(), gen_out);
    } else if (*simulate) {
      const auto summary = recsim::run_experiment(sim_flags.resolve(), sim_out);
      if (!summary.metrics.empty()) {
        const auto& last = summary.metrics.back();
        std::cout << "t=" << last.t << " sat_running=" << last.sat_running << " clusterization=" << last.clusterization
                  << '\n';
      }
    } else if (*sweep) {
      for (const auto& g : recsim::run_sweep(sweep_flags.resolve(), spec, sweep_out))
        std::cout << "d=" << g.d << " k=" << g.k << " delta=" << g.delta << " median_sat=" << g.median_sat_running
                  << " median_cl=" << g.median_clusterization << '\n';
    } else if (*ingest) {
      ExperimentConfig c = ingest_flags.resolve();
      if (c.graph.source != recsim::GraphSource::edge_list) throw std::invalid_argument("ingest needs --edge-list");
      recsim::generate_population(c, ingest_out);
    } else if (*verify) {
      const auto report = recsim::verify(suite, verify_seed);
      if (verify_out.empty()) {
        std::cout << report.dump(2) << '\n';
      } else {
        std::ofstream out(verify_out);
        if (!out) throw std::runtime_error("cannot write " + verify_out);
        out << report.dump(2) << '\n';
      }
      return report["pass"].get<bool>() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "recsim: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
