#include "causalmech/error.hpp"
#include "causalmech/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace causalmech;

namespace {

struct Flags {
  std::string config;
  std::string out;
  std::string profile;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string experiment;
  std::string manifest;
  std::string graph;
  std::string truth;
};

PipelineConfig resolve(const Flags& f, const CLI::App& app) {
  const std::optional<std::string> profile = f.profile.empty() ? std::nullopt : std::optional(f.profile);
  PipelineConfig cfg = f.config.empty() ? profile_config(profile.value_or("example1")) : load_config(f.config, profile);
  if (!f.out.empty()) cfg.out = f.out;
  if (app.count("--seed")) cfg.seed = f.seed;
  if (app.count("--jobs")) cfg.jobs = f.jobs;
  if (!f.experiment.empty()) cfg.experiment = f.experiment;
  if (!f.manifest.empty()) cfg.manifest = f.manifest;
  if (!f.graph.empty()) cfg.graph = f.graph;
  if (!f.truth.empty()) cfg.truth = f.truth;
  if (cfg.jobs < 1) throw UsageError("--jobs must be positive");
  return cfg;
}

void print(const std::vector<std::string>& lines) {
  for (const auto& line : lines) std::cout << line << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal discovery, task decomposition and uncertainty propagation for path-dependent responses"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "Pipeline config JSON");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--seed", f.seed, "Master seed");
  app.add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--profile", f.profile, "Hyperparameter profile (example1, table2)");
  app.add_option("--manifest", f.manifest, "Experiment manifest (overrides the config)");
  app.add_option("--graph", f.graph, "Graph JSON for decompose/train");
  app.add_option("--truth", f.truth, "True DAG or SEM JSON for scoring discovery");

  auto* discover = app.add_subcommand("discover", "Per-experiment discovery and consensus graph");
  auto* decompose = app.add_subcommand("decompose", "Split the graph into learning tasks");
  auto* train = app.add_subcommand("train", "Train one recurrent surrogate per task");
  auto* predict = app.add_subcommand("predict", "Monte-Carlo dropout propagation with intervals");
  predict->add_option("--experiment", f.experiment, "Experiment id (default: the test split)");
  auto* evaluate = app.add_subcommand("evaluate", "Scaled-MSE and eCDF on both splits");
  auto* metrics = app.add_subcommand("metrics", "Graph and fabric features of a contact dump");
  std::string dump;
  metrics->add_option("dump", dump, "Directory of contact CSVs")->required();
  auto* simulate = app.add_subcommand("simulate", "Synthetic SEM data set with known truth");
  SimulateOptions sim;
  simulate->add_option("--nodes", sim.nodes, "Node count including the root");
  simulate->add_option("--edge-prob", sim.edge_probability, "Edge probability of the random DAG");
  simulate->add_flag("--chain", sim.chain, "Use the chain U -> V1 -> ...");
  simulate->add_option("--calibration", sim.calibration, "Calibration experiments");
  simulate->add_option("--test", sim.test, "Test experiments");
  simulate->add_option("--length", sim.length, "Steps per experiment");
  simulate->add_option("--noise", sim.noise, "Noise scale");
  simulate->add_option("--mechanism", sim.mechanism, "linear or tanh");
  for (auto* sub : {discover, decompose, train, predict, evaluate, metrics, simulate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (metrics->parsed()) {
      print(run_metrics(dump, f.out.empty() ? "out" : f.out));
    } else if (simulate->parsed()) {
      print(run_simulate(sim, f.seed, f.out.empty() ? "out" : f.out));
    } else {
      const auto cfg = resolve(f, app);
      if (discover->parsed()) print(run_discover(cfg));
      if (decompose->parsed()) print(run_decompose(cfg));
      if (train->parsed()) print(run_train(cfg));
      if (predict->parsed()) print(run_predict(cfg));
      if (evaluate->parsed()) print(run_evaluate(cfg));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
