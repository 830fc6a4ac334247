#pragma once

#include "causalmech/discovery.hpp"
#include "causalmech/surrogate.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace causalmech {

struct UqConfig {
  int samples = 200;
  double dropout_rate = 0.2;
  double level = 0.95;
};

// Settings of every pipeline stage. Relative paths resolve against the config
// file's directory.
struct PipelineConfig {
  std::string profile = "example1";
  std::filesystem::path manifest;
  std::filesystem::path out = "out";
  // Graph for decompose/train; defaults to <out>/consensus.json.
  std::filesystem::path graph;
  // Directory of trained models for predict/evaluate; defaults to <out>/models.
  std::filesystem::path models;
  // Optional SEM truth JSON used to score discovery.
  std::filesystem::path truth;
  // Experiment to predict; empty means every test experiment.
  std::string experiment;
  DiscoveryConfig discovery;
  int lags = 0;
  TrainConfig train;
  // Per-task overrides keyed by LearningTask::key().
  std::map<std::string, TrainConfig> task_train;
  UqConfig uq;
  std::uint64_t seed = 0;
  int jobs = 1;
};

// "example1" (two GRU layers of 32, dropout 0.2, batch 32) or "table2" (three
// layers of 32, no dropout, batch 128).
PipelineConfig profile_config(const std::string& name);

// Profile defaults overridden by the JSON document. The profile comes from
// `profile` when given, else from the document, else example1.
PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir,
                                const std::optional<std::string>& profile = std::nullopt);
PipelineConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& profile = std::nullopt);
std::string config_to_json(const PipelineConfig& cfg);

// Each stage validates all inputs and computes everything before writing files.
// They return diagnostics lines that were also written to the stage log.
std::vector<std::string> run_discover(const PipelineConfig& cfg);
std::vector<std::string> run_decompose(const PipelineConfig& cfg);
// Tasks that hit a numerical failure are reported and skipped; the others are
// written. Throws NumericalError after writing if any task failed.
std::vector<std::string> run_train(const PipelineConfig& cfg);
std::vector<std::string> run_predict(const PipelineConfig& cfg);
std::vector<std::string> run_evaluate(const PipelineConfig& cfg);
std::vector<std::string> run_metrics(const std::filesystem::path& dump_dir, const std::filesystem::path& out);

struct SimulateOptions {
  int nodes = 3;
  double edge_probability = 0.5;
  int calibration = 8;
  int test = 4;
  int length = 100;
  double noise = 0.05;
  std::string mechanism = "tanh";
  // Chain U -> V1 -> ... instead of a random DAG.
  bool chain = false;
};

// Synthetic data set: one SEM, one experiment per root path, plus manifest.json
// and truth.json under `out`.
std::vector<std::string> run_simulate(const SimulateOptions& options, std::uint64_t seed, const std::filesystem::path& out);

}  // namespace causalmech
