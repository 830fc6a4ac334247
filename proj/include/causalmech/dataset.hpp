#pragma once

#include "causalmech/common.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace causalmech {

enum class NodeKind { Scalar, Vector, SymmetricTensor };
enum class NodeRole { Root, Intermediate, Leaf, Unconstrained };

std::string to_string(NodeKind kind);
std::string to_string(NodeRole role);
NodeKind parse_node_kind(const std::string& text);
NodeRole parse_node_role(const std::string& text);

// One (possibly tensor-valued) variable of the causal graph and the CSV columns
// holding its components, in the declared component order.
struct NodeSchema {
  std::string name;
  std::vector<std::string> columns;
  NodeKind kind = NodeKind::Scalar;
  NodeRole role = NodeRole::Unconstrained;

  int dimension() const { return static_cast<int>(columns.size()); }
  bool operator==(const NodeSchema&) const = default;
};

using Schema = std::vector<NodeSchema>;

// Throws DataError unless the schema has unique non-empty names, non-empty column
// lists, scalar nodes with one column, exactly one root and at least one leaf.
void validate_schema(const Schema& schema);
const NodeSchema& root_node(const Schema& schema);
const NodeSchema& find_node(const Schema& schema, const std::string& name);

// Aligned time histories of one experiment; series[node] is T x dimension.
struct Experiment {
  std::string id;
  std::vector<std::string> nodes;
  std::map<std::string, Matrix> series;

  Eigen::Index length() const;
  const Matrix& at(const std::string& node) const;
  // Horizontal concatenation of the given nodes' series.
  Matrix stack(std::span<const std::string> names) const;
  bool operator==(const Experiment&) const = default;
};

struct Split {
  std::vector<std::string> calibration;
  std::vector<std::string> test;
  bool operator==(const Split&) const = default;
};

struct ExperimentSet {
  Schema schema;
  std::vector<Experiment> experiments;
  Split split;

  const Experiment& find(const std::string& id) const;
  std::vector<const Experiment*> select(std::span<const std::string> ids) const;
  bool operator==(const ExperimentSet&) const = default;
};

// Reads a JSON manifest {nodes, experiments, split} and every referenced CSV.
// Relative CSV paths resolve against the manifest's directory.
ExperimentSet load_manifest(const std::filesystem::path& path);

Experiment read_experiment_csv(const std::filesystem::path& path, const std::string& id,
                               const Schema& schema);
void write_experiment_csv(const std::filesystem::path& path, const Experiment& experiment,
                          const Schema& schema);

struct ManifestEntry {
  std::string id;
  std::string path;
};
void write_manifest(const std::filesystem::path& path, const Schema& schema,
                    std::span<const ManifestEntry> entries, const Split& split);

// Per-component statistics of one node.
struct NodeStats {
  RowVector mean;
  RowVector stddev;

  Matrix apply(const Matrix& raw) const;
  Matrix invert(const Matrix& normalized) const;
  bool operator==(const NodeStats&) const = default;
};

struct Normalizer {
  std::map<std::string, NodeStats> stats;
  std::vector<std::string> warnings;

  const NodeStats& at(const std::string& node) const;
  // Statistics for the concatenation of the given nodes' columns.
  NodeStats block(std::span<const std::string> names) const;
};

// Pooled population statistics over all rows of the listed experiments.
// Constant columns keep their mean, get stddev 1 and add a warning.
Normalizer fit_normalizer(const ExperimentSet& set, std::span<const std::string> ids);
Experiment apply_normalizer(const Normalizer& normalizer, const Experiment& experiment);
Experiment invert_normalizer(const Normalizer& normalizer, const Experiment& experiment);

// Shared CSV helpers.
std::vector<std::string> split_csv_line(const std::string& line);
double parse_real(const std::string& cell, const std::string& where);
std::string format_real(double value);

}  // namespace causalmech
