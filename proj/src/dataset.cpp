#include "causalmech/dataset.hpp"

#include "causalmech/error.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace causalmech {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::Scalar: return "scalar";
    case NodeKind::Vector: return "vector";
    case NodeKind::SymmetricTensor: return "symmetric-tensor";
  }
  return "scalar";
}

std::string to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Root: return "root";
    case NodeRole::Intermediate: return "intermediate";
    case NodeRole::Leaf: return "leaf";
    case NodeRole::Unconstrained: return "unconstrained";
  }
  return "unconstrained";
}

NodeKind parse_node_kind(const std::string& text) {
  if (text == "scalar") return NodeKind::Scalar;
  if (text == "vector") return NodeKind::Vector;
  if (text == "symmetric-tensor" || text == "tensor") return NodeKind::SymmetricTensor;
  throw DataError("unknown node kind '" + text + "'");
}

NodeRole parse_node_role(const std::string& text) {
  if (text == "root") return NodeRole::Root;
  if (text == "intermediate") return NodeRole::Intermediate;
  if (text == "leaf") return NodeRole::Leaf;
  if (text == "unconstrained") return NodeRole::Unconstrained;
  throw DataError("unknown node role '" + text + "'");
}

void validate_schema(const Schema& schema) {
  if (schema.empty()) throw DataError("schema has no nodes");
  std::set<std::string> names;
  int roots = 0;
  int leaves = 0;
  for (const auto& node : schema) {
    if (node.name.empty()) throw DataError("node with empty name");
    if (!names.insert(node.name).second) throw DataError("duplicate node '" + node.name + "'");
    if (node.columns.empty()) throw DataError("node '" + node.name + "' has no columns");
    if (node.kind == NodeKind::Scalar && node.columns.size() != 1) {
      throw DataError("scalar node '" + node.name + "' must have exactly one column");
    }
    roots += node.role == NodeRole::Root;
    leaves += node.role == NodeRole::Leaf;
  }
  if (roots != 1) throw DataError("schema must declare exactly one root node");
  if (leaves < 1) throw DataError("schema must declare at least one leaf node");
}

const NodeSchema& root_node(const Schema& schema) {
  for (const auto& node : schema) {
    if (node.role == NodeRole::Root) return node;
  }
  throw DataError("schema has no root node");
}

const NodeSchema& find_node(const Schema& schema, const std::string& name) {
  for (const auto& node : schema) {
    if (node.name == name) return node;
  }
  throw DataError("unknown node '" + name + "'");
}

Eigen::Index Experiment::length() const {
  return series.empty() ? 0 : series.begin()->second.rows();
}

const Matrix& Experiment::at(const std::string& node) const {
  auto it = series.find(node);
  if (it == series.end()) {
    throw DataError("experiment '" + id + "' has no series for node '" + node + "'");
  }
  return it->second;
}

Matrix Experiment::stack(std::span<const std::string> names) const {
  Eigen::Index cols = 0;
  for (const auto& name : names) cols += at(name).cols();
  Matrix out(length(), cols);
  Eigen::Index offset = 0;
  for (const auto& name : names) {
    const Matrix& block = at(name);
    out.middleCols(offset, block.cols()) = block;
    offset += block.cols();
  }
  return out;
}

const Experiment& ExperimentSet::find(const std::string& id) const {
  for (const auto& e : experiments) {
    if (e.id == id) return e;
  }
  throw DataError("unknown experiment id '" + id + "'");
}

std::vector<const Experiment*> ExperimentSet::select(std::span<const std::string> ids) const {
  std::vector<const Experiment*> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(&find(id));
  return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream stream(line);
  while (std::getline(stream, cell, ',')) {
    auto first = cell.find_first_not_of(" \t\r");
    auto last = cell.find_last_not_of(" \t\r");
    cells.push_back(first == std::string::npos ? std::string{}
                                               : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_real(const std::string& cell, const std::string& where) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (cell.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    throw DataError(where + ": non-numeric cell '" + cell + "'");
  }
  return value;
}

std::string format_real(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

Experiment read_experiment_csv(const fs::path& path, const std::string& id,
                               const Schema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open experiment file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> column_index;
  for (std::size_t c = 0; c < header.size(); ++c) column_index[header[c]] = c;

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto cells = split_csv_line(line);
    const std::string where = path.string() + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw DataError(where + ": ragged row (" + std::to_string(cells.size()) + " cells, header has " +
                      std::to_string(header.size()) + ")");
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) row[c] = parse_real(cells[c], where);
    rows.push_back(std::move(row));
  }
  if (rows.size() < 2) throw DataError(path.string() + ": series too short (need at least 2 rows)");

  Experiment experiment;
  experiment.id = id;
  const auto T = static_cast<Eigen::Index>(rows.size());
  for (const auto& node : schema) {
    Matrix block(T, node.dimension());
    for (int k = 0; k < node.dimension(); ++k) {
      auto it = column_index.find(node.columns[static_cast<std::size_t>(k)]);
      if (it == column_index.end()) {
        throw DataError(path.string() + ": column '" + node.columns[static_cast<std::size_t>(k)] +
                        "' of node '" + node.name + "' is missing");
      }
      for (Eigen::Index t = 0; t < T; ++t) block(t, k) = rows[static_cast<std::size_t>(t)][it->second];
    }
    experiment.nodes.push_back(node.name);
    experiment.series.emplace(node.name, std::move(block));
  }
  return experiment;
}

void write_experiment_csv(const fs::path& path, const Experiment& experiment, const Schema& schema) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  bool first = true;
  for (const auto& node : schema) {
    for (const auto& column : node.columns) {
      out << (first ? "" : ",") << column;
      first = false;
    }
  }
  out << '\n';
  for (Eigen::Index t = 0; t < experiment.length(); ++t) {
    first = true;
    for (const auto& node : schema) {
      const Matrix& block = experiment.at(node.name);
      for (Eigen::Index k = 0; k < block.cols(); ++k) {
        out << (first ? "" : ",") << format_real(block(t, k));
        first = false;
      }
    }
    out << '\n';
  }
}

namespace {

Schema parse_schema(const json& nodes) {
  Schema schema;
  for (const auto& item : nodes) {
    NodeSchema node;
    node.name = item.at("name").get<std::string>();
    node.columns = item.at("columns").get<std::vector<std::string>>();
    node.kind = parse_node_kind(item.value("kind", std::string("scalar")));
    node.role = parse_node_role(item.value("role", std::string("unconstrained")));
    schema.push_back(std::move(node));
  }
  return schema;
}

}  // namespace

ExperimentSet load_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("manifest not found: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& ex) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + ex.what());
  }

  ExperimentSet set;
  try {
    set.schema = parse_schema(doc.at("nodes"));
    validate_schema(set.schema);
    const auto& entries = doc.at("experiments");
    if (entries.empty()) throw DataError("empty experiment list");
    std::set<std::string> seen;
    for (const auto& entry : entries) {
      auto id = entry.at("id").get<std::string>();
      if (!seen.insert(id).second) throw DataError("duplicate experiment id '" + id + "'");
      fs::path csv = entry.at("path").get<std::string>();
      if (csv.is_relative()) csv = path.parent_path() / csv;
      set.experiments.push_back(read_experiment_csv(csv, id, set.schema));
    }
    const auto& split = doc.at("split");
    set.split.calibration = split.value("calibration", std::vector<std::string>{});
    set.split.test = split.value("test", std::vector<std::string>{});
  } catch (const json::exception& ex) {
    throw DataError("manifest " + path.string() + ": " + ex.what());
  }

  std::set<std::string> calibration(set.split.calibration.begin(), set.split.calibration.end());
  std::set<std::string> test(set.split.test.begin(), set.split.test.end());
  if (calibration.size() != set.split.calibration.size() || test.size() != set.split.test.size()) {
    throw DataError("split lists contain duplicate ids");
  }
  for (const auto& id : calibration) {
    if (test.count(id)) throw DataError("experiment '" + id + "' is in both calibration and test");
  }
  for (const auto& id : set.split.calibration) (void)set.find(id);
  for (const auto& id : set.split.test) (void)set.find(id);
  if (calibration.size() + test.size() != set.experiments.size()) {
    throw DataError("split does not cover every experiment");
  }
  return set;
}

void write_manifest(const fs::path& path, const Schema& schema, std::span<const ManifestEntry> entries,
                    const Split& split) {
  json doc;
  doc["nodes"] = json::array();
  for (const auto& node : schema) {
    doc["nodes"].push_back({{"name", node.name},
                            {"columns", node.columns},
                            {"kind", to_string(node.kind)},
                            {"role", to_string(node.role)}});
  }
  doc["experiments"] = json::array();
  for (const auto& entry : entries) doc["experiments"].push_back({{"id", entry.id}, {"path", entry.path}});
  doc["split"] = {{"calibration", split.calibration}, {"test", split.test}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << doc.dump(2) << '\n';
}

Matrix NodeStats::apply(const Matrix& raw) const {
  if (raw.cols() != mean.size()) {
    throw DataError("column-count mismatch: normalizer has " + std::to_string(mean.size()) +
                    " columns, data has " + std::to_string(raw.cols()));
  }
  return (raw.rowwise() - mean).array().rowwise() / stddev.array();
}

Matrix NodeStats::invert(const Matrix& normalized) const {
  if (normalized.cols() != mean.size()) {
    throw DataError("column-count mismatch: normalizer has " + std::to_string(mean.size()) +
                    " columns, data has " + std::to_string(normalized.cols()));
  }
  return (normalized.array().rowwise() * stddev.array()).matrix().rowwise() + mean;
}

const NodeStats& Normalizer::at(const std::string& node) const {
  auto it = stats.find(node);
  if (it == stats.end()) throw DataError("normalizer has no statistics for node '" + node + "'");
  return it->second;
}

NodeStats Normalizer::block(std::span<const std::string> names) const {
  Eigen::Index cols = 0;
  for (const auto& name : names) cols += at(name).mean.size();
  NodeStats out{RowVector(cols), RowVector(cols)};
  Eigen::Index offset = 0;
  for (const auto& name : names) {
    const auto& s = at(name);
    out.mean.segment(offset, s.mean.size()) = s.mean;
    out.stddev.segment(offset, s.stddev.size()) = s.stddev;
    offset += s.mean.size();
  }
  return out;
}

Normalizer fit_normalizer(const ExperimentSet& set, std::span<const std::string> ids) {
  if (ids.empty()) throw DataError("normalizer needs at least one calibration experiment");
  const auto experiments = set.select(ids);
  Normalizer normalizer;
  for (const auto& node : set.schema) {
    const auto dim = node.dimension();
    RowVector sum = RowVector::Zero(dim);
    Eigen::Index rows = 0;
    for (const auto* e : experiments) {
      sum += e->at(node.name).colwise().sum();
      rows += e->length();
    }
    RowVector mean = sum / static_cast<double>(rows);
    RowVector sq = RowVector::Zero(dim);
    for (const auto* e : experiments) {
      sq += (e->at(node.name).rowwise() - mean).array().square().matrix().colwise().sum();
    }
    RowVector stddev = (sq / static_cast<double>(rows)).array().sqrt().matrix();
    for (int k = 0; k < dim; ++k) {
      if (!(stddev(k) > 1e-12 * std::max(1.0, std::abs(mean(k))))) {
        stddev(k) = 1.0;
        normalizer.warnings.push_back("column '" + node.columns[static_cast<std::size_t>(k)] +
                                      "' is constant; standard deviation set to 1");
      }
    }
    normalizer.stats.emplace(node.name, NodeStats{std::move(mean), std::move(stddev)});
  }
  return normalizer;
}

namespace {

Experiment transform(const Normalizer& normalizer, const Experiment& experiment, bool forward) {
  if (experiment.series.size() != normalizer.stats.size()) {
    throw DataError("experiment '" + experiment.id + "' has " + std::to_string(experiment.series.size()) +
                    " nodes, normalizer has " + std::to_string(normalizer.stats.size()));
  }
  Experiment out = experiment;
  for (auto& [name, block] : out.series) {
    const auto& stats = normalizer.at(name);
    block = forward ? stats.apply(block) : stats.invert(block);
  }
  return out;
}

}  // namespace

Experiment apply_normalizer(const Normalizer& normalizer, const Experiment& experiment) {
  return transform(normalizer, experiment, true);
}

Experiment invert_normalizer(const Normalizer& normalizer, const Experiment& experiment) {
  return transform(normalizer, experiment, false);
}

}  // namespace causalmech
