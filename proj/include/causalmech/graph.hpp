#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace causalmech {

// Inclusion probability kept as an exact ratio count / total.
struct Inclusion {
  int count = 0;
  int total = 1;

  double value() const { return static_cast<double>(count) / static_cast<double>(total); }
  bool operator==(const Inclusion&) const = default;
};

using Edge = std::pair<std::size_t, std::size_t>;

// Partially directed graph over named nodes. An edge between i and j is either
// undirected or oriented; at most one edge per unordered pair, no self-loops.
class CausalGraph {
 public:
  CausalGraph() = default;
  explicit CausalGraph(std::vector<std::string> nodes, std::optional<std::size_t> root = std::nullopt);

  static CausalGraph complete(std::vector<std::string> nodes, std::optional<std::size_t> root = std::nullopt);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::string& name(std::size_t i) const { return nodes_.at(i); }
  std::size_t index_of(const std::string& name) const;
  std::optional<std::size_t> root() const { return root_; }
  void set_root(std::optional<std::size_t> root) { root_ = root; }

  bool adjacent(std::size_t i, std::size_t j) const { return mark(i, j) || mark(j, i); }
  // True for an oriented edge i -> j.
  bool directed(std::size_t i, std::size_t j) const { return mark(i, j) && !mark(j, i); }
  bool undirected(std::size_t i, std::size_t j) const { return mark(i, j) && mark(j, i); }

  void add_undirected(std::size_t i, std::size_t j);
  void add_directed(std::size_t i, std::size_t j);
  // Turns an existing edge between i and j into i -> j.
  void orient(std::size_t i, std::size_t j);
  void remove_edge(std::size_t i, std::size_t j);
  void clear_edges();

  std::vector<std::size_t> parents(std::size_t i) const;
  std::vector<std::size_t> children(std::size_t i) const;
  std::vector<std::size_t> undirected_neighbors(std::size_t i) const;
  std::vector<std::size_t> adjacent_nodes(std::size_t i) const;

  std::vector<Edge> directed_edges() const;
  // Undirected edges as (i, j) with i < j.
  std::vector<Edge> undirected_edges() const;
  std::size_t edge_count() const;
  bool fully_oriented() const { return undirected_edges().empty(); }
  // True if a directed path from `from` to `to` exists (length >= 1).
  bool has_directed_path(std::size_t from, std::size_t to) const;
  CausalGraph skeleton() const;

  std::map<Edge, Inclusion>& inclusion() { return inclusion_; }
  const std::map<Edge, Inclusion>& inclusion() const { return inclusion_; }

  bool operator==(const CausalGraph&) const = default;

 private:
  bool mark(std::size_t i, std::size_t j) const { return marks_[i * nodes_.size() + j] != 0; }
  void set_mark(std::size_t i, std::size_t j, bool value) {
    marks_[i * nodes_.size() + j] = value ? 1 : 0;
  }
  void check(std::size_t i, std::size_t j) const;

  std::vector<std::string> nodes_;
  std::optional<std::size_t> root_;
  std::vector<unsigned char> marks_;
  std::map<Edge, Inclusion> inclusion_;
};

// JSON report {nodes, root, edges: [{from, to, inclusion?, directed}]}.
std::string graph_to_json(const CausalGraph& graph);
CausalGraph graph_from_json(const std::string& text);
// DOT text; inclusion probabilities, when present, become edge labels.
std::string graph_to_dot(const CausalGraph& graph, const std::string& title = "causal_graph");

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace causalmech
