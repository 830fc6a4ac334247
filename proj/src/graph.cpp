#include "causalmech/graph.hpp"

#include "causalmech/dataset.hpp"
#include "causalmech/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace causalmech {

using nlohmann::json;

CausalGraph::CausalGraph(std::vector<std::string> nodes, std::optional<std::size_t> root)
    : nodes_(std::move(nodes)), root_(root), marks_(nodes_.size() * nodes_.size(), 0) {
  if (root_ && *root_ >= nodes_.size()) throw std::out_of_range("root index out of range");
}

CausalGraph CausalGraph::complete(std::vector<std::string> nodes, std::optional<std::size_t> root) {
  CausalGraph graph(std::move(nodes), root);
  for (std::size_t i = 0; i < graph.size(); ++i) {
    for (std::size_t j = i + 1; j < graph.size(); ++j) graph.add_undirected(i, j);
  }
  return graph;
}

std::size_t CausalGraph::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i] == name) return i;
  }
  throw DataError("unknown node '" + name + "'");
}

void CausalGraph::check(std::size_t i, std::size_t j) const {
  if (i >= nodes_.size() || j >= nodes_.size()) throw std::out_of_range("node index out of range");
  if (i == j) throw std::invalid_argument("self-loops are not allowed (" + nodes_[i] + ")");
}

void CausalGraph::add_undirected(std::size_t i, std::size_t j) {
  check(i, j);
  set_mark(i, j, true);
  set_mark(j, i, true);
}

void CausalGraph::add_directed(std::size_t i, std::size_t j) {
  check(i, j);
  set_mark(i, j, true);
  set_mark(j, i, false);
}

void CausalGraph::orient(std::size_t i, std::size_t j) {
  check(i, j);
  if (!adjacent(i, j)) throw std::logic_error("cannot orient a missing edge " + nodes_[i] + " - " + nodes_[j]);
  set_mark(i, j, true);
  set_mark(j, i, false);
}

void CausalGraph::remove_edge(std::size_t i, std::size_t j) {
  check(i, j);
  set_mark(i, j, false);
  set_mark(j, i, false);
}

void CausalGraph::clear_edges() { std::fill(marks_.begin(), marks_.end(), 0); }

std::vector<std::size_t> CausalGraph::parents(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (k != i && directed(k, i)) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> CausalGraph::children(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (k != i && directed(i, k)) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> CausalGraph::undirected_neighbors(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (k != i && undirected(i, k)) out.push_back(k);
  }
  return out;
}

std::vector<std::size_t> CausalGraph::adjacent_nodes(std::size_t i) const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < size(); ++k) {
    if (k != i && adjacent(i, k)) out.push_back(k);
  }
  return out;
}

std::vector<Edge> CausalGraph::directed_edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = 0; j < size(); ++j) {
      if (i != j && directed(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

std::vector<Edge> CausalGraph::undirected_edges() const {
  std::vector<Edge> out;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      if (undirected(i, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

std::size_t CausalGraph::edge_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) count += adjacent(i, j);
  }
  return count;
}

bool CausalGraph::has_directed_path(std::size_t from, std::size_t to) const {
  std::vector<char> seen(size(), 0);
  std::vector<std::size_t> stack{from};
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (auto c : children(v)) {
      if (c == to) return true;
      if (!seen[c]) {
        seen[c] = 1;
        stack.push_back(c);
      }
    }
  }
  return false;
}

CausalGraph CausalGraph::skeleton() const {
  CausalGraph out(nodes_, root_);
  for (std::size_t i = 0; i < size(); ++i) {
    for (std::size_t j = i + 1; j < size(); ++j) {
      if (adjacent(i, j)) out.add_undirected(i, j);
    }
  }
  return out;
}

std::string graph_to_json(const CausalGraph& graph) {
  json doc;
  doc["nodes"] = graph.nodes();
  doc["root"] = graph.root() ? json(graph.name(*graph.root())) : json(nullptr);
  doc["edges"] = json::array();
  for (const auto& [from, to] : graph.directed_edges()) {
    json edge{{"from", graph.name(from)}, {"to", graph.name(to)}, {"directed", true}};
    auto it = graph.inclusion().find({from, to});
    if (it != graph.inclusion().end()) {
      edge["inclusion"] = it->second.value();
      edge["count"] = it->second.count;
      edge["total"] = it->second.total;
    }
    doc["edges"].push_back(std::move(edge));
  }
  for (const auto& [a, b] : graph.undirected_edges()) {
    doc["edges"].push_back({{"from", graph.name(a)}, {"to", graph.name(b)}, {"directed", false}});
  }
  return doc.dump(2) + "\n";
}

CausalGraph graph_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    CausalGraph graph(doc.at("nodes").get<std::vector<std::string>>());
    if (doc.contains("root") && !doc["root"].is_null()) {
      graph.set_root(graph.index_of(doc["root"].get<std::string>()));
    }
    for (const auto& edge : doc.at("edges")) {
      const auto from = graph.index_of(edge.at("from").get<std::string>());
      const auto to = graph.index_of(edge.at("to").get<std::string>());
      if (graph.adjacent(from, to)) throw DataError("duplicate edge in graph JSON");
      if (edge.value("directed", true)) {
        graph.add_directed(from, to);
        if (edge.contains("count")) {
          graph.inclusion()[{from, to}] = Inclusion{edge["count"].get<int>(), edge.at("total").get<int>()};
        }
      } else {
        graph.add_undirected(from, to);
      }
    }
    return graph;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed graph JSON: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw DataError(std::string("malformed graph JSON: ") + ex.what());
  }
}

std::string graph_to_dot(const CausalGraph& graph, const std::string& title) {
  std::ostringstream out;
  out << "digraph " << title << " {\n";
  for (const auto& node : graph.nodes()) out << "  \"" << node << "\";\n";
  for (const auto& [from, to] : graph.directed_edges()) {
    out << "  \"" << graph.name(from) << "\" -> \"" << graph.name(to) << "\"";
    auto it = graph.inclusion().find({from, to});
    if (it != graph.inclusion().end()) {
      char label[32];
      std::snprintf(label, sizeof label, "%.4g", it->second.value());
      out << " [label=\"" << label << "\"]";
    }
    out << ";\n";
  }
  for (const auto& [a, b] : graph.undirected_edges()) {
    out << "  \"" << graph.name(a) << "\" -> \"" << graph.name(b) << "\" [dir=none];\n";
  }
  out << "}\n";
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace causalmech
