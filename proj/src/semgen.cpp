#include "causalmech/semgen.hpp"

#include "causalmech/error.hpp"
#include "causalmech/graphops.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace causalmech {

using nlohmann::json;

std::string to_string(MechanismKind kind) { return kind == MechanismKind::Linear ? "linear" : "tanh"; }

MechanismKind parse_mechanism_kind(const std::string& text) {
  if (text == "linear") return MechanismKind::Linear;
  if (text == "tanh") return MechanismKind::Tanh;
  throw UsageError("unknown mechanism '" + text + "'");
}

CausalGraph random_dag(std::size_t n, double p, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("random_dag needs at least two nodes");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("edge probability must lie in [0, 1]");
  std::vector<std::string> names{"U"};
  for (std::size_t i = 1; i < n; ++i) names.push_back("V" + std::to_string(i));
  CausalGraph dag(names, 0);

  std::mt19937_64 rng(derive_seed(seed, 1));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin() + 1, order.end(), rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (unit(rng) < p) dag.add_directed(order[a], order[b]);
    }
  }
  return dag;
}

namespace {

double draw_weight(std::mt19937_64& rng, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (;;) {
    const double w = dist(rng);
    if (std::abs(w) > 0.1) return w;
  }
}

}  // namespace

SemSpec make_spec(const CausalGraph& dag, const SemOptions& options, std::uint64_t seed) {
  if (!(options.weight_scale > 0.1)) throw std::invalid_argument("weight_scale must exceed 0.1");
  SemSpec spec;
  spec.dag = dag;
  spec.dag.set_root(0);
  spec.length = options.length;
  spec.seed = seed;
  spec.mechanisms.resize(dag.size());
  std::mt19937_64 rng(derive_seed(seed, 2));
  std::uniform_real_distribution<double> gain(-options.gain_scale, options.gain_scale);
  for (std::size_t v = 1; v < dag.size(); ++v) {
    auto& mech = spec.mechanisms[v];
    mech.kind = options.kind;
    mech.noise = options.noise;
    bool root_parent = false;
    for (auto p : dag.parents(v)) {
      mech.terms.push_back({p, 0, draw_weight(rng, options.weight_scale)});
      root_parent |= p == 0;
    }
    mech.gain = root_parent && options.gain_scale > 0.0 ? gain(rng) : 0.0;
  }
  validate_spec(spec);
  return spec;
}

void validate_spec(const SemSpec& spec) {
  const std::size_t n = spec.dag.size();
  if (n < 2) throw DataError("SEM needs a root and at least one variable");
  if (spec.mechanisms.size() != n) throw DataError("SEM needs one mechanism per node");
  if (spec.length < 2) throw DataError("SEM series too short");
  if (!spec.dag.parents(0).empty()) throw DataError("SEM root has parents");
  if (!spec.dag.fully_oriented()) throw DataError("SEM graph has undirected edges");
  for (std::size_t v = 1; v < n; ++v) {
    for (const auto& term : spec.mechanisms[v].terms) {
      if (term.parent >= n || term.parent == v) throw DataError("SEM term refers to an invalid parent");
      if (term.lag < 0) throw DataError("SEM lag must be non-negative");
      if (term.lag == 0 && !spec.dag.directed(term.parent, v)) {
        throw DataError("SEM instantaneous term without a matching edge");
      }
    }
    if (spec.mechanisms[v].noise < 0.0) throw DataError("SEM noise scale must be non-negative");
  }
  if (!validate_dag(spec.dag).acyclic) throw DataError("SEM graph is cyclic");
}

Experiment simulate(const SemSpec& spec, const std::string& id) {
  validate_spec(spec);
  const std::size_t n = spec.dag.size();
  const int T = spec.length;
  Matrix values = Matrix::Zero(T, static_cast<Eigen::Index>(n));

  const auto& path = spec.root_path;
  for (int t = 0; t < T; ++t) {
    const double s = static_cast<double>(t) / static_cast<double>(T - 1);
    values(t, 0) = path.ramp * s + path.amplitude * std::sin(2.0 * std::numbers::pi * path.cycles * s + path.phase);
  }

  // Independent noise streams per node.
  Matrix noise = Matrix::Zero(T, static_cast<Eigen::Index>(n));
  for (std::size_t v = 1; v < n; ++v) {
    std::mt19937_64 rng(derive_seed(spec.seed, 3, v));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < T; ++t) noise(t, static_cast<Eigen::Index>(v)) = normal(rng);
  }

  const auto order = topological_order(spec.dag);
  for (int t = 0; t < T; ++t) {
    const double u = values(t, 0);
    for (auto v : order) {
      if (v == 0) continue;
      const auto& mech = spec.mechanisms[v];
      double sum = mech.bias;
      for (const auto& term : mech.terms) {
        const int src = t - term.lag;
        if (src < 0) continue;
        const double parent = values(src, static_cast<Eigen::Index>(term.parent));
        sum += term.parent == 0 ? term.weight * parent : term.weight * (1.0 + mech.gain * u) * parent;
      }
      const double signal = mech.kind == MechanismKind::Tanh ? std::tanh(sum) : sum;
      values(t, static_cast<Eigen::Index>(v)) = signal + mech.noise * noise(t, static_cast<Eigen::Index>(v));
    }
  }

  Experiment e;
  e.id = id;
  e.nodes = spec.dag.nodes();
  for (std::size_t v = 0; v < n; ++v) e.series[spec.dag.name(v)] = values.col(static_cast<Eigen::Index>(v));
  return e;
}

Schema sem_schema(const SemSpec& spec) {
  Schema schema;
  for (std::size_t v = 0; v < spec.dag.size(); ++v) {
    NodeSchema node;
    node.name = spec.dag.name(v);
    node.columns = {node.name};
    node.kind = NodeKind::Scalar;
    if (v == 0) {
      node.role = NodeRole::Root;
    } else {
      bool has_child = !spec.dag.children(v).empty();
      for (std::size_t w = 1; w < spec.dag.size() && !has_child; ++w) {
        for (const auto& term : spec.mechanisms[w].terms) has_child |= term.parent == v;
      }
      node.role = has_child ? NodeRole::Intermediate : NodeRole::Leaf;
    }
    schema.push_back(std::move(node));
  }
  return schema;
}

bool d_separated(const CausalGraph& dag, std::size_t i, std::size_t j, const std::set<std::size_t>& given) {
  const std::size_t n = dag.size();
  if (i >= n || j >= n) throw std::out_of_range("d_separated: unknown node");
  for (auto g : given) {
    if (g >= n) throw std::out_of_range("d_separated: unknown node");
  }
  if (i == j) return false;
  if (given.count(i) || given.count(j)) return true;

  // Ancestral closure of {i, j} and the conditioning set.
  std::vector<char> keep(n, 0);
  std::vector<std::size_t> stack{i, j};
  stack.insert(stack.end(), given.begin(), given.end());
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    if (keep[v]) continue;
    keep[v] = 1;
    for (auto p : dag.parents(v)) stack.push_back(p);
  }

  // Moralize: link each kept node to its parents and marry co-parents.
  std::vector<std::vector<char>> adj(n, std::vector<char>(n, 0));
  for (std::size_t v = 0; v < n; ++v) {
    if (!keep[v]) continue;
    const auto parents = dag.parents(v);
    for (std::size_t a = 0; a < parents.size(); ++a) {
      adj[v][parents[a]] = adj[parents[a]][v] = 1;
      for (std::size_t b = a + 1; b < parents.size(); ++b) adj[parents[a]][parents[b]] = adj[parents[b]][parents[a]] = 1;
    }
  }

  std::vector<char> seen(n, 0);
  stack.assign(1, i);
  seen[i] = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (std::size_t w = 0; w < n; ++w) {
      if (!adj[v][w] || seen[w] || given.count(w)) continue;
      if (w == j) return false;
      seen[w] = 1;
      stack.push_back(w);
    }
  }
  return true;
}

std::string spec_to_json(const SemSpec& spec) {
  json doc;
  doc["dag"] = json::parse(graph_to_json(spec.dag));
  doc["length"] = spec.length;
  doc["seed"] = spec.seed;
  doc["root_path"] = {{"ramp", spec.root_path.ramp},
                      {"amplitude", spec.root_path.amplitude},
                      {"cycles", spec.root_path.cycles},
                      {"phase", spec.root_path.phase}};
  doc["mechanisms"] = json::array();
  for (std::size_t v = 1; v < spec.mechanisms.size(); ++v) {
    const auto& mech = spec.mechanisms[v];
    json terms = json::array();
    for (const auto& term : mech.terms) {
      terms.push_back({{"parent", spec.dag.name(term.parent)}, {"lag", term.lag}, {"weight", term.weight}});
    }
    doc["mechanisms"].push_back({{"node", spec.dag.name(v)},
                                 {"kind", to_string(mech.kind)},
                                 {"bias", mech.bias},
                                 {"gain", mech.gain},
                                 {"noise", mech.noise},
                                 {"terms", terms}});
  }
  return doc.dump(2) + "\n";
}

SemSpec spec_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    SemSpec spec;
    spec.dag = graph_from_json(doc.at("dag").dump());
    spec.dag.set_root(0);
    spec.length = doc.at("length").get<int>();
    spec.seed = doc.at("seed").get<std::uint64_t>();
    const auto& path = doc.at("root_path");
    spec.root_path = {path.at("ramp").get<double>(), path.at("amplitude").get<double>(),
                      path.at("cycles").get<double>(), path.at("phase").get<double>()};
    spec.mechanisms.resize(spec.dag.size());
    for (const auto& item : doc.at("mechanisms")) {
      auto& mech = spec.mechanisms.at(spec.dag.index_of(item.at("node").get<std::string>()));
      mech.kind = parse_mechanism_kind(item.at("kind").get<std::string>());
      mech.bias = item.at("bias").get<double>();
      mech.gain = item.at("gain").get<double>();
      mech.noise = item.at("noise").get<double>();
      for (const auto& term : item.at("terms")) {
        mech.terms.push_back({spec.dag.index_of(term.at("parent").get<std::string>()), term.at("lag").get<int>(),
                              term.at("weight").get<double>()});
      }
    }
    validate_spec(spec);
    return spec;
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed SEM JSON: ") + ex.what());
  }
}

}  // namespace causalmech
