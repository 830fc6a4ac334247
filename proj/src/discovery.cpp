#include "causalmech/discovery.hpp"

#include "causalmech/error.hpp"
#include "causalmech/graphops.hpp"
#include "causalmech/semgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace causalmech {

namespace {

constexpr double kTieTolerance = 1e-12;

Edge key(std::size_t a, std::size_t b) { return a < b ? Edge{a, b} : Edge{b, a}; }

// Calls fn on every k-subset of pool in lexicographic order; stops when fn returns true.
bool for_each_subset(const std::vector<std::size_t>& pool, std::size_t k,
                     const std::function<bool(const std::vector<std::size_t>&)>& fn) {
  if (k > pool.size()) return false;
  std::vector<std::size_t> pick(k);
  for (std::size_t i = 0; i < k; ++i) pick[i] = i;
  std::vector<std::size_t> subset(k);
  for (;;) {
    for (std::size_t i = 0; i < k; ++i) subset[i] = pool[pick[i]];
    if (fn(subset)) return true;
    std::size_t i = k;
    while (i > 0 && pick[i - 1] == pool.size() - k + (i - 1)) --i;
    if (i == 0) return false;
    ++pick[i - 1];
    for (std::size_t r = i; r < k; ++r) pick[r] = pick[r - 1] + 1;
  }
}

// Orients a -> b unless that points into the root or closes a cycle.
bool try_orient(CausalGraph& g, std::size_t a, std::size_t b, const char* reason,
                std::vector<std::string>* diagnostics) {
  if (g.root() && *g.root() == b) {
    if (diagnostics) diagnostics->push_back(std::string(reason) + ": refused " + g.name(a) + " -> root " + g.name(b));
    return false;
  }
  if (g.has_directed_path(b, a)) {
    if (diagnostics) {
      diagnostics->push_back(std::string(reason) + ": " + g.name(a) + " -> " + g.name(b) +
                             " would close a cycle; left undirected");
    }
    return false;
  }
  g.orient(a, b);
  return true;
}

bool meek_applies(const CausalGraph& g, std::size_t x, std::size_t y) {
  const std::size_t n = g.size();
  // R1: w -> x - y, w and y non-adjacent.
  for (std::size_t w = 0; w < n; ++w) {
    if (w != y && g.directed(w, x) && !g.adjacent(w, y)) return true;
  }
  // R2: x -> w -> y.
  for (std::size_t w = 0; w < n; ++w) {
    if (g.directed(x, w) && g.directed(w, y)) return true;
  }
  // R3: x - c -> y and x - d -> y with c, d non-adjacent.
  for (std::size_t c = 0; c < n; ++c) {
    if (!g.undirected(x, c) || !g.directed(c, y)) continue;
    for (std::size_t d = c + 1; d < n; ++d) {
      if (g.undirected(x, d) && g.directed(d, y) && !g.adjacent(c, d)) return true;
    }
  }
  // R4: x - d -> c -> y with x adjacent to c and d, y non-adjacent.
  for (std::size_t d = 0; d < n; ++d) {
    if (d == y || !g.undirected(x, d) || g.adjacent(d, y)) continue;
    for (std::size_t c = 0; c < n; ++c) {
      if (c != x && g.directed(d, c) && g.directed(c, y) && g.adjacent(x, c)) return true;
    }
  }
  return false;
}

Matrix blocks(const Experiment& e, const std::vector<std::string>& names, const std::vector<std::size_t>& idx) {
  std::vector<std::string> selected;
  for (auto i : idx) selected.push_back(names[i]);
  return e.stack(selected);
}

IndependenceFn kci_independence(const Experiment& e, const std::vector<std::string>& names,
                                const DiscoveryConfig& cfg) {
  return [&e, names, cfg](std::size_t i, std::size_t j, const std::vector<std::size_t>& given) {
    KciOptions options;
    options.alpha = cfg.alpha;
    options.method = cfg.ci_method;
    options.permutations = cfg.permutations;
    options.ridge_scale = cfg.kci_ridge;
    std::uint64_t s = derive_seed(cfg.seed, 10 + i, j);
    for (auto g : given) s = derive_seed(s, 11, g);
    options.seed = s;
    const Matrix x = e.at(names[i]);
    const Matrix y = e.at(names[j]);
    if (given.empty()) return kci_test(x, y, options).independent;
    return kci_test(x, y, blocks(e, names, given), options).independent;
  };
}

DirectionFn kernel_direction(const Experiment& e, const std::vector<std::string>& names, std::size_t root,
                             const DiscoveryConfig& cfg) {
  return [&e, names, root, cfg](const std::vector<std::size_t>& causes, std::size_t effect) {
    DirectionOptions options;
    options.ridge_scale = cfg.direction_ridge;
    return direction_score(blocks(e, names, causes), e.at(names[effect]), e.at(names[root]), options).delta;
  };
}

std::vector<std::string> check_series(const Experiment& e, const std::vector<std::string>& names) {
  std::vector<std::string> out;
  for (const auto& name : names) {
    const Matrix& m = e.at(name);
    if (m.rows() > 0 && (m.rowwise() - m.row(0)).cwiseAbs().maxCoeff() == 0.0) {
      out.push_back("degenerate (constant) series for node " + name);
    }
  }
  return out;
}

}  // namespace

SkeletonResult recover_skeleton(const std::vector<std::string>& nodes, std::size_t root,
                                const IndependenceFn& independent, int max_conditioning_size) {
  if (root >= nodes.size()) throw DataError("skeleton: root index out of range");
  if (max_conditioning_size < 0) throw std::invalid_argument("max_conditioning_size must be non-negative");
  SkeletonResult result;
  result.graph = CausalGraph::complete(nodes, root);
  const std::size_t n = nodes.size();
  const auto cap = static_cast<std::size_t>(max_conditioning_size);

  auto search = [&](std::size_t a, std::size_t b, const std::vector<std::size_t>& pool) {
    for (std::size_t k = 0; k <= std::min(cap, pool.size()); ++k) {
      const bool removed = for_each_subset(pool, k, [&](const std::vector<std::size_t>& given) {
        if (!independent(a, b, given)) return false;
        result.graph.remove_edge(a, b);
        result.sepsets[key(a, b)] = given;
        return true;
      });
      if (removed) return;
    }
  };

  for (std::size_t v = 0; v < n; ++v) {
    if (v == root) continue;
    std::vector<std::size_t> pool;
    for (std::size_t w = 0; w < n; ++w) {
      if (w != root && w != v) pool.push_back(w);
    }
    search(root, v, pool);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (i == root || j == root) continue;
      std::vector<std::size_t> pool;
      for (std::size_t w = 0; w < n; ++w) {
        if (w != i && w != j) pool.push_back(w);
      }
      search(i, j, pool);
    }
  }
  return result;
}

SkeletonResult recover_skeleton(const Experiment& e, const Schema& schema, const DiscoveryConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& node : schema) names.push_back(node.name);
  const std::size_t root = std::find(names.begin(), names.end(), root_node(schema).name) - names.begin();
  auto diagnostics = check_series(e, names);
  auto result = recover_skeleton(names, root, kci_independence(e, names, cfg), cfg.max_conditioning_size);
  result.diagnostics.insert(result.diagnostics.begin(), diagnostics.begin(), diagnostics.end());
  return result;
}

bool apply_meek_rules(CausalGraph& graph, std::vector<std::string>* diagnostics) {
  bool any = false;
  for (bool changed = true; changed;) {
    changed = false;
    for (const auto& [a, b] : graph.undirected_edges()) {
      for (const auto& [x, y] : {Edge{a, b}, Edge{b, a}}) {
        if (!graph.undirected(x, y) || !meek_applies(graph, x, y)) continue;
        if (try_orient(graph, x, y, "meek", diagnostics)) {
          changed = any = true;
          break;
        }
      }
    }
  }
  return any;
}

DiscoveryResult orient_edges(const SkeletonResult& skeleton, const DirectionFn& score) {
  DiscoveryResult result{skeleton.graph, skeleton.diagnostics};
  CausalGraph& g = result.graph;
  auto& diag = result.diagnostics;
  if (!g.root()) throw DataError("orient_edges: graph has no root");
  const std::size_t root = *g.root();
  const std::size_t n = g.size();

  for (auto v : g.adjacent_nodes(root)) {
    if (!g.directed(root, v)) g.orient(root, v);
  }

  // Unshielded colliders i -> j <- k with j outside sepset(i, k).
  const CausalGraph shape = g;
  for (std::size_t j = 0; j < n; ++j) {
    const auto around = shape.adjacent_nodes(j);
    for (std::size_t a = 0; a < around.size(); ++a) {
      for (std::size_t b = a + 1; b < around.size(); ++b) {
        const auto i = around[a];
        const auto k = around[b];
        if (shape.adjacent(i, k)) continue;
        auto it = skeleton.sepsets.find(key(i, k));
        if (it == skeleton.sepsets.end()) continue;
        if (std::find(it->second.begin(), it->second.end(), j) != it->second.end()) continue;
        if (j == root) {
          diag.push_back("collider " + g.name(i) + " -> " + g.name(j) + " <- " + g.name(k) + " skipped at root");
          continue;
        }
        for (auto p : {i, k}) {
          if (g.directed(p, j)) continue;
          if (g.directed(j, p)) {
            diag.push_back("collider conflict on " + g.name(p) + " - " + g.name(j));
            continue;
          }
          try_orient(g, p, j, "collider", &diag);
        }
      }
    }
  }

  apply_meek_rules(g, &diag);

  // Resolve root-adjacent nodes by the smallest direction score.
  std::vector<std::size_t> candidates;
  for (auto v : g.children(root)) candidates.push_back(v);
  auto pending = [&](std::size_t v) { return !g.undirected_neighbors(v).empty(); };
  for (;;) {
    candidates.erase(std::remove_if(candidates.begin(), candidates.end(), [&](std::size_t v) { return !pending(v); }),
                     candidates.end());
    if (candidates.empty()) break;
    std::size_t best = candidates.front();
    double best_score = std::numeric_limits<double>::infinity();
    bool first = true;
    for (auto v : candidates) {
      std::vector<std::size_t> causes;
      for (std::size_t w = 0; w < n; ++w) {
        if (w != root && (g.directed(w, v) || g.undirected(w, v))) causes.push_back(w);
      }
      const double s = score(causes, v);
      if (first || s < best_score - kTieTolerance) {
        best = v;
        best_score = s;
        first = false;
      } else if (std::abs(s - best_score) <= kTieTolerance) {
        diag.push_back("direction tie between " + g.name(best) + " and " + g.name(v));
        if (g.name(v) < g.name(best)) best = v;
      }
    }
    for (auto w : g.undirected_neighbors(best)) try_orient(g, w, best, "direction", &diag);
    candidates.erase(std::find(candidates.begin(), candidates.end(), best));
  }

  apply_meek_rules(g, &diag);

  // Pairwise scores for edges no earlier stage could orient.
  for (auto remaining = g.undirected_edges(); !remaining.empty(); remaining = g.undirected_edges()) {
    const auto [a, b] = remaining.front();
    const double ab = score({a}, b);
    const double ba = score({b}, a);
    std::size_t from = a, to = b;
    if (std::abs(ab - ba) <= kTieTolerance) {
      diag.push_back("pairwise direction tie on " + g.name(a) + " - " + g.name(b));
      if (g.name(b) < g.name(a)) std::swap(from, to);
    } else if (ba < ab) {
      std::swap(from, to);
    }
    if (!try_orient(g, from, to, "pairwise", &diag) && !try_orient(g, to, from, "pairwise", &diag)) {
      diag.push_back("edge " + g.name(a) + " - " + g.name(b) + " left undirected");
      // Nothing else can orient it; stop to avoid looping.
      break;
    }
    apply_meek_rules(g, &diag);
  }
  return result;
}

DiscoveryResult orient_edges(const SkeletonResult& skeleton, const Experiment& e, const DiscoveryConfig& cfg) {
  if (!skeleton.graph.root()) throw DataError("orient_edges: graph has no root");
  return orient_edges(skeleton, kernel_direction(e, skeleton.graph.nodes(), *skeleton.graph.root(), cfg));
}

DiscoveryResult discover(const Experiment& e, const Schema& schema, const DiscoveryConfig& cfg) {
  validate_schema(schema);
  return orient_edges(recover_skeleton(e, schema, cfg), e, cfg);
}

IndependenceFn dseparation_oracle(const CausalGraph& truth) {
  return [truth](std::size_t i, std::size_t j, const std::vector<std::size_t>& given) {
    return d_separated(truth, i, j, std::set<std::size_t>(given.begin(), given.end()));
  };
}

DirectionFn parent_oracle(const CausalGraph& truth) {
  return [truth](const std::vector<std::size_t>& causes, std::size_t effect) {
    double wrong = 0.0;
    for (auto c : causes) wrong += truth.directed(c, effect) ? 0.0 : 1.0;
    return wrong;
  };
}

Consensus aggregate(std::span<const CausalGraph> graphs, double threshold) {
  if (graphs.empty()) throw DataError("aggregate: empty graph list");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw std::invalid_argument("aggregate: threshold must lie in [0, 1]");
  const auto& nodes = graphs.front().nodes();
  Consensus out;
  out.graph = CausalGraph(nodes, graphs.front().root());
  const int total = static_cast<int>(graphs.size());

  std::map<Edge, int> counts;
  for (std::size_t g = 0; g < graphs.size(); ++g) {
    if (graphs[g].nodes() != nodes) throw DataError("aggregate: graphs have different node sets");
    for (const auto& e : graphs[g].directed_edges()) ++counts[e];
    if (!graphs[g].undirected_edges().empty()) {
      out.diagnostics.push_back("graph " + std::to_string(g) + " has undirected edges; they are not counted");
    }
  }
  for (const auto& [e, c] : counts) out.all_inclusion[e] = Inclusion{c, total};

  for (const auto& [e, inc] : out.all_inclusion) {
    const auto [a, b] = e;
    if (!(inc.value() > threshold)) continue;
    auto rev = out.all_inclusion.find({b, a});
    const bool rival = rev != out.all_inclusion.end() && rev->second.value() > threshold;
    if (rival) {
      if (rev->second.count > inc.count) continue;
      if (rev->second.count == inc.count) {
        if (a < b) {
          out.diagnostics.push_back("tied directions " + nodes[a] + " <-> " + nodes[b] + " dropped");
        }
        continue;
      }
    }
    out.graph.add_directed(a, b);
    out.graph.inclusion()[e] = inc;
  }

  for (auto check = validate_dag(out.graph); !check.acyclic; check = validate_dag(out.graph)) {
    Edge weakest{};
    bool first = true;
    for (std::size_t k = 0; k < check.cycle.size(); ++k) {
      const Edge e{out.graph.index_of(check.cycle[k]), out.graph.index_of(check.cycle[(k + 1) % check.cycle.size()])};
      const auto& inc = out.graph.inclusion().at(e);
      const auto& cur = first ? inc : out.graph.inclusion().at(weakest);
      if (first || inc.count < cur.count ||
          (inc.count == cur.count && std::make_pair(nodes[e.first], nodes[e.second]) <
                                         std::make_pair(nodes[weakest.first], nodes[weakest.second]))) {
        weakest = e;
        first = false;
      }
    }
    out.diagnostics.push_back("cycle broken by dropping " + nodes[weakest.first] + " -> " + nodes[weakest.second]);
    out.graph.remove_edge(weakest.first, weakest.second);
    out.graph.inclusion().erase(weakest);
  }
  return out;
}

int structural_hamming_distance(const CausalGraph& a, const CausalGraph& b) {
  if (a.nodes() != b.nodes()) throw DataError("structural_hamming_distance: node sets differ");
  int d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      if (a.adjacent(i, j) != b.adjacent(i, j)) {
        ++d;
      } else if (a.adjacent(i, j) &&
                 (a.directed(i, j) != b.directed(i, j) || a.directed(j, i) != b.directed(j, i))) {
        ++d;
      }
    }
  }
  return d;
}

std::string lagged_name(const std::string& node, int lag) { return node + "@lag" + std::to_string(lag); }

Experiment lagged_expand(const Experiment& e, int lags, const std::set<std::string>& current_only) {
  if (lags < 0) throw std::invalid_argument("lag count must be non-negative");
  if (lags == 0) return e;
  const Eigen::Index T = e.length();
  if (T <= lags + 1) {
    throw DataError("lagged_expand: series of length " + std::to_string(T) + " too short for " +
                    std::to_string(lags) + " lags");
  }
  const Eigen::Index width = T - lags;
  Experiment out;
  out.id = e.id;
  for (const auto& node : e.nodes) {
    const Matrix& m = e.at(node);
    if (current_only.count(node)) {
      out.nodes.push_back(node);
      out.series[node] = m.bottomRows(width);
      continue;
    }
    for (int k = lags; k >= 0; --k) {
      const auto name = lagged_name(node, k);
      out.nodes.push_back(name);
      out.series[name] = m.middleRows(lags - k, width);
    }
  }
  return out;
}

DiscoveryResult discover_lagged(const std::vector<std::string>& variables, const std::string& root, int lags,
                                const IndependenceFn& independent, const DirectionFn& score,
                                int max_conditioning_size) {
  if (lags < 1) throw std::invalid_argument("discover_lagged needs at least one lag");
  const std::size_t m = variables.size();
  const auto L = static_cast<std::size_t>(lags);
  std::vector<std::string> names{root};
  for (const auto& v : variables) {
    for (int k = lags; k >= 0; --k) names.push_back(lagged_name(v, k));
  }
  auto at = [&](std::size_t v, std::size_t k) { return 1 + v * (L + 1) + (L - k); };
  const std::size_t n = names.size();
  const auto cap = static_cast<std::size_t>(max_conditioning_size);

  SkeletonResult skel;
  skel.graph = CausalGraph(names, 0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) skel.graph.add_undirected(a, b);
  }
  // The root is a single current-time node: no edges to past windows.
  for (std::size_t v = 0; v < m; ++v) {
    for (std::size_t k = 1; k <= L; ++k) skel.graph.remove_edge(0, at(v, k));
  }

  auto search = [&](std::size_t a, std::size_t b, bool skip_root) {
    std::vector<std::size_t> pool;
    for (std::size_t w = 0; w < n; ++w) {
      if (w != a && w != b && !(skip_root && w == 0)) pool.push_back(w);
    }
    for (std::size_t k = 0; k <= std::min(cap, pool.size()); ++k) {
      const bool removed = for_each_subset(pool, k, [&](const std::vector<std::size_t>& given) {
        if (!independent(a, b, given)) return false;
        skel.sepsets[key(a, b)] = given;
        return true;
      });
      if (removed) return true;
    }
    return false;
  };

  for (std::size_t v = 0; v < m; ++v) {
    if (search(0, at(v, 0), true)) skel.graph.remove_edge(0, at(v, 0));
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t l = 1; l <= L; ++l) {
        if (!search(at(i, 0), at(j, l), false)) continue;
        for (std::size_t k = 0; k + l <= L; ++k) skel.graph.remove_edge(at(i, k), at(j, l + k));
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      if (!search(at(i, 0), at(j, 0), false)) continue;
      for (std::size_t k = 0; k <= L; ++k) skel.graph.remove_edge(at(i, k), at(j, k));
    }
  }

  // Past causes future; instantaneous copies in past windows are restored after orientation.
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      for (std::size_t a = 0; a <= L; ++a) {
        for (std::size_t b = 0; b < a; ++b) {
          if (skel.graph.adjacent(at(i, a), at(j, b))) skel.graph.orient(at(i, a), at(j, b));
        }
      }
    }
  }
  std::vector<Edge> past_copies;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      for (std::size_t k = 1; k <= L; ++k) {
        if (skel.graph.adjacent(at(i, k), at(j, k))) {
          past_copies.emplace_back(i, j);
          skel.graph.remove_edge(at(i, k), at(j, k));
        }
      }
    }
  }

  DiscoveryResult result = orient_edges(skel, score);
  for (const auto& [i, j] : past_copies) {
    for (std::size_t k = 1; k <= L; ++k) {
      if (result.graph.adjacent(at(i, k), at(j, k))) continue;
      if (result.graph.directed(at(i, 0), at(j, 0))) {
        result.graph.add_directed(at(i, k), at(j, k));
      } else if (result.graph.directed(at(j, 0), at(i, 0))) {
        result.graph.add_directed(at(j, k), at(i, k));
      } else {
        result.graph.add_undirected(at(i, k), at(j, k));
      }
    }
  }
  return result;
}

DiscoveryResult discover_lagged(const Experiment& e, const Schema& schema, int lags, const DiscoveryConfig& cfg) {
  validate_schema(schema);
  const std::string root = root_node(schema).name;
  std::vector<std::string> variables;
  for (const auto& node : schema) {
    if (node.name != root) variables.push_back(node.name);
  }
  const Experiment expanded = lagged_expand(e, lags, {root});
  std::vector<std::string> names{root};
  for (const auto& v : variables) {
    for (int k = lags; k >= 0; --k) names.push_back(lagged_name(v, k));
  }
  auto result = discover_lagged(variables, root, lags, kci_independence(expanded, names, cfg),
                                kernel_direction(expanded, names, 0, cfg), cfg.max_conditioning_size);
  auto diagnostics = check_series(e, e.nodes);
  result.diagnostics.insert(result.diagnostics.begin(), diagnostics.begin(), diagnostics.end());
  return result;
}

}  // namespace causalmech
