#pragma once

#include "causalmech/dataset.hpp"
#include "causalmech/graph.hpp"
#include "causalmech/kernels.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace causalmech {

struct DiscoveryConfig {
  double alpha = 0.05;
  int max_conditioning_size = 3;
  double inclusion_threshold = 0.2;
  NullMethod ci_method = NullMethod::Gamma;
  int permutations = 500;
  double kci_ridge = 1e-3;
  double direction_ridge = 0.01;
  std::uint64_t seed = 0;
};

// Decides whether nodes i and j are independent given `given` (node indices).
using IndependenceFn = std::function<bool(std::size_t i, std::size_t j, const std::vector<std::size_t>& given)>;
// Direction score of causes -> effect; smaller is more plausible.
using DirectionFn = std::function<double(const std::vector<std::size_t>& causes, std::size_t effect)>;

struct SkeletonResult {
  CausalGraph graph;
  // Separating set of every removed pair, keyed by (min, max) index.
  std::map<Edge, std::vector<std::size_t>> sepsets;
  std::vector<std::string> diagnostics;
};

struct DiscoveryResult {
  CausalGraph graph;
  std::vector<std::string> diagnostics;
};

// Constrained skeleton search from the complete graph: root edges are tested given
// subsets of the other non-root nodes, the remaining pairs given subsets of all
// other nodes including the root. Subsets run by increasing size, lexicographic,
// up to max_conditioning_size.
SkeletonResult recover_skeleton(const std::vector<std::string>& nodes, std::size_t root,
                                const IndependenceFn& independent, int max_conditioning_size);
SkeletonResult recover_skeleton(const Experiment& e, const Schema& schema, const DiscoveryConfig& cfg);

// Applies the four Meek rules until nothing changes. Orientations that would
// close a directed cycle or point into the root are skipped with a diagnostic.
// Returns true if any edge was oriented.
bool apply_meek_rules(CausalGraph& graph, std::vector<std::string>* diagnostics = nullptr);

// Root edges out of the root, v-structures from the separating sets, Meek closure,
// direction-score resolution among root-adjacent nodes, Meek again, and finally a
// pairwise direction-score pass for whatever is still undirected. Directed edges
// already present in the skeleton graph are kept.
DiscoveryResult orient_edges(const SkeletonResult& skeleton, const DirectionFn& score);
DiscoveryResult orient_edges(const SkeletonResult& skeleton, const Experiment& e, const DiscoveryConfig& cfg);

DiscoveryResult discover(const Experiment& e, const Schema& schema, const DiscoveryConfig& cfg);

// d-separation and parent-count oracles built from a known DAG.
IndependenceFn dseparation_oracle(const CausalGraph& truth);
DirectionFn parent_oracle(const CausalGraph& truth);

struct Consensus {
  CausalGraph graph;
  // Inclusion of every directed edge seen in any input graph.
  std::map<Edge, Inclusion> all_inclusion;
  std::vector<std::string> diagnostics;
};

// Keeps directed edges whose inclusion exceeds the threshold; opposite pairs keep
// the more frequent direction (ties drop both); cycles lose their least-included edge.
Consensus aggregate(std::span<const CausalGraph> graphs, double threshold = 0.2);

// Adjacency mismatches plus orientation mismatches over unordered pairs.
int structural_hamming_distance(const CausalGraph& a, const CausalGraph& b);

std::string lagged_name(const std::string& node, int lag);

// Expands each node into L + 1 windows "name@lagK" (K = L..0) of length T - L; the
// window with lag K covers rows [L - K, T - K). Nodes in `current_only` keep their
// name and only the lag-0 window.
Experiment lagged_expand(const Experiment& e, int lags, const std::set<std::string>& current_only = {});

// Lagged and instantaneous discovery over the expanded experiment. The root stays
// a single current-time node. Removals found between lag 0 and lag l are
// replicated to every shifted copy; lagged edges point from past to present.
DiscoveryResult discover_lagged(const Experiment& e, const Schema& schema, int lags, const DiscoveryConfig& cfg);

// Same construction with caller-provided tests over the expanded node list
// (index 0 is the root, then lagged_name(v, k) for each variable v and k = lags..0).
DiscoveryResult discover_lagged(const std::vector<std::string>& variables, const std::string& root, int lags,
                                const IndependenceFn& independent, const DirectionFn& score,
                                int max_conditioning_size);

}  // namespace causalmech
