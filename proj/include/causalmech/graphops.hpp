#pragma once

#include "causalmech/graph.hpp"

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace causalmech {

struct DagCheck {
  bool acyclic = true;
  // Node names of one directed cycle, in order, when !acyclic.
  std::vector<std::string> cycle;
  std::vector<std::string> diagnostics;
};

// True iff the graph has no directed cycle (self-loops are unrepresentable).
// Undirected edges are ignored.
DagCheck validate_dag(const CausalGraph& graph);

// Kahn order over directed edges with lexicographic tie-breaking by node name.
// Throws DataError on a cycle.
std::vector<std::size_t> topological_order(const CausalGraph& graph);

// One supervised regression problem: predict `outputs` from `inputs`.
struct LearningTask {
  std::set<std::string> inputs;
  std::set<std::string> outputs;
  int order_index = 0;

  std::vector<std::string> input_list() const { return {inputs.begin(), inputs.end()}; }
  std::vector<std::string> output_list() const { return {outputs.begin(), outputs.end()}; }
  std::string key() const;
  bool operator==(const LearningTask&) const = default;
};

struct TaskPlan {
  std::vector<LearningTask> tasks;
  std::set<std::string> roots;
  std::set<std::string> leaves;
  // Parents of every output node in the source graph.
  std::map<std::string, std::set<std::string>> parents;

  bool operator==(const TaskPlan&) const = default;
};

// Chooses a leaf among candidates (sorted by name). The default picks the first.
using LeafPicker = std::function<std::size_t(std::span<const std::size_t> candidates)>;

// Repeatedly detaches a leaf with its in-edges into a (predecessors, {leaf}) tuple,
// merges tuples with identical input sets and orders tasks by dependency.
TaskPlan decompose(const CausalGraph& graph, const LeafPicker& pick = {});

// Roots first, then task outputs in schedule order.
std::vector<std::string> prediction_order(const TaskPlan& plan);

// Edge set implied by the plan's per-output parent sets.
CausalGraph reconstruct_graph(const TaskPlan& plan, const std::vector<std::string>& nodes);

std::string plan_to_json(const TaskPlan& plan);
TaskPlan plan_from_json(const std::string& text);
// DOT of the task dependency graph (task A -> task B when an output of A feeds B).
std::string plan_to_dot(const TaskPlan& plan);

}  // namespace causalmech
