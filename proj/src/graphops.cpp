#include "causalmech/graphops.hpp"

#include "causalmech/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <queue>
#include <sstream>

namespace causalmech {

using nlohmann::json;

DagCheck validate_dag(const CausalGraph& graph) {
  DagCheck check;
  const std::size_t n = graph.size();
  enum : char { White, Grey, Black };
  std::vector<char> colour(n, White);
  std::vector<std::size_t> path;

  // Iterative DFS keeping the grey path so a back edge yields the cycle.
  for (std::size_t start = 0; start < n && check.acyclic; ++start) {
    if (colour[start] != White) continue;
    std::vector<std::pair<std::size_t, std::vector<std::size_t>>> stack;
    stack.emplace_back(start, graph.children(start));
    colour[start] = Grey;
    path.assign(1, start);
    while (!stack.empty() && check.acyclic) {
      auto& [node, pending] = stack.back();
      if (pending.empty()) {
        colour[node] = Black;
        stack.pop_back();
        path.pop_back();
        continue;
      }
      const std::size_t next = pending.back();
      pending.pop_back();
      if (colour[next] == Grey) {
        auto it = std::find(path.begin(), path.end(), next);
        for (; it != path.end(); ++it) check.cycle.push_back(graph.name(*it));
        check.acyclic = false;
        std::string text = "directed cycle:";
        for (const auto& name : check.cycle) text += " " + name;
        check.diagnostics.push_back(text);
      } else if (colour[next] == White) {
        colour[next] = Grey;
        path.push_back(next);
        stack.emplace_back(next, graph.children(next));
      }
    }
  }
  return check;
}

std::vector<std::size_t> topological_order(const CausalGraph& graph) {
  const std::size_t n = graph.size();
  std::vector<int> indegree(n, 0);
  for (const auto& [from, to] : graph.directed_edges()) ++indegree[to];
  auto by_name = [&](std::size_t a, std::size_t b) { return graph.name(a) > graph.name(b); };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_name)> ready(by_name);
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto c : graph.children(v)) {
      if (--indegree[c] == 0) ready.push(c);
    }
  }
  if (order.size() != n) throw DataError("graph contains a directed cycle");
  return order;
}

std::string LearningTask::key() const {
  std::string out;
  for (const auto& name : inputs) out += (out.empty() ? "" : ",") + name;
  out += "->";
  bool first = true;
  for (const auto& name : outputs) {
    out += (first ? "" : ",") + name;
    first = false;
  }
  return out;
}

TaskPlan decompose(const CausalGraph& graph, const LeafPicker& pick) {
  if (!graph.fully_oriented()) throw DataError("decompose: graph has undirected edges");
  if (const auto check = validate_dag(graph); !check.acyclic) {
    throw DataError("decompose: " + check.diagnostics.front());
  }
  if (graph.directed_edges().empty()) throw DataError("decompose: graph has no edges");

  const std::size_t n = graph.size();
  std::vector<std::size_t> by_name(n);
  for (std::size_t i = 0; i < n; ++i) by_name[i] = i;
  std::sort(by_name.begin(), by_name.end(),
            [&](std::size_t a, std::size_t b) { return graph.name(a) < graph.name(b); });

  TaskPlan plan;
  for (std::size_t i = 0; i < n; ++i) {
    const bool has_in = !graph.parents(i).empty();
    const bool has_out = !graph.children(i).empty();
    if (!has_in && has_out) plan.roots.insert(graph.name(i));
    if (has_in && !has_out) plan.leaves.insert(graph.name(i));
  }

  CausalGraph work = graph;
  std::vector<LearningTask> tuples;
  while (!work.directed_edges().empty()) {
    std::vector<std::size_t> leaves;
    for (auto i : by_name) {
      if (work.children(i).empty() && !work.parents(i).empty()) leaves.push_back(i);
    }
    const std::size_t choice = pick ? pick(leaves) : 0;
    const std::size_t leaf = leaves.at(choice);
    LearningTask tuple;
    tuple.outputs.insert(graph.name(leaf));
    for (auto p : work.parents(leaf)) {
      tuple.inputs.insert(graph.name(p));
      work.remove_edge(p, leaf);
    }
    plan.parents[graph.name(leaf)] = tuple.inputs;
    tuples.push_back(std::move(tuple));
  }

  std::vector<LearningTask> merged;
  for (auto& tuple : tuples) {
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const LearningTask& t) { return t.inputs == tuple.inputs; });
    if (it == merged.end()) {
      merged.push_back(std::move(tuple));
    } else {
      it->outputs.insert(tuple.outputs.begin(), tuple.outputs.end());
    }
  }

  // Dependency order: A before B when an output of A is an input of B.
  std::vector<int> pending(merged.size(), 0);
  for (std::size_t b = 0; b < merged.size(); ++b) {
    for (std::size_t a = 0; a < merged.size(); ++a) {
      if (a == b) continue;
      for (const auto& out : merged[a].outputs) {
        if (merged[b].inputs.count(out)) {
          ++pending[b];
          break;
        }
      }
    }
  }
  std::vector<char> done(merged.size(), 0);
  for (std::size_t step = 0; step < merged.size(); ++step) {
    std::size_t best = merged.size();
    for (std::size_t t = 0; t < merged.size(); ++t) {
      if (done[t] || pending[t] != 0) continue;
      if (best == merged.size() ||
          std::make_pair(merged[t].output_list(), merged[t].input_list()) <
              std::make_pair(merged[best].output_list(), merged[best].input_list())) {
        best = t;
      }
    }
    if (best == merged.size()) throw DataError("decompose: task dependencies are cyclic");
    done[best] = 1;
    merged[best].order_index = static_cast<int>(step);
    plan.tasks.push_back(merged[best]);
    for (std::size_t b = 0; b < merged.size(); ++b) {
      if (done[b]) continue;
      for (const auto& out : merged[best].outputs) {
        if (merged[b].inputs.count(out)) {
          --pending[b];
          break;
        }
      }
    }
  }
  return plan;
}

std::vector<std::string> prediction_order(const TaskPlan& plan) {
  std::vector<std::string> order(plan.roots.begin(), plan.roots.end());
  for (const auto& task : plan.tasks) {
    for (const auto& out : task.outputs) order.push_back(out);
  }
  return order;
}

CausalGraph reconstruct_graph(const TaskPlan& plan, const std::vector<std::string>& nodes) {
  CausalGraph graph(nodes);
  for (const auto& [child, parents] : plan.parents) {
    for (const auto& parent : parents) graph.add_directed(graph.index_of(parent), graph.index_of(child));
  }
  return graph;
}

std::string plan_to_json(const TaskPlan& plan) {
  json doc;
  doc["tasks"] = json::array();
  for (const auto& task : plan.tasks) {
    doc["tasks"].push_back({{"inputs", task.input_list()},
                            {"outputs", task.output_list()},
                            {"order_index", task.order_index}});
  }
  doc["roots"] = std::vector<std::string>(plan.roots.begin(), plan.roots.end());
  doc["leaves"] = std::vector<std::string>(plan.leaves.begin(), plan.leaves.end());
  json parents = json::object();
  for (const auto& [child, set] : plan.parents) parents[child] = std::vector<std::string>(set.begin(), set.end());
  doc["parents"] = parents;
  return doc.dump(2) + "\n";
}

TaskPlan plan_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    TaskPlan plan;
    for (const auto& item : doc.at("tasks")) {
      LearningTask task;
      for (const auto& s : item.at("inputs")) task.inputs.insert(s.get<std::string>());
      for (const auto& s : item.at("outputs")) task.outputs.insert(s.get<std::string>());
      task.order_index = item.at("order_index").get<int>();
      plan.tasks.push_back(std::move(task));
    }
    for (const auto& s : doc.value("roots", json::array())) plan.roots.insert(s.get<std::string>());
    for (const auto& s : doc.value("leaves", json::array())) plan.leaves.insert(s.get<std::string>());
    if (doc.contains("parents")) {
      for (const auto& [child, list] : doc["parents"].items()) {
        for (const auto& s : list) plan.parents[child].insert(s.get<std::string>());
      }
    } else {
      for (const auto& task : plan.tasks) {
        for (const auto& out : task.outputs) plan.parents[out] = task.inputs;
      }
    }
    std::sort(plan.tasks.begin(), plan.tasks.end(),
              [](const LearningTask& a, const LearningTask& b) { return a.order_index < b.order_index; });
    return plan;
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed task plan JSON: ") + ex.what());
  }
}

std::string plan_to_dot(const TaskPlan& plan) {
  std::ostringstream out;
  out << "digraph task_plan {\n";
  for (const auto& task : plan.tasks) {
    out << "  task_" << task.order_index << " [label=\"" << task.key() << "\"];\n";
  }
  for (const auto& a : plan.tasks) {
    for (const auto& b : plan.tasks) {
      const bool feeds = std::any_of(a.outputs.begin(), a.outputs.end(),
                                     [&](const std::string& o) { return b.inputs.count(o) > 0; });
      if (feeds) out << "  task_" << a.order_index << " -> task_" << b.order_index << ";\n";
    }
  }
  out << "}\n";
  return out.str();
}

}  // namespace causalmech
