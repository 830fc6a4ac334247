#pragma once

#include "causalmech/dataset.hpp"
#include "causalmech/graph.hpp"

#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace causalmech {

enum class MechanismKind { Linear, Tanh };

std::string to_string(MechanismKind kind);
MechanismKind parse_mechanism_kind(const std::string& text);

// One additive parent contribution, weight * parent(t - lag).
struct ParentTerm {
  std::size_t parent = 0;
  int lag = 0;
  double weight = 1.0;
  bool operator==(const ParentTerm&) const = default;
};

// V(t) = act(bias + sum_p w_p (1 + gain U(t)) V_p(t - lag_p) + sum_U w_U U(t - lag)) + noise * eps(t).
// The root enters additively; gain modulates the non-root terms (the theta(U) dependence).
struct NodeMechanism {
  MechanismKind kind = MechanismKind::Linear;
  double bias = 0.0;
  double gain = 0.0;
  double noise = 0.1;
  std::vector<ParentTerm> terms;
  bool operator==(const NodeMechanism&) const = default;
};

// U(t) = ramp * t / (T - 1) + amplitude * sin(2 pi cycles t / (T - 1) + phase).
struct RootPath {
  double ramp = 1.0;
  double amplitude = 1.0;
  double cycles = 2.0;
  double phase = 0.0;
  bool operator==(const RootPath&) const = default;
};

struct SemSpec {
  CausalGraph dag;  // node 0 is the root "U"
  std::vector<NodeMechanism> mechanisms;  // one per node; entry 0 is unused
  RootPath root_path;
  int length = 300;
  std::uint64_t seed = 0;
};

// Node 0 is "U", the others "V1".."V{n-1}". Edges follow a random order with the
// root first; each forward pair is an edge with probability p.
CausalGraph random_dag(std::size_t n, double p, std::uint64_t seed);

struct SemOptions {
  MechanismKind kind = MechanismKind::Tanh;
  double weight_scale = 1.5;  // weights ~ U(-scale, scale) rejected inside [-0.1, 0.1]
  double gain_scale = 0.5;    // gains of U-children ~ U(-scale, scale)
  double noise = 0.2;
  int length = 300;
};

// Mechanisms with random coefficients for every edge of `dag` (lag 0).
SemSpec make_spec(const CausalGraph& dag, const SemOptions& options, std::uint64_t seed);

// Validates the SEM (acyclic instantaneous part, root without parents, terms on
// real edges) and throws DataError otherwise.
void validate_spec(const SemSpec& spec);

Experiment simulate(const SemSpec& spec, const std::string& id = "sim");

// Scalar schema for a simulated experiment: U is the root, childless nodes are leaves.
Schema sem_schema(const SemSpec& spec);

// Exact d-separation of i and j given `given` on the directed part of `dag`.
bool d_separated(const CausalGraph& dag, std::size_t i, std::size_t j, const std::set<std::size_t>& given);

std::string spec_to_json(const SemSpec& spec);
SemSpec spec_from_json(const std::string& text);

}  // namespace causalmech
