#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace causalmech {

using Tensor3 = Eigen::Matrix3d;

struct Contact {
  std::size_t a = 0;
  std::size_t b = 0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitX();
  double force = 0.0;
};

struct ContactGraph {
  std::size_t particles = 0;
  std::vector<Contact> contacts;
};

// Throws DataError on self-contacts, out-of-range particles, non-unit normals or
// negative forces.
void validate_contacts(const ContactGraph& g);

// Mean of n (x) n over all contacts.
Tensor3 fabric_tensor(const ContactGraph& g);

struct StrongFabric {
  Tensor3 tensor;
  bool fallback = false;
  std::string diagnostic;
};

// Fabric of the contacts whose force exceeds the mean force; all contacts when
// none does (fallback flagged).
StrongFabric strong_fabric(const ContactGraph& g);

// (F : n_dev) / |F| with n_dev the unit deviatoric direction of sigma. Returns 0
// and sets *degenerate when F or dev(sigma) vanishes.
double anisotropy_A(const Tensor3& F, const Tensor3& sigma, bool* degenerate = nullptr);

struct PrincipalDiffs {
  double q1 = 0.0;  // s1 - s2
  double q2 = 0.0;  // s1 - s3
  double q3 = 0.0;  // s2 - s3
};

PrincipalDiffs principal_stress_diffs(const Tensor3& sigma);

struct GraphMetricsRecord {
  double density = 0.0;
  double transitivity = 0.0;
  double average_clustering = 0.0;
  double degree_assortativity = 0.0;
  int clique_number = 0;
  double average_local_efficiency = 0.0;
  double coordination_number = 0.0;  // mean degree 2 |E| / n
  std::vector<std::string> diagnostics;
};

// Topology of the contact network with duplicate contacts collapsed.
GraphMetricsRecord graph_metrics(const ContactGraph& g);

// Simple undirected graph as sorted adjacency lists.
std::vector<std::vector<std::size_t>> adjacency_lists(const ContactGraph& g);

struct FeatureTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> diagnostics;
};

// One row per step: graph metrics, fabric and strong-fabric components in the order
// 11, 22, 33, 12, 23, 13, and, with stresses, A and the principal differences.
FeatureTable timestep_features(const std::vector<ContactGraph>& steps,
                               const std::optional<std::vector<Tensor3>>& stresses = std::nullopt);

// Contact CSV (particle_a, particle_b, n1, n2, n3, normal_force). The particle
// count defaults to the largest index + 1.
ContactGraph read_contact_csv(const std::filesystem::path& path, std::optional<std::size_t> particles = std::nullopt);

// Every *.csv in the directory except stress.csv, ordered by the first number in
// the file name (then by name). stress.csv, when present, holds one row per step
// with columns s11, s22, s33, s12, s23, s13.
struct ContactDump {
  std::vector<std::filesystem::path> files;
  std::vector<ContactGraph> steps;
  std::optional<std::vector<Tensor3>> stresses;
};
ContactDump read_contact_dump(const std::filesystem::path& dir, std::optional<std::size_t> particles = std::nullopt);

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table);

}  // namespace causalmech
