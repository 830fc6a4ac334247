#include "causalmech/error.hpp"
#include "causalmech/micromech.hpp"

#include "../oracles.hpp"
#include "../support.hpp"

#include <doctest.h>

#include <cmath>

using namespace causalmech;
using Eigen::Vector3d;

namespace {

ContactGraph from_edges(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  ContactGraph g;
  g.particles = n;
  for (auto [a, b] : edges) g.contacts.push_back({a, b, Vector3d::UnitZ(), 1.0});
  return g;
}

Tensor3 random_symmetric(std::mt19937_64& rng) {
  const Eigen::Matrix3d m = testing::gaussian(3, 3, rng);
  return 0.5 * (m + m.transpose());
}

Vector3d random_unit(std::mt19937_64& rng) {
  const Vector3d v = testing::gaussian(3, 1, rng);
  return v.normalized();
}

}  // namespace

TEST_CASE("fabric tensor examples") {
  ContactGraph g;
  g.particles = 3;
  g.contacts = {{0, 1, Vector3d::UnitX(), 1.0}};
  CHECK(fabric_tensor(g) == Tensor3(Vector3d(1, 0, 0).asDiagonal()));
  g.contacts.push_back({1, 2, Vector3d::UnitY(), 1.0});
  CHECK(fabric_tensor(g) == Tensor3(Vector3d(0.5, 0.5, 0).asDiagonal()));
  CHECK_THROWS_AS(fabric_tensor(ContactGraph{3, {}}), DataError);

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    ContactGraph r;
    r.particles = 10;
    for (int k = 0; k < 1 + trial % 15; ++k) r.contacts.push_back({0, 1, random_unit(rng), 1.0});
    const Tensor3 F = fabric_tensor(r);
    CHECK(std::abs(F.trace() - 1.0) < 1e-12);
    CHECK(F == F.transpose());
    CHECK(Eigen::SelfAdjointEigenSolver<Tensor3>(F).eigenvalues().minCoeff() >= -1e-12);
  }
}

TEST_CASE("strong fabric threshold") {
  ContactGraph g;
  g.particles = 3;
  g.contacts = {{0, 1, Vector3d::UnitX(), 1.0}, {1, 2, Vector3d::UnitY(), 3.0}};
  const auto s = strong_fabric(g);
  CHECK_FALSE(s.fallback);
  CHECK(s.tensor == Tensor3(Vector3d(0, 1, 0).asDiagonal()));
  CHECK(s.tensor.trace() == 1.0);

  g.contacts[1].force = 1.0;
  const auto equal = strong_fabric(g);
  CHECK(equal.fallback);
  CHECK_FALSE(equal.diagnostic.empty());
  CHECK(equal.tensor == fabric_tensor(g));
}

TEST_CASE("anisotropy variable") {
  const Tensor3 sigma = Vector3d(3, 1, -1).asDiagonal();
  const Tensor3 dev = sigma - sigma.trace() / 3.0 * Tensor3::Identity();
  CHECK(anisotropy_A(dev / dev.norm(), sigma) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(std::abs(anisotropy_A(Tensor3::Identity() / 3.0, sigma)) < 1e-15);

  bool degenerate = false;
  CHECK(anisotropy_A(Tensor3::Identity(), 2.0 * Tensor3::Identity(), &degenerate) == 0.0);
  CHECK(degenerate);
  degenerate = false;
  CHECK(anisotropy_A(Tensor3::Zero(), sigma, &degenerate) == 0.0);
  CHECK(degenerate);

  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    CHECK(std::abs(anisotropy_A(random_symmetric(rng), random_symmetric(rng))) <= 1.0 + 1e-12);
  }
}

TEST_CASE("principal stress differences") {
  const auto d = principal_stress_diffs(Vector3d(3, 2, 1).asDiagonal());
  CHECK(d.q1 == doctest::Approx(1.0));
  CHECK(d.q2 == doctest::Approx(2.0));
  CHECK(d.q3 == doctest::Approx(1.0));
  const auto h = principal_stress_diffs(5.0 * Tensor3::Identity());
  CHECK(std::abs(h.q1) + std::abs(h.q2) + std::abs(h.q3) < 1e-12);

  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const auto q = principal_stress_diffs(random_symmetric(rng));
    CHECK(q.q1 >= 0.0);
    CHECK(q.q3 >= 0.0);
    CHECK(std::abs(q.q2 - q.q1 - q.q3) < 1e-10);
  }
  Tensor3 skew = Tensor3::Identity();
  skew(0, 1) = 0.5;
  CHECK_THROWS(principal_stress_diffs(skew));
}

TEST_CASE("graph metrics on small graphs") {
  const auto k3 = graph_metrics(from_edges(3, {{0, 1}, {1, 2}, {0, 2}}));
  CHECK(k3.density == 1.0);
  CHECK(k3.transitivity == 1.0);
  CHECK(k3.average_clustering == 1.0);
  CHECK(k3.clique_number == 3);
  CHECK(k3.average_local_efficiency == 1.0);
  CHECK(k3.coordination_number == 2.0);

  const auto p3 = graph_metrics(from_edges(3, {{0, 1}, {1, 2}, {2, 1}}));
  CHECK(p3.density == doctest::Approx(2.0 / 3.0));
  CHECK(p3.transitivity == 0.0);
  CHECK(p3.average_clustering == 0.0);
  CHECK(p3.clique_number == 2);

  const auto empty = graph_metrics(from_edges(4, {}));
  CHECK(empty.density == 0.0);
  CHECK(empty.clique_number == 1);
  CHECK(empty.transitivity == 0.0);
  CHECK(empty.coordination_number == 0.0);
  CHECK_FALSE(empty.diagnostics.empty());
  CHECK_THROWS_AS(graph_metrics(from_edges(1, {})), DataError);
}

TEST_CASE("graph metrics match exhaustive oracles") {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<std::size_t> size(2, 8);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = size(rng);
    const double p = unit(rng);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (unit(rng) < p) {
          edges.push_back({i, j});
          if (unit(rng) < 0.2) edges.push_back({j, i});
        }
    const auto g = from_edges(n, edges);
    const testing::GraphOracle o(g);
    const auto m = graph_metrics(g);
    const double nd = static_cast<double>(n);
    CHECK(m.density == doctest::Approx(2.0 * o.edges() / (nd * (nd - 1.0))).epsilon(1e-12));
    CHECK(m.coordination_number == doctest::Approx(2.0 * o.edges() / nd).epsilon(1e-12));
    CHECK(m.transitivity == doctest::Approx(o.transitivity()).epsilon(1e-12));
    CHECK(m.average_clustering == doctest::Approx(o.clustering()).epsilon(1e-12));
    CHECK(m.clique_number == o.clique());
    CHECK(m.average_local_efficiency == doctest::Approx(o.local_efficiency()).epsilon(1e-12));
    CHECK(m.degree_assortativity == doctest::Approx(o.assortativity()).epsilon(1e-9));

    for (double v : {m.density, m.transitivity, m.average_clustering, m.average_local_efficiency}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(std::abs(m.degree_assortativity) <= 1.0);
    CHECK(m.clique_number >= 1);
  }
}

TEST_CASE("per-step feature table") {
  const auto k3 = from_edges(3, {{0, 1}, {1, 2}, {0, 2}});
  const auto p3 = from_edges(3, {{0, 1}, {1, 2}});
  const auto table = timestep_features({k3, p3});
  CHECK(table.rows.size() == 2);
  const auto col = std::find(table.columns.begin(), table.columns.end(), "density") - table.columns.begin();
  CHECK(table.rows[0][static_cast<std::size_t>(col)] == 1.0);
  CHECK(table.rows[1][static_cast<std::size_t>(col)] == doctest::Approx(2.0 / 3.0));
  for (const auto& row : table.rows) CHECK(row.size() == table.columns.size());

  const auto same = timestep_features({k3, k3, k3});
  CHECK(same.rows[2][0] == 2.0);
  CHECK(std::equal(same.rows[0].begin() + 1, same.rows[0].end(), same.rows[2].begin() + 1));

  const std::vector<Tensor3> stresses(2, Tensor3(Vector3d(3, 2, 1).asDiagonal()));
  const auto with = timestep_features({k3, p3}, stresses);
  CHECK(with.columns.size() == table.columns.size() + 4);
  CHECK(with.columns.back() == "q3");
  CHECK_THROWS_AS(timestep_features({k3, p3}, std::vector<Tensor3>(3, Tensor3::Identity())), DataError);
}

TEST_CASE("contact dump reader") {
  testing::TempDir dir;
  const std::string header = "particle_a,particle_b,n1,n2,n3,normal_force\n";
  testing::write_file(dir / "dump" / "step_10.csv", header + "0,1,1,0,0,2\n1,2,0,1,0,1\n");
  testing::write_file(dir / "dump" / "step_2.csv", header + "0,1,1,0,0,2\n1,2,0,1,0,1\n0,2,0,0,1,4\n");
  testing::write_file(dir / "dump" / "step_5.csv", header + "0,1,0,0,1,1\n");
  testing::write_file(dir / "dump" / "stress.csv", "s11,s22,s33,s12,s23,s13\n3,2,1,0,0,0\n1,1,1,0,0,0\n2,1,1,0.5,0,0\n");
  const auto dump = read_contact_dump(dir / "dump");
  CHECK(dump.steps.size() == 3);
  CHECK(dump.files[0].filename() == "step_2.csv");
  CHECK(dump.files[2].filename() == "step_10.csv");
  CHECK(dump.steps[0].contacts.size() == 3);
  REQUIRE(dump.stresses.has_value());
  CHECK((*dump.stresses)[2](1, 0) == 0.5);
  const auto table = timestep_features(dump.steps, dump.stresses);
  CHECK(table.rows.size() == 3);
  write_feature_csv(dir / "features.csv", table);
  const auto text = testing::slurp(dir / "features.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 4);

  testing::write_file(dir / "bad" / "s1.csv", header + "0,1,1,0,0,2\n0,1,0.5,0,0,1\n");
  try {
    read_contact_dump(dir / "bad");
    FAIL("expected a data error");
  } catch (const DataError& e) {
    const std::string what = e.what();
    CHECK(what.find("s1.csv:3") != std::string::npos);
  }
  CHECK_THROWS_AS(read_contact_dump(dir / "missing"), DataError);
}
