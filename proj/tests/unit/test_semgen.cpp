#include "causalmech/error.hpp"
#include "causalmech/graphops.hpp"
#include "causalmech/semgen.hpp"

#include <doctest.h>

#include <cmath>
#include <functional>
#include <numbers>

using namespace causalmech;

namespace {

// Exhaustive d-separation: no simple undirected path is active given `z`.
bool separated_by_paths(const CausalGraph& g, std::size_t x, std::size_t y, const std::set<std::size_t>& z) {
  const auto n = g.size();
  std::vector<std::set<std::size_t>> desc(n);
  for (std::size_t v = 0; v < n; ++v) {
    for (std::size_t w = 0; w < n; ++w) {
      if (v == w || g.has_directed_path(v, w)) desc[v].insert(w);
    }
  }
  auto collider_open = [&](std::size_t v) {
    for (auto d : desc[v]) {
      if (z.count(d)) return true;
    }
    return false;
  };
  std::vector<std::size_t> path{x};
  std::vector<char> on(n, 0);
  on[x] = 1;
  std::function<bool(std::size_t)> active = [&](std::size_t v) -> bool {
    if (v == y) {
      for (std::size_t k = 1; k + 1 < path.size(); ++k) {
        const auto a = path[k - 1], m = path[k], b = path[k + 1];
        const bool collider = g.directed(a, m) && g.directed(b, m);
        if (collider ? !collider_open(m) : z.count(m) > 0) return false;
      }
      return true;
    }
    for (std::size_t w = 0; w < n; ++w) {
      if (on[w] || !g.adjacent(v, w)) continue;
      on[w] = 1;
      path.push_back(w);
      const bool found = active(w);
      path.pop_back();
      on[w] = 0;
      if (found) return true;
    }
    return false;
  };
  return !active(x);
}

double correlation(const Matrix& a, const Matrix& b) {
  const auto x = a.col(0).array() - a.col(0).mean();
  const auto y = b.col(0).array() - b.col(0).mean();
  return (x * y).sum() / std::sqrt(x.square().sum() * y.square().sum());
}

}  // namespace

TEST_CASE("random_dag structure") {
  CHECK(random_dag(5, 0.0, 1).edge_count() == 0);
  const auto full = random_dag(3, 1.0, 2);
  CHECK(full.edge_count() == 3);
  CHECK(validate_dag(full).acyclic);
  CHECK(full.parents(0).empty());
  CHECK(random_dag(6, 0.4, 9) == random_dag(6, 0.4, 9));
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto g = random_dag(7, 0.5, seed);
    CHECK(validate_dag(g).acyclic);
    CHECK(g.name(0) == "U");
    CHECK(g.parents(0).empty());
  }
}

TEST_CASE("noise-free linear chain matches the closed form") {
  CausalGraph dag({"U", "V1", "V2"}, 0);
  dag.add_directed(0, 1);
  dag.add_directed(1, 2);
  SemSpec spec;
  spec.dag = dag;
  spec.length = 50;
  spec.mechanisms.resize(3);
  spec.mechanisms[1] = {MechanismKind::Linear, 0.3, 0.0, 0.0, {{0, 0, 2.0}}};
  spec.mechanisms[2] = {MechanismKind::Linear, -1.0, 0.5, 0.0, {{1, 0, -0.7}}};
  const auto e = simulate(spec);
  for (int t = 0; t < 50; ++t) {
    const double s = t / 49.0;
    const double u = 1.0 * s + 1.0 * std::sin(2.0 * std::numbers::pi * 2.0 * s);
    const double v1 = 0.3 + 2.0 * u;
    const double v2 = -1.0 + (-0.7) * (1.0 + 0.5 * u) * v1;
    CHECK(std::abs(e.at("U")(t, 0) - u) < 1e-12);
    CHECK(std::abs(e.at("V1")(t, 0) - v1) < 1e-12);
    CHECK(std::abs(e.at("V2")(t, 0) - v2) < 1e-12);
  }
}

TEST_CASE("simulation determinism, stationarity and independent noise") {
  CausalGraph dag({"U", "V1", "V2"}, 0);
  SemSpec spec;
  spec.dag = dag;
  spec.length = 2000;
  spec.seed = 4;
  spec.mechanisms.resize(3);
  spec.mechanisms[1].noise = 1.0;
  spec.mechanisms[2].noise = 1.0;
  const auto a = simulate(spec);
  CHECK(simulate(spec) == a);
  CHECK(std::abs(correlation(a.at("V1"), a.at("V2"))) < 0.1);

  const Matrix& v = a.at("V1");
  const double m1 = v.topRows(1000).mean(), m2 = v.bottomRows(1000).mean();
  CHECK(std::abs(m1 - m2) < 4.0 * std::sqrt(2.0 / 1000.0));
}

TEST_CASE("d-separation textbook cases") {
  CausalGraph chain({"V1", "V2", "V3"});
  chain.add_directed(0, 1);
  chain.add_directed(1, 2);
  CHECK(d_separated(chain, 0, 2, {1}));
  CHECK_FALSE(d_separated(chain, 0, 2, {}));
  CausalGraph collider({"V1", "V2", "V3"});
  collider.add_directed(0, 1);
  collider.add_directed(2, 1);
  CHECK(d_separated(collider, 0, 2, {}));
  CHECK_FALSE(d_separated(collider, 0, 2, {1}));
}

TEST_CASE("d-separation agrees with path enumeration") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    const auto n = 4 + seed % 4;
    const auto g = random_dag(n, 0.45, 700 + seed);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        for (unsigned mask = 0; mask < (1u << n); ++mask) {
          if (mask & ((1u << i) | (1u << j))) continue;
          std::set<std::size_t> z;
          for (std::size_t k = 0; k < n; ++k) {
            if (mask & (1u << k)) z.insert(k);
          }
          const bool ds = d_separated(g, i, j, z);
          CHECK(ds == separated_by_paths(g, i, j, z));
          CHECK(ds == d_separated(g, j, i, z));
        }
      }
    }
  }
}

TEST_CASE("make_spec coefficients and json round trip") {
  const auto dag = random_dag(5, 0.7, 3);
  const auto spec = make_spec(dag, SemOptions{}, 12);
  CHECK_NOTHROW(validate_spec(spec));
  for (std::size_t v = 1; v < spec.mechanisms.size(); ++v) {
    CHECK(spec.mechanisms[v].terms.size() == dag.parents(v).size());
    for (const auto& t : spec.mechanisms[v].terms) CHECK(std::abs(t.weight) > 0.1);
  }
  const auto back = spec_from_json(spec_to_json(spec));
  CHECK(back.dag == spec.dag);
  CHECK(back.mechanisms == spec.mechanisms);
  CHECK(simulate(back) == simulate(spec));
  const auto schema = sem_schema(spec);
  CHECK_NOTHROW(validate_schema(schema));
}

TEST_CASE("sample tests agree with d-separation at T = 2000") {
  // Linear-Gaussian SEM with a flat root path, so Fisher-z partial correlations are
  // exact tests; conditioning on the constant root is vacuous.
  auto residual = [](const Matrix& data, Eigen::Index col, const std::vector<Eigen::Index>& given) {
    Vector y = data.col(col).array() - data.col(col).mean();
    if (given.empty()) return y;
    Matrix x(data.rows(), static_cast<Eigen::Index>(given.size()));
    for (std::size_t k = 0; k < given.size(); ++k) {
      x.col(static_cast<Eigen::Index>(k)) = data.col(given[k]).array() - data.col(given[k]).mean();
    }
    return Vector(y - x * x.colPivHouseholderQr().solve(y));
  };
  int agree = 0, total = 0;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto dag = random_dag(5, 0.5, 40 + seed);
    SemOptions o;
    o.kind = MechanismKind::Linear;
    o.gain_scale = 0.0;
    o.noise = 1.0;
    o.length = 2000;
    auto spec = make_spec(dag, o, 90 + seed);
    spec.root_path = {0.0, 0.0, 1.0, 0.0};
    const auto e = simulate(spec);
    Matrix data(2000, 5);
    for (std::size_t v = 0; v < 5; ++v) data.col(static_cast<Eigen::Index>(v)) = e.at(dag.name(v)).col(0);
    for (Eigen::Index i = 1; i < 5; ++i) {
      for (Eigen::Index j = i + 1; j < 5; ++j) {
        std::vector<std::vector<Eigen::Index>> sets{{}};
        for (Eigen::Index k = 1; k < 5; ++k) {
          if (k != i && k != j) sets.push_back({k});
        }
        for (const auto& given : sets) {
          const Vector a = residual(data, i, given), b = residual(data, j, given);
          const double r = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
          const double z = std::abs(std::atanh(r)) * std::sqrt(2000.0 - given.size() - 3.0);
          std::set<std::size_t> cond{0};
          for (auto g : given) cond.insert(static_cast<std::size_t>(g));
          agree += (z > 2.58) == !d_separated(dag, static_cast<std::size_t>(i), static_cast<std::size_t>(j), cond);
          ++total;
        }
      }
    }
  }
  CHECK(agree >= 0.9 * total);
}
