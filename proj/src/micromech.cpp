#include "causalmech/micromech.hpp"

#include "causalmech/dataset.hpp"
#include "causalmech/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <queue>
#include <regex>

namespace causalmech {

void validate_contacts(const ContactGraph& g) {
  for (std::size_t k = 0; k < g.contacts.size(); ++k) {
    const auto& c = g.contacts[k];
    const std::string where = "contact " + std::to_string(k);
    if (c.a == c.b) throw DataError(where + ": particle in contact with itself");
    if (c.a >= g.particles || c.b >= g.particles) throw DataError(where + ": particle index out of range");
    if (std::abs(c.normal.norm() - 1.0) > 1e-8) throw DataError(where + ": normal is not a unit vector");
    if (!(c.force >= 0.0)) throw DataError(where + ": negative normal force");
  }
}

Tensor3 fabric_tensor(const ContactGraph& g) {
  if (g.contacts.empty()) throw DataError("fabric tensor needs at least one contact");
  Tensor3 F = Tensor3::Zero();
  for (const auto& c : g.contacts) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i; j < 3; ++j) F(i, j) += c.normal(i) * c.normal(j);
    }
  }
  F /= static_cast<double>(g.contacts.size());
  F.triangularView<Eigen::StrictlyLower>() = F.transpose();
  return F;
}

StrongFabric strong_fabric(const ContactGraph& g) {
  if (g.contacts.empty()) throw DataError("strong fabric needs at least one contact");
  double mean = 0.0;
  for (const auto& c : g.contacts) mean += c.force;
  mean /= static_cast<double>(g.contacts.size());
  ContactGraph strong{g.particles, {}};
  for (const auto& c : g.contacts) {
    if (c.force > mean) strong.contacts.push_back(c);
  }
  if (strong.contacts.empty()) {
    return {fabric_tensor(g), true, "no contact force above the mean; full fabric used"};
  }
  return {fabric_tensor(strong), false, {}};
}

double anisotropy_A(const Tensor3& F, const Tensor3& sigma, bool* degenerate) {
  const Tensor3 dev = sigma - (sigma.trace() / 3.0) * Tensor3::Identity();
  const double dev_norm = dev.norm();
  const double f_norm = F.norm();
  const bool flat = !(f_norm > 0.0) || !(dev_norm > 1e-14 * std::max(1.0, sigma.norm()));
  if (degenerate) *degenerate = flat;
  if (flat) return 0.0;
  return F.cwiseProduct(dev / dev_norm).sum() / f_norm;
}

PrincipalDiffs principal_stress_diffs(const Tensor3& sigma) {
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, sigma.cwiseAbs().maxCoeff())) {
    throw std::invalid_argument("stress tensor is not symmetric");
  }
  const Tensor3 sym = 0.5 * (sigma + sigma.transpose());
  const Eigen::SelfAdjointEigenSolver<Tensor3> solver(sym, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();  // ascending
  return {ev(2) - ev(1), ev(2) - ev(0), ev(1) - ev(0)};
}

std::vector<std::vector<std::size_t>> adjacency_lists(const ContactGraph& g) {
  std::vector<std::vector<std::size_t>> adj(g.particles);
  for (const auto& c : g.contacts) {
    if (c.a == c.b || c.a >= g.particles || c.b >= g.particles) throw DataError("invalid contact");
    adj[c.a].push_back(c.b);
    adj[c.b].push_back(c.a);
  }
  for (auto& list : adj) {
    std::sort(list.begin(), list.end());
    list.erase(std::unique(list.begin(), list.end()), list.end());
  }
  return adj;
}

namespace {

using Adjacency = std::vector<std::vector<std::size_t>>;

bool linked(const Adjacency& adj, std::size_t u, std::size_t v) {
  return std::binary_search(adj[u].begin(), adj[u].end(), v);
}

// Largest clique by Bron-Kerbosch with pivoting.
void max_clique(const Adjacency& adj, std::vector<std::size_t>& r, std::vector<std::size_t> p,
                std::vector<std::size_t> x, std::size_t& best) {
  if (p.empty() && x.empty()) {
    best = std::max(best, r.size());
    return;
  }
  if (r.size() + p.size() <= best) return;
  std::size_t pivot = p.empty() ? x.front() : p.front();
  std::size_t most = 0;
  for (const auto& pool : {p, x}) {
    for (auto u : pool) {
      std::size_t count = 0;
      for (auto v : p) count += linked(adj, u, v);
      if (count >= most) {
        most = count;
        pivot = u;
      }
    }
  }
  std::vector<std::size_t> candidates;
  for (auto v : p) {
    if (!linked(adj, pivot, v)) candidates.push_back(v);
  }
  for (auto v : candidates) {
    std::vector<std::size_t> p2, x2;
    for (auto w : p) {
      if (linked(adj, v, w)) p2.push_back(w);
    }
    for (auto w : x) {
      if (linked(adj, v, w)) x2.push_back(w);
    }
    r.push_back(v);
    max_clique(adj, r, p2, x2, best);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

// Mean of 1 / d(i, j) over ordered pairs of the subgraph induced by `nodes`.
double global_efficiency(const Adjacency& adj, const std::vector<std::size_t>& nodes) {
  const std::size_t k = nodes.size();
  if (k < 2) return 0.0;
  std::map<std::size_t, std::size_t> local;
  for (std::size_t i = 0; i < k; ++i) local[nodes[i]] = i;
  double sum = 0.0;
  for (std::size_t s = 0; s < k; ++s) {
    std::vector<int> dist(k, -1);
    dist[s] = 0;
    std::queue<std::size_t> queue;
    queue.push(s);
    while (!queue.empty()) {
      const auto u = queue.front();
      queue.pop();
      for (auto w : adj[nodes[u]]) {
        auto it = local.find(w);
        if (it == local.end() || dist[it->second] >= 0) continue;
        dist[it->second] = dist[u] + 1;
        queue.push(it->second);
      }
    }
    for (std::size_t t = 0; t < k; ++t) {
      if (t != s && dist[t] > 0) sum += 1.0 / dist[t];
    }
  }
  return sum / static_cast<double>(k * (k - 1));
}

}  // namespace

GraphMetricsRecord graph_metrics(const ContactGraph& g) {
  if (g.particles < 2) throw DataError("graph metrics need at least two particles");
  const Adjacency adj = adjacency_lists(g);
  const std::size_t n = g.particles;
  const double nd = static_cast<double>(n);
  GraphMetricsRecord m;

  std::size_t edges = 0;
  for (const auto& list : adj) edges += list.size();
  edges /= 2;
  m.density = 2.0 * static_cast<double>(edges) / (nd * (nd - 1.0));
  m.coordination_number = 2.0 * static_cast<double>(edges) / nd;

  // Triangles through each node.
  std::vector<std::size_t> tri(n, 0);
  double triads = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    const auto& nb = adj[v];
    for (std::size_t i = 0; i < nb.size(); ++i) {
      for (std::size_t j = i + 1; j < nb.size(); ++j) tri[v] += linked(adj, nb[i], nb[j]);
    }
    const double d = static_cast<double>(nb.size());
    triads += d * (d - 1.0) / 2.0;
  }
  double closed = 0.0;
  double clustering = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    closed += static_cast<double>(tri[v]);
    const double d = static_cast<double>(adj[v].size());
    if (adj[v].size() >= 2) clustering += 2.0 * static_cast<double>(tri[v]) / (d * (d - 1.0));
  }
  // Each triangle is counted once per corner, which is 3 x triangles.
  m.transitivity = triads > 0.0 ? closed / triads : 0.0;
  m.average_clustering = clustering / nd;

  // Pearson correlation of endpoint degrees over both orientations of every edge.
  double sx = 0.0, sxx = 0.0, sxy = 0.0, count = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    for (auto v : adj[u]) {
      const double du = static_cast<double>(adj[u].size());
      const double dv = static_cast<double>(adj[v].size());
      sx += du;
      sxx += du * du;
      sxy += du * dv;
      count += 1.0;
    }
  }
  if (count > 0.0) {
    const double mean = sx / count;
    const double var = sxx / count - mean * mean;
    if (var > 1e-12 * std::max(1.0, mean * mean)) {
      m.degree_assortativity = std::clamp((sxy / count - mean * mean) / var, -1.0, 1.0);
    } else {
      m.diagnostics.push_back("degree assortativity undefined (all edge endpoints share one degree); set to 0");
    }
  } else {
    m.diagnostics.push_back("degree assortativity undefined (no edges); set to 0");
  }

  std::size_t best = 1;
  std::vector<std::size_t> r, p, x;
  for (std::size_t v = 0; v < n; ++v) p.push_back(v);
  max_clique(adj, r, p, x, best);
  m.clique_number = static_cast<int>(best);

  double efficiency = 0.0;
  for (std::size_t v = 0; v < n; ++v) efficiency += global_efficiency(adj, adj[v]);
  m.average_local_efficiency = efficiency / nd;
  return m;
}

FeatureTable timestep_features(const std::vector<ContactGraph>& steps, const std::optional<std::vector<Tensor3>>& stresses) {
  if (stresses && stresses->size() != steps.size()) {
    throw DataError("stress history has " + std::to_string(stresses->size()) + " rows for " +
                    std::to_string(steps.size()) + " contact steps");
  }
  FeatureTable table;
  table.columns = {"step", "density", "transitivity", "average_clustering", "degree_assortativity", "clique_number",
                   "average_local_efficiency", "coordination_number"};
  const char* comps[] = {"11", "22", "33", "12", "23", "13"};
  const int idx[6][2] = {{0, 0}, {1, 1}, {2, 2}, {0, 1}, {1, 2}, {0, 2}};
  for (auto c : comps) table.columns.push_back(std::string("F") + c);
  for (auto c : comps) table.columns.push_back(std::string("SF") + c);
  if (stresses) {
    for (auto name : {"A", "q1", "q2", "q3"}) table.columns.push_back(name);
  }
  for (std::size_t s = 0; s < steps.size(); ++s) {
    validate_contacts(steps[s]);
    const auto metrics = graph_metrics(steps[s]);
    for (const auto& d : metrics.diagnostics) table.diagnostics.push_back("step " + std::to_string(s) + ": " + d);
    std::vector<double> row{static_cast<double>(s),
                            metrics.density,
                            metrics.transitivity,
                            metrics.average_clustering,
                            metrics.degree_assortativity,
                            static_cast<double>(metrics.clique_number),
                            metrics.average_local_efficiency,
                            metrics.coordination_number};
    const Tensor3 F = fabric_tensor(steps[s]);
    const auto strong = strong_fabric(steps[s]);
    if (strong.fallback) table.diagnostics.push_back("step " + std::to_string(s) + ": " + strong.diagnostic);
    for (const auto& ij : idx) row.push_back(F(ij[0], ij[1]));
    for (const auto& ij : idx) row.push_back(strong.tensor(ij[0], ij[1]));
    if (stresses) {
      bool degenerate = false;
      row.push_back(anisotropy_A(F, (*stresses)[s], &degenerate));
      if (degenerate) table.diagnostics.push_back("step " + std::to_string(s) + ": anisotropy undefined; set to 0");
      const auto q = principal_stress_diffs((*stresses)[s]);
      row.insert(row.end(), {q.q1, q.q2, q.q3});
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

namespace {

std::vector<std::vector<std::string>> read_rows(const std::filesystem::path& path, const std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto cells = split_csv_line(line);
  std::vector<std::size_t> pos;
  for (const auto& col : header) {
    auto it = std::find(cells.begin(), cells.end(), col);
    if (it == cells.end()) throw DataError(path.string() + ": missing column " + col);
    pos.push_back(static_cast<std::size_t>(it - cells.begin()));
  }
  std::vector<std::vector<std::string>> rows;
  for (int lineno = 2; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    cells = split_csv_line(line);
    if (cells.size() != split_csv_line(line).size() || cells.size() < pos.size() ||
        *std::max_element(pos.begin(), pos.end()) >= cells.size()) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                      " fields");
    }
    std::vector<std::string> row;
    for (auto p : pos) row.push_back(cells[p]);
    row.push_back(std::to_string(lineno));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

ContactGraph read_contact_csv(const std::filesystem::path& path, std::optional<std::size_t> particles) {
  const auto rows = read_rows(path, {"particle_a", "particle_b", "n1", "n2", "n3", "normal_force"});
  ContactGraph g;
  std::size_t largest = 0;
  for (const auto& row : rows) {
    const std::string where = path.string() + ":" + row.back();
    auto index = [&](const std::string& cell) {
      const double v = parse_real(cell, where);
      if (v < 0 || v != std::floor(v)) throw DataError(where + ": particle index must be a non-negative integer");
      return static_cast<std::size_t>(v);
    };
    Contact c;
    c.a = index(row[0]);
    c.b = index(row[1]);
    c.normal = {parse_real(row[2], where), parse_real(row[3], where), parse_real(row[4], where)};
    c.force = parse_real(row[5], where);
    if (c.a == c.b) throw DataError(where + ": particle in contact with itself");
    if (std::abs(c.normal.norm() - 1.0) > 1e-8) throw DataError(where + ": normal is not a unit vector");
    if (!(c.force >= 0.0)) throw DataError(where + ": negative normal force");
    largest = std::max({largest, c.a, c.b});
    g.contacts.push_back(c);
  }
  g.particles = particles ? *particles : (g.contacts.empty() ? 0 : largest + 1);
  if (!g.contacts.empty() && largest >= g.particles) {
    throw DataError(path.string() + ": particle index exceeds the particle count");
  }
  return g;
}

ContactDump read_contact_dump(const std::filesystem::path& dir, std::optional<std::size_t> particles) {
  if (!std::filesystem::is_directory(dir)) throw DataError("contact dump directory not found: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv" && entry.path().filename() != "stress.csv") {
      files.push_back(entry.path());
    }
  }
  if (files.empty()) throw DataError("no contact CSV files in " + dir.string());
  static const std::regex number("[0-9]+");
  auto step_of = [](const std::filesystem::path& p) {
    std::smatch m;
    const std::string name = p.stem().string();
    return std::regex_search(name, m, number) ? std::stoull(m.str()) : std::numeric_limits<unsigned long long>::max();
  };
  std::sort(files.begin(), files.end(), [&](const auto& a, const auto& b) {
    return std::make_pair(step_of(a), a.filename().string()) < std::make_pair(step_of(b), b.filename().string());
  });
  ContactDump dump;
  dump.files = files;
  for (const auto& f : files) dump.steps.push_back(read_contact_csv(f, particles));
  const auto stress_path = dir / "stress.csv";
  if (std::filesystem::exists(stress_path)) {
    std::vector<Tensor3> stresses;
    for (const auto& row : read_rows(stress_path, {"s11", "s22", "s33", "s12", "s23", "s13"})) {
      const std::string where = stress_path.string() + ":" + row.back();
      double v[6];
      for (int k = 0; k < 6; ++k) v[k] = parse_real(row[static_cast<std::size_t>(k)], where);
      Tensor3 s;
      s << v[0], v[3], v[5], v[3], v[1], v[4], v[5], v[4], v[2];
      stresses.push_back(s);
    }
    dump.stresses = std::move(stresses);
  }
  return dump;
}

void write_feature_csv(const std::filesystem::path& path, const FeatureTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
  out << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_real(row[c]);
    out << '\n';
  }
}

}  // namespace causalmech
