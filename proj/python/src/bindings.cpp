#include "causalmech/discovery.hpp"
#include "causalmech/error.hpp"
#include "causalmech/graphops.hpp"
#include "causalmech/kernels.hpp"
#include "causalmech/micromech.hpp"
#include "causalmech/pipeline.hpp"
#include "causalmech/semgen.hpp"
#include "causalmech/uq.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace causalmech;

namespace {

py::dict independence_dict(const IndependenceResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["independent"] = r.independent;
  d["degenerate"] = r.degenerate;
  return d;
}

Experiment make_experiment(const std::map<std::string, Matrix>& series, const std::string& id) {
  Experiment e;
  e.id = id;
  for (const auto& [name, m] : series) {
    e.nodes.push_back(name);
    e.series[name] = m;
  }
  return e;
}

Schema make_schema(const Experiment& e, const std::string& root) {
  Schema schema;
  for (const auto& name : e.nodes) {
    NodeSchema node;
    node.name = name;
    const auto dim = e.at(name).cols();
    for (Eigen::Index c = 0; c < dim; ++c) node.columns.push_back(dim == 1 ? name : name + "_" + std::to_string(c));
    node.kind = dim == 1 ? NodeKind::Scalar : NodeKind::Vector;
    node.role = name == root ? NodeRole::Root : NodeRole::Leaf;
    schema.push_back(node);
  }
  return schema;
}

ContactGraph make_contacts(std::size_t particles, const Eigen::Matrix<long, Eigen::Dynamic, 2>& pairs,
                           const Eigen::Matrix<double, Eigen::Dynamic, 3>& normals, const Vector& forces) {
  if (normals.rows() != pairs.rows() || forces.size() != pairs.rows()) {
    throw DataError("pairs, normals and forces must have one row per contact");
  }
  ContactGraph g{particles, {}};
  for (Eigen::Index k = 0; k < pairs.rows(); ++k) {
    if (pairs(k, 0) < 0 || pairs(k, 1) < 0) throw DataError("negative particle index");
    g.contacts.push_back({static_cast<std::size_t>(pairs(k, 0)), static_cast<std::size_t>(pairs(k, 1)),
                          normals.row(k).transpose(), forces(k)});
  }
  validate_contacts(g);
  return g;
}

py::list tasks_list(const TaskPlan& plan) {
  py::list out;
  for (const auto& t : plan.tasks) out.append(py::make_tuple(t.input_list(), t.output_list()));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Causal discovery, recurrent surrogates and Monte-Carlo dropout propagation";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<DataError> data(m, "DataError", base.ptr());
  static py::exception<NumericalError> numerical(m, "NumericalError", base.ptr());
  static py::exception<UsageError> usage(m, "UsageError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const DataError& e) {
      PyErr_SetString(data.ptr(), e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(numerical.ptr(), e.what());
    } catch (const UsageError& e) {
      PyErr_SetString(usage.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(base.ptr(), e.what());
    }
  });

  m.def("median_bandwidth", &median_bandwidth, py::arg("samples"));
  m.def("gram_gaussian", [](const Matrix& x, std::optional<double> bw) {
    return (bw ? gram_gaussian(x, *bw) : gram_gaussian(x)).entries;
  }, py::arg("samples"), py::arg("bandwidth") = py::none());
  m.def("kci_test", [](const Matrix& x, const Matrix& y, std::optional<Matrix> z, double alpha, const std::string& method,
                       int permutations, std::uint64_t seed) {
    KciOptions o;
    o.alpha = alpha;
    o.method = parse_null_method(method);
    o.permutations = permutations;
    o.seed = seed;
    return independence_dict(z ? kci_test(x, y, *z, o) : kci_test(x, y, o));
  }, py::arg("x"), py::arg("y"), py::arg("z") = py::none(), py::arg("alpha") = 0.05, py::arg("method") = "gamma",
     py::arg("permutations") = 500, py::arg("seed") = 0);
  m.def("direction_score", [](const Matrix& cause, const Matrix& effect, const Matrix& u) {
    return direction_score(cause, effect, u).delta;
  }, py::arg("cause"), py::arg("effect"), py::arg("surrogate"));

  m.def("discover", [](const std::map<std::string, Matrix>& series, const std::string& root, double alpha,
                       int max_conditioning_size, std::uint64_t seed) {
    const auto e = make_experiment(series, "py");
    DiscoveryConfig cfg;
    cfg.alpha = alpha;
    cfg.max_conditioning_size = max_conditioning_size;
    cfg.seed = seed;
    auto result = discover(e, make_schema(e, root), cfg);
    return py::make_tuple(graph_to_json(result.graph), result.diagnostics);
  }, py::arg("series"), py::arg("root"), py::arg("alpha") = 0.05, py::arg("max_conditioning_size") = 3,
     py::arg("seed") = 0, "Returns (graph JSON, diagnostics).");
  m.def("aggregate", [](const std::vector<std::string>& graphs, double threshold) {
    std::vector<CausalGraph> parsed;
    for (const auto& g : graphs) parsed.push_back(graph_from_json(g));
    auto c = aggregate(parsed, threshold);
    return py::make_tuple(graph_to_json(c.graph), c.diagnostics);
  }, py::arg("graphs"), py::arg("threshold") = 0.2);
  m.def("structural_hamming_distance", [](const std::string& a, const std::string& b) {
    return structural_hamming_distance(graph_from_json(a), graph_from_json(b));
  });
  m.def("decompose", [](const std::string& graph) { return tasks_list(decompose(graph_from_json(graph))); },
        py::arg("graph"), "List of (inputs, outputs) in schedule order.");
  m.def("graph_to_dot", [](const std::string& graph) { return graph_to_dot(graph_from_json(graph)); });

  m.def("random_dag", [](std::size_t n, double p, std::uint64_t seed) { return graph_to_json(random_dag(n, p, seed)); },
        py::arg("n"), py::arg("p"), py::arg("seed") = 0);
  m.def("simulate", [](const std::string& dag, std::uint64_t seed, int length, double noise, const std::string& kind) {
    SemOptions o;
    o.length = length;
    o.noise = noise;
    o.kind = parse_mechanism_kind(kind);
    const auto spec = make_spec(graph_from_json(dag), o, seed);
    return simulate(spec).series;
  }, py::arg("dag"), py::arg("seed") = 0, py::arg("length") = 300, py::arg("noise") = 0.2, py::arg("kind") = "tanh");
  m.def("d_separated", [](const std::string& dag, std::size_t i, std::size_t j, const std::set<std::size_t>& given) {
    return d_separated(graph_from_json(dag), i, j, given);
  }, py::arg("dag"), py::arg("i"), py::arg("j"), py::arg("given") = std::set<std::size_t>{});

  m.def("gradient_check", [](int input, int hidden, int output, int layers, int steps, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.hidden_units = hidden;
    cfg.layers = layers;
    cfg.seed = seed;
    const auto net = init_network(input, output, cfg);
    std::mt19937_64 rng(derive_seed(seed, 1));
    std::normal_distribution<double> normal;
    Matrix x(steps, input), y(steps, output);
    for (auto* m : {&x, &y}) {
      for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = normal(rng);
    }
    return gradient_check(net, x, y);
  }, py::arg("input") = 2, py::arg("hidden") = 3, py::arg("output") = 1, py::arg("layers") = 2, py::arg("steps") = 4,
     py::arg("seed") = 0);

  m.def("interval", [](const std::vector<Matrix>& samples, double level) {
    PredictionEnsemble e{"node", samples};
    if (samples.empty()) throw DataError("empty ensemble");
    const auto band = interval(e, level);
    return py::make_tuple(band.lower, band.mean, band.upper);
  }, py::arg("samples"), py::arg("level") = 0.95, "Returns (lower, mean, upper).");
  m.def("scaled_mse", [](const Matrix& truth, const Matrix& pred) {
    const auto s = scaled_mse(truth, pred);
    return py::make_tuple(s.point, s.mean);
  }, py::arg("truth"), py::arg("prediction"), "Returns (per-step errors, mean).");
  m.def("ecdf", [](const std::vector<double>& errors) {
    const auto c = ecdf(errors);
    return py::make_tuple(c.errors, c.F);
  }, py::arg("errors"));

  m.def("fabric_tensor", [](const Eigen::Matrix<double, Eigen::Dynamic, 3>& normals) {
    ContactGraph g{2, {}};
    for (Eigen::Index k = 0; k < normals.rows(); ++k) g.contacts.push_back({0, 1, normals.row(k).transpose(), 0.0});
    validate_contacts(g);
    return Tensor3(fabric_tensor(g));
  }, py::arg("normals"));
  m.def("anisotropy", [](const Tensor3& F, const Tensor3& sigma) { return anisotropy_A(F, sigma); });
  m.def("principal_stress_diffs", [](const Tensor3& sigma) {
    const auto q = principal_stress_diffs(sigma);
    return py::make_tuple(q.q1, q.q2, q.q3);
  });
  m.def("graph_metrics", [](std::size_t particles, const Eigen::Matrix<long, Eigen::Dynamic, 2>& pairs) {
    const Eigen::Matrix<double, Eigen::Dynamic, 3> normals =
        Eigen::Matrix<double, Eigen::Dynamic, 3>::Zero(pairs.rows(), 3).rowwise() + Eigen::RowVector3d(1, 0, 0);
    const auto r = graph_metrics(make_contacts(particles, pairs, normals, Vector::Zero(pairs.rows())));
    py::dict d;
    d["density"] = r.density;
    d["transitivity"] = r.transitivity;
    d["average_clustering"] = r.average_clustering;
    d["degree_assortativity"] = r.degree_assortativity;
    d["clique_number"] = r.clique_number;
    d["average_local_efficiency"] = r.average_local_efficiency;
    d["coordination_number"] = r.coordination_number;
    return d;
  }, py::arg("particles"), py::arg("pairs"));

  m.def("run_stage", [](const std::string& stage, const std::filesystem::path& config) {
    const auto cfg = load_config(config);
    py::gil_scoped_release release;
    if (stage == "discover") return run_discover(cfg);
    if (stage == "decompose") return run_decompose(cfg);
    if (stage == "train") return run_train(cfg);
    if (stage == "predict") return run_predict(cfg);
    if (stage == "evaluate") return run_evaluate(cfg);
    throw UsageError("unknown stage '" + stage + "'");
  }, py::arg("stage"), py::arg("config"));
}
