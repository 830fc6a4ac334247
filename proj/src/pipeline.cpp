#include "causalmech/pipeline.hpp"

#include "causalmech/dataset.hpp"
#include "causalmech/error.hpp"
#include "causalmech/graphops.hpp"
#include "causalmech/micromech.hpp"
#include "causalmech/semgen.hpp"
#include "causalmech/uq.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <set>

namespace causalmech {

namespace fs = std::filesystem;
using nlohmann::json;

PipelineConfig profile_config(const std::string& name) {
  PipelineConfig cfg;
  cfg.profile = name;
  if (name == "example1") return cfg;
  if (name == "table2") {
    cfg.train.layers = 3;
    cfg.train.hidden_units = 32;
    cfg.train.dropout_rate = 0.0;
    cfg.train.batch_size = 128;
    cfg.uq.dropout_rate = 0.0;
    return cfg;
  }
  throw UsageError("unknown profile '" + name + "' (expected example1 or table2)");
}

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw UsageError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw UsageError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void take(const json& obj, const char* key, T& target) {
  if (obj.contains(key)) target = obj.at(key).get<T>();
}

void read_train(const json& obj, TrainConfig& t, const std::string& where) {
  check_keys(obj,
             {"hidden_units", "layers", "dropout_rate", "input_dropout", "epochs", "batch_size", "learning_rate",
              "beta1", "beta2", "epsilon", "window_length", "tasks"},
             where);
  take(obj, "hidden_units", t.hidden_units);
  take(obj, "layers", t.layers);
  take(obj, "dropout_rate", t.dropout_rate);
  take(obj, "input_dropout", t.input_dropout);
  take(obj, "epochs", t.epochs);
  take(obj, "batch_size", t.batch_size);
  take(obj, "learning_rate", t.learning_rate);
  take(obj, "beta1", t.beta1);
  take(obj, "beta2", t.beta2);
  take(obj, "epsilon", t.epsilon);
  take(obj, "window_length", t.window_length);
}

json train_json(const TrainConfig& t) {
  return {{"hidden_units", t.hidden_units}, {"layers", t.layers},         {"dropout_rate", t.dropout_rate},
          {"input_dropout", t.input_dropout}, {"epochs", t.epochs},         {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate}, {"beta1", t.beta1},           {"beta2", t.beta2},
          {"epsilon", t.epsilon},             {"window_length", t.window_length}};
}

void check_config(const PipelineConfig& cfg) {
  const auto& d = cfg.discovery;
  if (!(d.alpha > 0.0 && d.alpha < 1.0)) throw UsageError("discovery.alpha must lie in (0, 1)");
  if (d.max_conditioning_size < 0) throw UsageError("discovery.max_conditioning_size must be >= 0");
  if (!(d.inclusion_threshold >= 0.0 && d.inclusion_threshold < 1.0)) {
    throw UsageError("discovery.inclusion_threshold must lie in [0, 1)");
  }
  if (d.permutations < 1) throw UsageError("discovery.permutations must be positive");
  if (cfg.lags < 0) throw UsageError("discovery.lags must be >= 0");
  auto check_train = [](const TrainConfig& t, const std::string& where) {
    if (t.hidden_units < 1 || t.layers < 1 || t.epochs < 1 || t.batch_size < 1 || t.window_length < 1) {
      throw UsageError(where + ": sizes and counts must be positive");
    }
    if (!(t.dropout_rate >= 0.0 && t.dropout_rate < 1.0)) throw UsageError(where + ".dropout_rate must lie in [0, 1)");
    if (!(t.learning_rate > 0.0)) throw UsageError(where + ".learning_rate must be positive");
  };
  check_train(cfg.train, "train");
  for (const auto& [key, t] : cfg.task_train) check_train(t, "train.tasks[" + key + "]");
  if (cfg.uq.samples < 1) throw UsageError("uq.samples must be positive");
  if (!(cfg.uq.dropout_rate >= 0.0 && cfg.uq.dropout_rate < 1.0)) throw UsageError("uq.dropout_rate must lie in [0, 1)");
  if (!(cfg.uq.level > 0.0 && cfg.uq.level < 1.0)) throw UsageError("uq.level must lie in (0, 1)");
  if (cfg.jobs < 1) throw UsageError("jobs must be positive");
}

}  // namespace

PipelineConfig config_from_json(const std::string& text, const fs::path& base_dir, const std::optional<std::string>& profile) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& ex) {
    throw UsageError(std::string("config is not valid JSON: ") + ex.what());
  }
  try {
    check_keys(doc,
               {"profile", "manifest", "out", "graph", "models", "truth", "experiment", "seed", "jobs", "discovery",
                "train", "uq"},
               "config");
    PipelineConfig cfg = profile_config(profile ? *profile : doc.value("profile", std::string("example1")));
    auto path_of = [&](const char* key, fs::path& target) {
      if (!doc.contains(key)) return;
      const fs::path p = doc.at(key).get<std::string>();
      target = p.is_absolute() ? p : base_dir / p;
    };
    path_of("manifest", cfg.manifest);
    path_of("out", cfg.out);
    path_of("graph", cfg.graph);
    path_of("models", cfg.models);
    path_of("truth", cfg.truth);
    take(doc, "experiment", cfg.experiment);
    take(doc, "seed", cfg.seed);
    take(doc, "jobs", cfg.jobs);
    if (doc.contains("discovery")) {
      const auto& d = doc["discovery"];
      check_keys(d,
                 {"alpha", "max_conditioning_size", "inclusion_threshold", "ci_method", "permutations", "kci_ridge",
                  "direction_ridge", "lags"},
                 "discovery");
      take(d, "alpha", cfg.discovery.alpha);
      take(d, "max_conditioning_size", cfg.discovery.max_conditioning_size);
      take(d, "inclusion_threshold", cfg.discovery.inclusion_threshold);
      if (d.contains("ci_method")) cfg.discovery.ci_method = parse_null_method(d["ci_method"].get<std::string>());
      take(d, "permutations", cfg.discovery.permutations);
      take(d, "kci_ridge", cfg.discovery.kci_ridge);
      take(d, "direction_ridge", cfg.discovery.direction_ridge);
      take(d, "lags", cfg.lags);
    }
    bool uq_rate_given = false;
    if (doc.contains("uq")) {
      const auto& u = doc["uq"];
      check_keys(u, {"samples", "dropout_rate", "level"}, "uq");
      take(u, "samples", cfg.uq.samples);
      take(u, "level", cfg.uq.level);
      uq_rate_given = u.contains("dropout_rate");
      take(u, "dropout_rate", cfg.uq.dropout_rate);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      read_train(t, cfg.train, "train");
      if (!uq_rate_given && t.contains("dropout_rate")) cfg.uq.dropout_rate = cfg.train.dropout_rate;
      if (t.contains("tasks") && !t["tasks"].is_object()) throw UsageError("train.tasks must be a JSON object");
    }
    if (doc.contains("train") && doc["train"].contains("tasks")) {
      for (const auto& [key, overrides] : doc["train"]["tasks"].items()) {
        TrainConfig t = cfg.train;
        read_train(overrides, t, "train.tasks[" + key + "]");
        cfg.task_train[key] = t;
      }
    }
    check_config(cfg);
    return cfg;
  } catch (const json::exception& ex) {
    throw UsageError(std::string("config: ") + ex.what());
  }
}

PipelineConfig load_config(const fs::path& path, const std::optional<std::string>& profile) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return config_from_json(buffer.str(), path.parent_path(), profile);
}

std::string config_to_json(const PipelineConfig& cfg) {
  json doc;
  doc["profile"] = cfg.profile;
  doc["manifest"] = cfg.manifest.generic_string();
  doc["out"] = cfg.out.generic_string();
  if (!cfg.graph.empty()) doc["graph"] = cfg.graph.generic_string();
  if (!cfg.models.empty()) doc["models"] = cfg.models.generic_string();
  if (!cfg.truth.empty()) doc["truth"] = cfg.truth.generic_string();
  if (!cfg.experiment.empty()) doc["experiment"] = cfg.experiment;
  doc["seed"] = cfg.seed;
  doc["jobs"] = cfg.jobs;
  const auto& d = cfg.discovery;
  doc["discovery"] = {{"alpha", d.alpha},
                      {"max_conditioning_size", d.max_conditioning_size},
                      {"inclusion_threshold", d.inclusion_threshold},
                      {"ci_method", to_string(d.ci_method)},
                      {"permutations", d.permutations},
                      {"kci_ridge", d.kci_ridge},
                      {"direction_ridge", d.direction_ridge},
                      {"lags", cfg.lags}};
  doc["train"] = train_json(cfg.train);
  if (!cfg.task_train.empty()) {
    for (const auto& [key, t] : cfg.task_train) doc["train"]["tasks"][key] = train_json(t);
  }
  doc["uq"] = {{"samples", cfg.uq.samples}, {"dropout_rate", cfg.uq.dropout_rate}, {"level", cfg.uq.level}};
  return doc.dump(2) + "\n";
}

namespace {

fs::path graph_path(const PipelineConfig& cfg) { return cfg.graph.empty() ? cfg.out / "consensus.json" : cfg.graph; }
fs::path models_path(const PipelineConfig& cfg) { return cfg.models.empty() ? cfg.out / "models" : cfg.models; }

ExperimentSet load_data(const PipelineConfig& cfg) {
  if (cfg.manifest.empty()) throw UsageError("no manifest given in the config");
  auto set = load_manifest(cfg.manifest);
  validate_schema(set.schema);
  if (set.split.calibration.empty()) throw DataError("calibration split is empty");
  return set;
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  std::string text;
  for (const auto& line : lines) text += line + "\n";
  write_text(path, text);
}

void make_dirs(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());
}

// Truth graph re-expressed over the node order of `like`.
CausalGraph load_truth(const fs::path& path, const CausalGraph& like) {
  const std::string text = read_text(path);
  CausalGraph truth;
  try {
    const json doc = json::parse(text);
    truth = graph_from_json(doc.contains("dag") ? doc["dag"].dump() : text);
  } catch (const json::exception& ex) {
    throw DataError("truth file " + path.string() + " is not valid JSON: " + ex.what());
  }
  CausalGraph out(like.nodes(), like.root());
  for (const auto& [a, b] : truth.directed_edges()) out.add_directed(out.index_of(truth.name(a)), out.index_of(truth.name(b)));
  return out;
}

std::string base_name(const std::string& lagged) { return lagged.substr(0, lagged.find("@lag")); }

bool is_current(const std::string& name) {
  const auto at = name.find("@lag");
  return at == std::string::npos || name.substr(at) == "@lag0";
}

// Summary graph over the schema nodes: X -> Y when some copy of X points into the
// current copy of Y. Pairs linked both ways are dropped.
CausalGraph summarize_lagged(const CausalGraph& lagged, const Schema& schema, std::vector<std::string>& diag) {
  std::vector<std::string> names;
  std::size_t root = 0;
  for (std::size_t k = 0; k < schema.size(); ++k) {
    names.push_back(schema[k].name);
    if (schema[k].role == NodeRole::Root) root = k;
  }
  CausalGraph out(names, root);
  std::set<Edge> directed;
  std::set<Edge> undirected;
  for (const auto& [a, b] : lagged.directed_edges()) {
    const auto x = out.index_of(base_name(lagged.name(a)));
    const auto y = out.index_of(base_name(lagged.name(b)));
    if (x != y && is_current(lagged.name(b))) directed.insert({x, y});
  }
  for (const auto& [a, b] : lagged.undirected_edges()) {
    const auto x = out.index_of(base_name(lagged.name(a)));
    const auto y = out.index_of(base_name(lagged.name(b)));
    if (x != y) undirected.insert({std::min(x, y), std::max(x, y)});
  }
  for (const auto& [x, y] : directed) {
    if (directed.count({y, x})) {
      if (x < y) diag.push_back("lagged summary: " + names[x] + " and " + names[y] + " point at each other; dropped");
      continue;
    }
    out.add_directed(x, y);
  }
  for (const auto& [x, y] : undirected) {
    if (!out.adjacent(x, y)) out.add_undirected(x, y);
  }
  return out;
}

json box_json(const BoxStats& b) {
  return {{"min", b.min}, {"q1", b.q1}, {"median", b.median}, {"q3", b.q3}, {"max", b.max}};
}

struct LoadedModels {
  TaskPlan plan;
  std::vector<TrainedModel> models;
};

LoadedModels load_models(const PipelineConfig& cfg, const Schema& schema) {
  const fs::path dir = models_path(cfg);
  LoadedModels out;
  out.plan = plan_from_json(read_text(dir / "plan.json"));
  for (std::size_t k = 0; k < out.plan.tasks.size(); ++k) {
    const fs::path file = dir / ("task_" + std::to_string(k) + ".json");
    if (!fs::exists(file)) throw DataError("models do not cover the plan: missing " + file.string());
    auto model = model_from_json(read_text(file));
    if (model.task.inputs != out.plan.tasks[k].inputs || model.task.outputs != out.plan.tasks[k].outputs) {
      throw DataError(file.string() + " does not belong to task " + out.plan.tasks[k].key());
    }
    out.models.push_back(std::move(model));
  }
  for (const auto& r : out.plan.roots) find_node(schema, r);
  return out;
}

std::map<std::string, Matrix> root_series(const TaskPlan& plan, const Experiment& e) {
  std::map<std::string, Matrix> roots;
  for (const auto& r : plan.roots) roots[r] = e.at(r);
  return roots;
}

}  // namespace

std::vector<std::string> run_discover(const PipelineConfig& cfg) {
  check_config(cfg);
  const auto set = load_data(cfg);
  const auto experiments = set.select(set.split.calibration);
  if (!cfg.truth.empty() && !fs::exists(cfg.truth)) throw DataError("truth file not found: " + cfg.truth.string());

  struct PerExperiment {
    CausalGraph graph;
    std::vector<std::string> diagnostics;
  };
  const auto results = parallel_map(experiments.size(), cfg.jobs, [&](std::size_t k) {
    DiscoveryConfig d = cfg.discovery;
    d.seed = derive_seed(cfg.seed, 10, k);
    PerExperiment r;
    if (cfg.lags > 0) {
      auto lagged = discover_lagged(*experiments[k], set.schema, cfg.lags, d);
      r.diagnostics = lagged.diagnostics;
      r.graph = summarize_lagged(lagged.graph, set.schema, r.diagnostics);
    } else {
      auto found = discover(*experiments[k], set.schema, d);
      r.graph = std::move(found.graph);
      r.diagnostics = std::move(found.diagnostics);
    }
    return r;
  });

  std::vector<CausalGraph> graphs;
  std::vector<std::string> log;
  for (std::size_t k = 0; k < results.size(); ++k) {
    graphs.push_back(results[k].graph);
    for (const auto& d : results[k].diagnostics) log.push_back("[" + experiments[k]->id + "] " + d);
  }
  const auto consensus = aggregate(graphs, cfg.discovery.inclusion_threshold);
  for (const auto& d : consensus.diagnostics) log.push_back("[consensus] " + d);
  if (!cfg.truth.empty()) {
    const auto truth = load_truth(cfg.truth, consensus.graph);
    for (std::size_t k = 0; k < graphs.size(); ++k) {
      log.push_back("shd " + experiments[k]->id + " " + std::to_string(structural_hamming_distance(graphs[k], truth)));
    }
    log.push_back("shd consensus " + std::to_string(structural_hamming_distance(consensus.graph, truth)));
  }

  std::string inclusion = "from,to,count,total,inclusion,kept\n";
  for (const auto& [edge, inc] : consensus.all_inclusion) {
    inclusion += consensus.graph.name(edge.first) + "," + consensus.graph.name(edge.second) + "," +
                 std::to_string(inc.count) + "," + std::to_string(inc.total) + "," + format_real(inc.value()) + "," +
                 (consensus.graph.directed(edge.first, edge.second) ? "1" : "0") + "\n";
  }

  make_dirs(cfg.out / "graphs");
  for (std::size_t k = 0; k < graphs.size(); ++k) {
    write_text(cfg.out / "graphs" / (experiments[k]->id + ".json"), graph_to_json(graphs[k]));
  }
  write_text(cfg.out / "consensus.json", graph_to_json(consensus.graph));
  write_text(cfg.out / "consensus.dot", graph_to_dot(consensus.graph, "consensus"));
  write_text(cfg.out / "inclusion.csv", inclusion);
  write_lines(cfg.out / "discovery_log.txt", log);
  return log;
}

std::vector<std::string> run_decompose(const PipelineConfig& cfg) {
  check_config(cfg);
  const auto graph = graph_from_json(read_text(graph_path(cfg)));
  const auto plan = decompose(graph);
  std::vector<std::string> log;
  for (const auto& task : plan.tasks) log.push_back("task " + std::to_string(task.order_index) + " " + task.key());
  make_dirs(cfg.out);
  write_text(cfg.out / "plan.json", plan_to_json(plan));
  write_text(cfg.out / "plan.dot", plan_to_dot(plan));
  write_lines(cfg.out / "decompose_log.txt", log);
  return log;
}

std::vector<std::string> run_train(const PipelineConfig& cfg) {
  check_config(cfg);
  const auto graph = graph_from_json(read_text(graph_path(cfg)));
  const auto plan = decompose(graph);
  const auto set = load_data(cfg);
  for (const auto& task : plan.tasks) {
    for (const auto& n : task.inputs) find_node(set.schema, n);
    for (const auto& n : task.outputs) find_node(set.schema, n);
  }
  for (const auto& [key, _] : cfg.task_train) {
    bool known = false;
    for (const auto& task : plan.tasks) known = known || task.key() == key;
    if (!known) throw UsageError("train.tasks names unknown task '" + key + "'");
  }

  struct Outcome {
    std::optional<TrainedModel> model;
    std::string error;
  };
  const auto outcomes = parallel_map(plan.tasks.size(), cfg.jobs, [&](std::size_t k) {
    const auto& task = plan.tasks[k];
    auto it = cfg.task_train.find(task.key());
    TrainConfig t = it == cfg.task_train.end() ? cfg.train : it->second;
    t.seed = derive_seed(cfg.seed, 20, k);
    Outcome o;
    try {
      o.model = train_task(task, set, t);
    } catch (const NumericalError& ex) {
      o.error = ex.what();
    }
    return o;
  });

  std::vector<std::string> log;
  std::string losses = "epoch,task,loss\n";
  std::size_t failed = 0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    const auto key = plan.tasks[k].key();
    if (!outcomes[k].model) {
      ++failed;
      log.push_back("task " + std::to_string(k) + " " + key + " failed: " + outcomes[k].error);
      continue;
    }
    const auto& m = *outcomes[k].model;
    log.push_back("task " + std::to_string(k) + " " + key + " final_loss " + format_real(m.final_loss));
    for (std::size_t e = 0; e < m.loss_history.size(); ++e) {
      losses += std::to_string(e + 1) + "," + key + "," + format_real(m.loss_history[e]) + "\n";
    }
  }

  const fs::path dir = models_path(cfg);
  make_dirs(dir);
  write_text(dir / "plan.json", plan_to_json(plan));
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    if (outcomes[k].model) write_text(dir / ("task_" + std::to_string(k) + ".json"), model_to_json(*outcomes[k].model));
  }
  make_dirs(cfg.out);
  write_text(cfg.out / "training_loss.csv", losses);
  write_lines(cfg.out / "training_log.txt", log);
  if (failed) throw NumericalError(std::to_string(failed) + " of " + std::to_string(plan.tasks.size()) + " tasks failed to train");
  return log;
}

std::vector<std::string> run_predict(const PipelineConfig& cfg) {
  check_config(cfg);
  const auto set = load_data(cfg);
  std::vector<std::string> ids = cfg.experiment.empty() ? set.split.test : std::vector<std::string>{cfg.experiment};
  if (ids.empty()) throw DataError("no experiment to predict: test split is empty");
  const auto experiments = set.select(ids);
  const auto loaded = load_models(cfg, set.schema);

  struct Prediction {
    std::map<std::string, PredictionEnsemble> ensembles;
    std::map<std::string, IntervalBand> bands;
  };
  std::vector<Prediction> predictions;
  std::vector<double> errors;
  json summary;
  summary["samples"] = cfg.uq.samples;
  summary["dropout_rate"] = cfg.uq.dropout_rate;
  summary["level"] = cfg.uq.level;
  summary["experiments"] = json::object();
  for (std::size_t k = 0; k < experiments.size(); ++k) {
    const auto& e = *experiments[k];
    Prediction p;
    p.ensembles = propagate(loaded.plan, loaded.models, root_series(loaded.plan, e), cfg.uq.samples,
                            cfg.uq.dropout_rate, derive_seed(cfg.seed, 30, k), cfg.jobs);
    json nodes = json::object();
    for (const auto& [name, ens] : p.ensembles) {
      if (loaded.plan.roots.count(name)) continue;
      const auto band = interval(ens, cfg.uq.level);
      const auto mse = scaled_mse(e.at(name), band.mean);
      errors.insert(errors.end(), mse.point.data(), mse.point.data() + mse.point.size());
      nodes[name] = {{"scaled_mse", mse.mean}, {"coverage", coverage(band, e.at(name))}};
      p.bands[name] = band;
    }
    summary["experiments"][e.id] = nodes;
    predictions.push_back(std::move(p));
  }
  const auto curve = ecdf(errors);
  summary["ecdf_points"] = errors.size();

  const fs::path dir = cfg.out / "predictions";
  std::vector<std::string> log;
  for (std::size_t k = 0; k < experiments.size(); ++k) {
    const fs::path sub = dir / experiments[k]->id;
    make_dirs(sub);
    write_ensemble_csv(sub / "ensemble.csv", predictions[k].ensembles);
    write_interval_csv(sub / "intervals.csv", predictions[k].bands);
    log.push_back("predicted " + experiments[k]->id);
  }
  write_ecdf_csv(dir / "ecdf.csv", curve);
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  return log;
}

std::vector<std::string> run_evaluate(const PipelineConfig& cfg) {
  check_config(cfg);
  const auto set = load_data(cfg);
  const auto loaded = load_models(cfg, set.schema);

  json report;
  std::map<std::string, EcdfCurve> curves;
  for (const auto& [split, ids] : {std::pair{std::string("calibration"), set.split.calibration},
                                   std::pair{std::string("test"), set.split.test}}) {
    std::vector<double> errors;
    std::map<std::string, std::vector<double>> per_node;
    for (const auto* e : set.select(ids)) {
      const auto pred = propagate_mean_field(loaded.plan, loaded.models, root_series(loaded.plan, *e));
      for (const auto& [name, series] : pred) {
        if (loaded.plan.roots.count(name)) continue;
        const auto mse = scaled_mse(e->at(name), series);
        errors.insert(errors.end(), mse.point.data(), mse.point.data() + mse.point.size());
        per_node[name].push_back(mse.mean);
      }
    }
    json nodes = json::object();
    for (const auto& [name, values] : per_node) {
      double mean = 0.0;
      for (double v : values) mean += v;
      nodes[name] = {{"mean_scaled_mse", mean / static_cast<double>(values.size())}, {"box", box_json(box_stats(values))}};
    }
    report["splits"][split] = {{"experiments", ids.size()}, {"nodes", nodes}};
    if (!errors.empty()) curves[split] = ecdf(errors);
  }
  const fs::path consensus = graph_path(cfg);
  if (!cfg.truth.empty() && fs::exists(consensus)) {
    const auto graph = graph_from_json(read_text(consensus));
    report["shd"] = structural_hamming_distance(graph, load_truth(cfg.truth, graph));
  }

  const fs::path dir = cfg.out / "evaluation";
  make_dirs(dir);
  for (const auto& [split, curve] : curves) write_ecdf_csv(dir / ("ecdf_" + split + ".csv"), curve);
  write_text(dir / "evaluation.json", report.dump(2) + "\n");
  return {"evaluated " + std::to_string(set.split.calibration.size() + set.split.test.size()) + " experiments"};
}

std::vector<std::string> run_metrics(const fs::path& dump_dir, const fs::path& out) {
  const auto dump = read_contact_dump(dump_dir);
  const auto table = timestep_features(dump.steps, dump.stresses);
  make_dirs(out);
  write_feature_csv(out / "features.csv", table);
  write_lines(out / "metrics_log.txt", table.diagnostics);
  return table.diagnostics;
}

std::vector<std::string> run_simulate(const SimulateOptions& options, std::uint64_t seed, const fs::path& out) {
  if (options.nodes < 2) throw UsageError("simulate needs at least two nodes");
  if (options.calibration < 1 || options.test < 0) throw UsageError("simulate needs a calibration experiment");
  if (options.length < 12) throw UsageError("simulate needs series of at least 12 steps");
  if (!(options.noise >= 0.0)) throw UsageError("noise must be non-negative");
  if (!(options.edge_probability >= 0.0 && options.edge_probability <= 1.0)) {
    throw UsageError("edge probability must lie in [0, 1]");
  }
  const auto n = static_cast<std::size_t>(options.nodes);
  CausalGraph dag;
  if (options.chain) {
    std::vector<std::string> names{"U"};
    for (std::size_t v = 1; v < n; ++v) names.push_back("V" + std::to_string(v));
    dag = CausalGraph(names, 0);
    for (std::size_t v = 1; v < n; ++v) dag.add_directed(v - 1, v);
  } else {
    dag = random_dag(n, options.edge_probability, derive_seed(seed, 40));
  }
  SemOptions sem;
  sem.kind = parse_mechanism_kind(options.mechanism);
  sem.noise = options.noise;
  sem.length = options.length;
  const SemSpec spec = make_spec(dag, sem, derive_seed(seed, 41));
  const Schema schema = sem_schema(spec);

  std::vector<Experiment> experiments;
  std::vector<ManifestEntry> entries;
  Split split;
  const int total = options.calibration + options.test;
  for (int k = 0; k < total; ++k) {
    char id[32];
    std::snprintf(id, sizeof id, "exp%03d", k);
    std::mt19937_64 rng(derive_seed(seed, 43, static_cast<std::uint64_t>(k)));
    const double d = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    SemSpec run = spec;
    run.seed = derive_seed(seed, 42, static_cast<std::uint64_t>(k));
    run.root_path = {0.5 + d, 0.5 + d, 1.0 + 2.0 * d, 2.0 * std::numbers::pi * d};
    experiments.push_back(simulate(run, id));
    entries.push_back({id, "data/" + std::string(id) + ".csv"});
    (k < options.calibration ? split.calibration : split.test).push_back(id);
  }

  make_dirs(out / "data");
  for (std::size_t k = 0; k < experiments.size(); ++k) {
    write_experiment_csv(out / entries[k].path, experiments[k], schema);
  }
  write_manifest(out / "manifest.json", schema, entries, split);
  write_text(out / "truth.json", spec_to_json(spec));
  return {"simulated " + std::to_string(total) + " experiments over " + std::to_string(n) + " nodes"};
}

}  // namespace causalmech
