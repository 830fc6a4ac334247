#include "causalmech/uq.hpp"

#include "causalmech/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace causalmech {

namespace {

constexpr int kChunk = 25;

// Splits a T x total matrix into per-node blocks following names and dims.
std::map<std::string, Matrix> split_columns(const Matrix& m, const std::vector<std::string>& names,
                                            const std::map<std::string, int>& dims) {
  std::map<std::string, Matrix> out;
  Eigen::Index col = 0;
  for (const auto& name : names) {
    const int d = dims.at(name);
    out[name] = m.middleCols(col, d);
    col += d;
  }
  if (col != m.cols()) throw DataError("model output width does not match node dimensions");
  return out;
}

// Runs passes [first, first + count) of one model. inputs(b) yields the raw input
// series of pass b.
template <typename InputFn>
std::vector<Matrix> run_passes(const TrainedModel& model, int first, int count, double rate, std::uint64_t seed,
                               std::uint64_t stream, InputFn&& inputs) {
  const Network& net = model.network;
  std::vector<NetworkMasks> masks;
  std::vector<Matrix> normalized;
  for (int b = first; b < first + count; ++b) {
    std::mt19937_64 rng(derive_seed(seed, stream, static_cast<std::uint64_t>(b)));
    masks.push_back(sample_masks(net, rate, rng, model.config.input_dropout));
    normalized.push_back(model.input_stats.apply(inputs(b)));
  }
  const Eigen::Index T = normalized.front().rows();
  std::vector<Matrix> steps(static_cast<std::size_t>(T), Matrix(net.input_dim(), count));
  for (int k = 0; k < count; ++k) {
    if (normalized[static_cast<std::size_t>(k)].rows() != T) throw DataError("input series differ in length");
    for (Eigen::Index t = 0; t < T; ++t) {
      steps[static_cast<std::size_t>(t)].col(k) = normalized[static_cast<std::size_t>(k)].row(t).transpose();
    }
  }
  const auto y = forward_batch(net, steps, masks);
  std::vector<Matrix> out(static_cast<std::size_t>(count), Matrix(T, net.output_dim()));
  for (int k = 0; k < count; ++k) {
    for (Eigen::Index t = 0; t < T; ++t) out[static_cast<std::size_t>(k)].row(t) = y[static_cast<std::size_t>(t)].col(k).transpose();
    out[static_cast<std::size_t>(k)] = model.output_stats.invert(out[static_cast<std::size_t>(k)]);
  }
  return out;
}

template <typename InputFn>
std::vector<Matrix> all_passes(const TrainedModel& model, int B, double rate, std::uint64_t seed,
                               std::uint64_t stream, int jobs, InputFn&& inputs) {
  if (rate == 0.0) {
    // Every pass is the same deterministic rollout.
    const Matrix single = predict(model, inputs(0));
    return std::vector<Matrix>(static_cast<std::size_t>(B), single);
  }
  const int chunks = (B + kChunk - 1) / kChunk;
  auto parts = parallel_map(static_cast<std::size_t>(chunks), jobs, [&](std::size_t c) {
    const int first = static_cast<int>(c) * kChunk;
    return run_passes(model, first, std::min(kChunk, B - first), rate, seed, stream, inputs);
  });
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(B));
  for (auto& part : parts) {
    for (auto& m : part) out.push_back(std::move(m));
  }
  return out;
}

void check_uq_args(int B, double rate) {
  if (B < 1) throw std::invalid_argument("ensemble size B must be at least 1");
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
}

Matrix gather_inputs(const TrainedModel& model, const std::map<std::string, Matrix>& series) {
  const auto names = model.task.input_list();
  Eigen::Index cols = 0;
  Eigen::Index rows = -1;
  for (const auto& name : names) {
    auto it = series.find(name);
    if (it == series.end()) throw DataError("missing input series for node " + name);
    cols += it->second.cols();
    if (rows >= 0 && it->second.rows() != rows) throw DataError("input series differ in length");
    rows = it->second.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index col = 0;
  for (const auto& name : names) {
    const Matrix& m = series.at(name);
    out.middleCols(col, m.cols()) = m;
    col += m.cols();
  }
  return out;
}

void check_plan(const TaskPlan& plan, const std::vector<TrainedModel>& models, const std::map<std::string, Matrix>& roots) {
  if (models.size() != plan.tasks.size()) throw DataError("one model per task is required");
  for (std::size_t k = 0; k < models.size(); ++k) {
    if (models[k].task.inputs != plan.tasks[k].inputs || models[k].task.outputs != plan.tasks[k].outputs) {
      throw DataError("model " + std::to_string(k) + " does not match task " + plan.tasks[k].key());
    }
  }
  for (const auto& r : plan.roots) {
    if (!roots.count(r)) throw DataError("missing root series for node " + r);
  }
  std::set<std::string> known(plan.roots.begin(), plan.roots.end());
  for (const auto& task : plan.tasks) {
    for (const auto& in : task.inputs) {
      if (!known.count(in)) throw DataError("schedule violation: " + in + " is needed before it is predicted");
    }
    known.insert(task.outputs.begin(), task.outputs.end());
  }
}

}  // namespace

Matrix PredictionEnsemble::mean() const {
  const Matrix& ref = samples.front();
  Matrix m = Matrix::Zero(length(), dim());
  for (const auto& s : samples) m += s - ref;
  return ref + m / static_cast<double>(samples.size());
}

Matrix PredictionEnsemble::variance() const {
  // Shifted by the first sample so identical trajectories give exactly zero.
  const Matrix& ref = samples.front();
  Matrix sum = Matrix::Zero(length(), dim());
  Matrix sq = Matrix::Zero(length(), dim());
  for (const auto& s : samples) {
    const Matrix d = s - ref;
    sum += d;
    sq.array() += d.array().square();
  }
  const double n = static_cast<double>(samples.size());
  const Matrix m = sum / n;
  return (sq / n - m.cwiseProduct(m)).cwiseMax(0.0);
}

PredictionEnsemble mc_predict(const TrainedModel& model, const Matrix& raw_inputs, int B, double rate,
                              std::uint64_t seed, int jobs) {
  check_uq_args(B, rate);
  if (raw_inputs.cols() != model.network.input_dim()) throw DataError("mc_predict: input dimension mismatch");
  PredictionEnsemble e;
  e.node = model.task.key();
  e.samples = all_passes(model, B, rate, seed, 0, jobs, [&](int) -> const Matrix& { return raw_inputs; });
  return e;
}

std::map<std::string, PredictionEnsemble> propagate(const TaskPlan& plan, const std::vector<TrainedModel>& models,
                                                    const std::map<std::string, Matrix>& roots, int B, double rate,
                                                    std::uint64_t seed, int jobs) {
  check_uq_args(B, rate);
  check_plan(plan, models, roots);
  std::map<std::string, PredictionEnsemble> out;
  for (const auto& r : plan.roots) {
    out[r] = PredictionEnsemble{r, std::vector<Matrix>(static_cast<std::size_t>(B), roots.at(r))};
  }
  for (std::size_t k = 0; k < plan.tasks.size(); ++k) {
    const auto& model = models[k];
    const auto inputs = model.task.input_list();
    auto pass_inputs = [&](int b) {
      std::map<std::string, Matrix> series;
      for (const auto& name : inputs) series[name] = out.at(name).samples[static_cast<std::size_t>(b)];
      return gather_inputs(model, series);
    };
    std::vector<Matrix> passes = all_passes(model, B, rate, seed, 1 + k, jobs, pass_inputs);
    const auto outputs = model.task.output_list();
    for (const auto& name : outputs) out[name].node = name;
    for (auto& pass : passes) {
      auto parts = split_columns(pass, outputs, model.dims);
      for (auto& [name, m] : parts) out[name].samples.push_back(std::move(m));
    }
  }
  return out;
}

std::map<std::string, Matrix> propagate_mean_field(const TaskPlan& plan, const std::vector<TrainedModel>& models,
                                                   const std::map<std::string, Matrix>& roots) {
  check_plan(plan, models, roots);
  std::map<std::string, Matrix> out;
  for (const auto& r : plan.roots) out[r] = roots.at(r);
  for (std::size_t k = 0; k < plan.tasks.size(); ++k) {
    const Matrix pred = predict(models[k], gather_inputs(models[k], out));
    for (auto& [name, m] : split_columns(pred, models[k].task.output_list(), models[k].dims)) out[name] = std::move(m);
  }
  return out;
}

IntervalBand interval(const PredictionEnsemble& e, double level) {
  if (e.samples.empty()) throw std::invalid_argument("interval: empty ensemble");
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("interval: level must lie in (0, 1)");
  const int B = e.size();
  auto rank = [B](double p) {
    const auto idx = static_cast<int>(std::ceil(p * B - 1e-9)) - 1;
    return static_cast<std::size_t>(std::clamp(idx, 0, B - 1));
  };
  const std::size_t lo = rank((1.0 - level) / 2.0);
  const std::size_t hi = rank((1.0 + level) / 2.0);
  IntervalBand band;
  band.level = level;
  band.mean = e.mean();
  band.lower.resize(e.length(), e.dim());
  band.upper.resize(e.length(), e.dim());
  std::vector<double> cell(static_cast<std::size_t>(B));
  for (Eigen::Index t = 0; t < e.length(); ++t) {
    for (Eigen::Index c = 0; c < e.dim(); ++c) {
      for (int b = 0; b < B; ++b) cell[static_cast<std::size_t>(b)] = e.samples[static_cast<std::size_t>(b)](t, c);
      std::sort(cell.begin(), cell.end());
      band.lower(t, c) = std::min(cell[lo], band.mean(t, c));
      band.upper(t, c) = std::max(cell[hi], band.mean(t, c));
    }
  }
  return band;
}

double coverage(const IntervalBand& band, const Matrix& truth) {
  if (truth.rows() != band.lower.rows() || truth.cols() != band.lower.cols()) {
    throw DataError("coverage: truth shape does not match the band");
  }
  const auto inside = ((truth.array() >= band.lower.array()) && (truth.array() <= band.upper.array())).count();
  return static_cast<double>(inside) / static_cast<double>(truth.size());
}

ScaledMse scaled_mse(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw DataError("scaled_mse: shape mismatch");
  if (truth.size() == 0) throw DataError("scaled_mse: empty series");
  ScaledMse out;
  out.errors.resize(truth.rows(), truth.cols());
  for (Eigen::Index c = 0; c < truth.cols(); ++c) {
    const double lo = truth.col(c).minCoeff();
    const double range = truth.col(c).maxCoeff() - lo;
    const double scale = range > 0.0 ? range : 1.0;
    const auto st = (truth.col(c).array() - lo) / scale;
    const auto sp = (pred.col(c).array() - lo) / scale;
    out.errors.col(c) = (st - sp).square().matrix();
  }
  out.point = out.errors.rowwise().mean();
  out.mean = out.errors.mean();
  return out;
}

EcdfCurve ecdf(std::vector<double> errors) {
  if (errors.empty()) throw std::invalid_argument("ecdf: no values");
  std::sort(errors.begin(), errors.end());
  const double M = static_cast<double>(errors.size());
  EcdfCurve curve;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    if (k + 1 < errors.size() && errors[k + 1] == errors[k]) continue;
    curve.errors.push_back(errors[k]);
    curve.F.push_back(static_cast<double>(k + 1) / M);
  }
  return curve;
}

double ecdf_value(const EcdfCurve& curve, double e) {
  auto it = std::upper_bound(curve.errors.begin(), curve.errors.end(), e);
  if (it == curve.errors.begin()) return 0.0;
  return curve.F[static_cast<std::size_t>(it - curve.errors.begin()) - 1];
}

BoxStats box_stats(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("box_stats: no values");
  std::sort(values.begin(), values.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), q(0.25), q(0.5), q(0.75), values.back()};
}

void write_ensemble_csv(const std::filesystem::path& path, const std::map<std::string, PredictionEnsemble>& ensembles) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "node,sample_index,step,component,value\n";
  for (const auto& [name, e] : ensembles) {
    for (int b = 0; b < e.size(); ++b) {
      const Matrix& m = e.samples[static_cast<std::size_t>(b)];
      for (Eigen::Index t = 0; t < m.rows(); ++t) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          out << name << ',' << b << ',' << t << ',' << c << ',' << format_real(m(t, c)) << '\n';
        }
      }
    }
  }
}

void write_interval_csv(const std::filesystem::path& path, const std::map<std::string, IntervalBand>& bands) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "node,step,component,lower,mean,upper\n";
  for (const auto& [name, band] : bands) {
    for (Eigen::Index t = 0; t < band.mean.rows(); ++t) {
      for (Eigen::Index c = 0; c < band.mean.cols(); ++c) {
        out << name << ',' << t << ',' << c << ',' << format_real(band.lower(t, c)) << ','
            << format_real(band.mean(t, c)) << ',' << format_real(band.upper(t, c)) << '\n';
      }
    }
  }
}

void write_ecdf_csv(const std::filesystem::path& path, const EcdfCurve& curve) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "error,F\n";
  for (std::size_t k = 0; k < curve.errors.size(); ++k) {
    out << format_real(curve.errors[k]) << ',' << format_real(curve.F[k]) << '\n';
  }
}

}  // namespace causalmech
