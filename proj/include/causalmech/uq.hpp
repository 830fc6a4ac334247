#pragma once

#include "causalmech/graphops.hpp"
#include "causalmech/surrogate.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace causalmech {

// B stochastic trajectories (T x dim each) of one node.
struct PredictionEnsemble {
  std::string node;
  std::vector<Matrix> samples;

  int size() const { return static_cast<int>(samples.size()); }
  Eigen::Index length() const { return samples.front().rows(); }
  Eigen::Index dim() const { return samples.front().cols(); }
  Matrix mean() const;
  // Population variance over the ensemble, per cell.
  Matrix variance() const;
};

struct IntervalBand {
  double level = 0.95;
  Matrix lower, mean, upper;
};

struct EcdfCurve {
  std::vector<double> errors;  // sorted unique values
  std::vector<double> F;       // count(e_j <= e) / M
};

struct ScaledMse {
  Matrix errors;  // T x dim squared differences after scaling
  Vector point;   // per-step mean over components
  double mean = 0.0;
};

struct BoxStats {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

// B passes with fresh masks per pass (pass b seeded from seed and b). Passes are
// computed in fixed chunks, so `jobs` never changes the result.
PredictionEnsemble mc_predict(const TrainedModel& model, const Matrix& raw_inputs, int B, double rate,
                              std::uint64_t seed, int jobs = 1);

// Coherent Monte-Carlo propagation along the plan: pass b of each task consumes
// pass b of its input nodes. models[k] belongs to plan.tasks[k]. Root nodes in
// the result carry B copies of the given series.
std::map<std::string, PredictionEnsemble> propagate(const TaskPlan& plan, const std::vector<TrainedModel>& models,
                                                    const std::map<std::string, Matrix>& roots, int B, double rate,
                                                    std::uint64_t seed, int jobs = 1);

// Deterministic chained prediction (all masks one).
std::map<std::string, Matrix> propagate_mean_field(const TaskPlan& plan, const std::vector<TrainedModel>& models,
                                                   const std::map<std::string, Matrix>& roots);

// Nearest-rank quantiles (index ceil(p B) - 1) at (1 -+ level) / 2; the bounds
// are widened to include the ensemble mean if needed.
IntervalBand interval(const PredictionEnsemble& e, double level);

// Fraction of cells of truth inside the band.
double coverage(const IntervalBand& band, const Matrix& truth);

// Both series min-max scaled per component by the truth's range (constant
// truth: range 1), then squared differences.
ScaledMse scaled_mse(const Matrix& truth, const Matrix& pred);

EcdfCurve ecdf(std::vector<double> errors);
double ecdf_value(const EcdfCurve& curve, double e);

// Quartiles by linear interpolation between order statistics.
BoxStats box_stats(std::vector<double> values);

void write_ensemble_csv(const std::filesystem::path& path, const std::map<std::string, PredictionEnsemble>& ensembles);
void write_interval_csv(const std::filesystem::path& path, const std::map<std::string, IntervalBand>& bands);
void write_ecdf_csv(const std::filesystem::path& path, const EcdfCurve& curve);

}  // namespace causalmech
