#pragma once

#include "causalmech/dataset.hpp"
#include "causalmech/graphops.hpp"

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace causalmech {

// Parameters of one gated recurrent layer.
struct GruWeights {
  Matrix W_z, W_r, W_h;  // hidden x input
  Matrix U_z, U_r, U_h;  // hidden x hidden
  Vector b_z, b_r, b_h;

  Eigen::Index input_dim() const { return W_z.cols(); }
  Eigen::Index hidden_dim() const { return W_z.rows(); }
  static GruWeights zeros(Eigen::Index input, Eigen::Index hidden);
  bool operator==(const GruWeights&) const = default;
};

// Stacked recurrent layers and the affine read-out y = W_Y (h o m_y) + b_Y.
struct Network {
  std::vector<GruWeights> layers;
  Matrix W_Y;
  Vector b_Y;

  Eigen::Index input_dim() const { return layers.front().input_dim(); }
  Eigen::Index output_dim() const { return W_Y.rows(); }
  Eigen::Index parameter_count() const;
  bool operator==(const Network&) const = default;
};

// Inverted-dropout masks: entries are 0 or 1 / (1 - rate).
struct DropoutMasks {
  Vector m_x;
  Vector m_h;
};

struct NetworkMasks {
  std::vector<DropoutMasks> layers;
  Vector m_y;
};

Vector gru_cell(const Vector& x, const Vector& h_prev, const GruWeights& w, const DropoutMasks& masks);

NetworkMasks unit_masks(const Network& net);
// Fresh masks for one pass. The first layer's input mask stays all ones unless
// drop_inputs is set; inter-layer, recurrent and read-out masks use `rate`.
NetworkMasks sample_masks(const Network& net, double rate, std::mt19937_64& rng, bool drop_inputs = false);

// Full rollout with h_0 = 0 in every layer and the same masks at every step.
Matrix forward_sequence(const Network& net, const Matrix& x, const NetworkMasks& masks);

// Batched rollout: x[t] is input x batch, one mask set per column.
std::vector<Matrix> forward_batch(const Network& net, const std::vector<Matrix>& x,
                                  const std::vector<NetworkMasks>& masks);

struct TrainConfig {
  int hidden_units = 32;
  int layers = 2;
  double dropout_rate = 0.2;
  bool input_dropout = false;
  int epochs = 1000;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  int window_length = 20;
  std::uint64_t seed = 0;
  bool operator==(const TrainConfig&) const = default;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases.
Network init_network(Eigen::Index input_dim, Eigen::Index output_dim, const TrainConfig& cfg);

// One normalized (inputs, targets) sequence pair, T x d and T x o.
struct Sequence {
  Matrix x;
  Matrix y;
};

// Mean squared error over every element of a batch of equal-length windows and
// its gradient (same layout as the network). masks.size() == windows.size().
double loss_and_gradient(const Network& net, const std::vector<const Sequence*>& windows,
                         const std::vector<NetworkMasks>& masks, Network* gradient);

struct TrainHistory {
  std::vector<double> loss;  // per-epoch training MSE
};

// Adam on sliding windows (stride 1) of the sequences. Throws NumericalError on a
// non-finite loss.
TrainHistory train_network(Network& net, const std::vector<Sequence>& sequences, const TrainConfig& cfg);

struct TrainedModel {
  Network network;
  NodeStats input_stats;
  NodeStats output_stats;
  LearningTask task;
  // Component count of every input and output node.
  std::map<std::string, int> dims;
  TrainConfig config;
  double final_loss = 0.0;
  std::vector<double> loss_history;
};

// Fits input/output statistics on the calibration split and trains one network.
TrainedModel train_task(const LearningTask& task, const ExperimentSet& data, const TrainConfig& cfg);

// Raw-unit prediction of the task outputs from raw input series (T x input dim).
Matrix predict(const TrainedModel& model, const Matrix& raw_inputs, const NetworkMasks& masks);
Matrix predict(const TrainedModel& model, const Matrix& raw_inputs);

// Largest relative discrepancy |a - f| / max(|a| + |f|, 1e-6) between analytic and
// central-difference (step 1e-5) gradients of the unmasked sequence MSE.
double gradient_check(const Network& net, const Matrix& x, const Matrix& y);

Vector flatten(const Network& net);
void unflatten(const Vector& theta, Network& net);

std::string model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const std::string& text);

}  // namespace causalmech
