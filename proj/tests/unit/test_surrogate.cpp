#include "causalmech/error.hpp"
#include "causalmech/surrogate.hpp"

#include "../oracles.hpp"
#include "../support.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace causalmech;

namespace {

double sig(double a) { return 1.0 / (1.0 + std::exp(-a)); }

DropoutMasks ones(Eigen::Index d, Eigen::Index h) { return {Vector::Ones(d), Vector::Ones(h)}; }

GruWeights random_weights(Eigen::Index d, Eigen::Index h, std::mt19937_64& rng) {
  auto w = GruWeights::zeros(d, h);
  for (Matrix* m : {&w.W_z, &w.W_r, &w.W_h, &w.U_z, &w.U_r, &w.U_h}) *m = testing::gaussian(m->rows(), m->cols(), rng);
  for (Vector* b : {&w.b_z, &w.b_r, &w.b_h}) *b = testing::gaussian(b->size(), 1, rng);
  return w;
}

Network random_network(Eigen::Index d, Eigen::Index o, int hidden, int layers, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.hidden_units = hidden;
  cfg.layers = layers;
  cfg.seed = seed;
  auto net = init_network(d, o, cfg);
  std::mt19937_64 rng(seed);
  for (auto& l : net.layers) {
    auto w = random_weights(l.input_dim(), l.hidden_dim(), rng);
    l = w;
  }
  net.b_Y = testing::gaussian(o, 1, rng);
  return net;
}

ExperimentSet toy_set() {
  ExperimentSet set;
  set.schema = {{"U", {"U"}, NodeKind::Scalar, NodeRole::Root}, {"V", {"V"}, NodeKind::Scalar, NodeRole::Leaf}};
  for (int k = 0; k < 3; ++k) {
    Experiment e;
    e.id = "e" + std::to_string(k);
    e.nodes = {"U", "V"};
    Matrix u(40, 1);
    for (int t = 0; t < 40; ++t) u(t, 0) = 0.05 * t + 0.3 * k;
    e.series["U"] = u;
    e.series["V"] = u.array().sin().matrix();
    set.experiments.push_back(e);
  }
  set.split.calibration = {"e0", "e1"};
  set.split.test = {"e2"};
  return set;
}

}  // namespace

TEST_CASE("gru cell limits") {
  SUBCASE("zero weights") {
    const auto w = GruWeights::zeros(2, 3);
    CHECK(gru_cell(Vector::Ones(2), Vector::Zero(3), w, ones(2, 3)).isZero(0.0));
  }
  SUBCASE("saturated biases") {
    auto w = GruWeights::zeros(2, 3);
    w.b_h.setConstant(20.0);
    w.b_z.setConstant(-20.0);
    const Vector h = gru_cell(Vector::Ones(2), Vector::Zero(3), w, ones(2, 3));
    CHECK((h.array() - 1.0).abs().maxCoeff() < 1e-3);
  }
  SUBCASE("zero masks leave only the biases") {
    std::mt19937_64 rng(1);
    const auto w = random_weights(2, 3, rng);
    const Vector h_prev = testing::gaussian(3, 1, rng);
    const Vector h = gru_cell(testing::gaussian(2, 1, rng), h_prev, w, {Vector::Zero(2), Vector::Zero(3)});
    for (int k = 0; k < 3; ++k) {
      const double z = sig(w.b_z(k));
      CHECK(h(k) == doctest::Approx(z * h_prev(k) + (1.0 - z) * std::tanh(w.b_h(k))).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(gru_cell(Vector::Ones(3), Vector::Zero(3), GruWeights::zeros(2, 3), ones(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("forward pass matches a hand unrolled recurrence") {
  const auto c = testing::hand_unrolled_case();
  const Matrix y = forward_sequence(c.net, c.x, unit_masks(c.net));
  CHECK((y - c.expected).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("zero weights give the output bias and no dropout ignores the seed") {
  TrainConfig cfg;
  cfg.hidden_units = 4;
  auto net = init_network(2, 2, cfg);
  for (auto& l : net.layers) l = GruWeights::zeros(l.input_dim(), l.hidden_dim());
  net.W_Y.setZero();
  net.b_Y << 0.5, -1.5;
  std::mt19937_64 rng(3);
  const Matrix y = forward_sequence(net, testing::gaussian(7, 2, rng), unit_masks(net));
  for (Eigen::Index t = 0; t < 7; ++t) CHECK(y.row(t) == net.b_Y.transpose());

  const auto rand_net = random_network(2, 1, 4, 2, 9);
  const Matrix x = testing::gaussian(10, 2, rng);
  std::mt19937_64 a(1), b(2);
  CHECK(forward_sequence(rand_net, x, sample_masks(rand_net, 0.0, a, true)) ==
        forward_sequence(rand_net, x, sample_masks(rand_net, 0.0, b, true)));
}

TEST_CASE("gate ranges bound the hidden state") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    auto w = random_weights(3, 4, rng);
    w.W_h *= 3.0;
    Vector h = 2.0 * testing::gaussian(4, 1, rng);
    for (int t = 0; t < 20; ++t) {
      const Vector next = gru_cell(testing::gaussian(3, 1, rng), h, w, ones(3, 4));
      for (int k = 0; k < 4; ++k) CHECK(std::abs(next(k)) <= std::max(std::abs(h(k)), 1.0) + 1e-12);
      h = next;
    }
  }
}

TEST_CASE("masks are shared by every step of a pass") {
  const auto net = random_network(2, 1, 3, 2, 4);
  std::mt19937_64 rng(8);
  const auto masks = sample_masks(net, 0.4, rng, true);
  const Matrix x = testing::gaussian(12, 2, rng);
  const Matrix y = forward_sequence(net, x, masks);
  CHECK((forward_sequence(net, x.topRows(1), masks).row(0) - y.row(0)).norm() == 0.0);

  std::vector<Vector> h;
  for (const auto& l : net.layers) h.push_back(Vector::Zero(l.hidden_dim()));
  Vector out;
  for (Eigen::Index t = 0; t < 12; ++t) {
    Vector in = x.row(t).transpose();
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
      h[l] = gru_cell(in, h[l], net.layers[l], masks.layers[l]);
      in = h[l];
    }
    out = net.W_Y * in.cwiseProduct(masks.m_y) + net.b_Y;
  }
  CHECK((out.transpose() - y.row(11)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("inverted dropout preserves the expectation") {
  const auto net = random_network(3, 1, 4, 1, 5);
  const Vector x = (Vector(3) << 1.0, -2.0, 0.5).finished();
  Vector sum = Vector::Zero(3);
  std::mt19937_64 rng(12);
  for (int k = 0; k < 10000; ++k) {
    const auto m = sample_masks(net, 0.3, rng, true);
    for (Eigen::Index i = 0; i < 3; ++i) {
      CHECK((m.layers[0].m_x(i) == 0.0 || std::abs(m.layers[0].m_x(i) - 1.0 / 0.7) < 1e-15));
    }
    sum += x.cwiseProduct(m.layers[0].m_x);
  }
  const Vector mean = sum / 10000.0;
  for (Eigen::Index i = 0; i < 3; ++i) CHECK(std::abs(mean(i) - x(i)) <= 0.02 * std::abs(x(i)));

  std::mt19937_64 again(1);
  CHECK(sample_masks(net, 0.3, again).layers[0].m_x == Vector::Ones(3));
  CHECK_THROWS(sample_masks(net, 1.0, again));
}

TEST_CASE("analytic gradients agree with finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const auto net = random_network(2, 2, 3, 1 + static_cast<int>(seed % 2), 100 + seed);
    const double err = gradient_check(net, testing::gaussian(5, 2, rng), testing::gaussian(5, 2, rng));
    CHECK(err < 1e-4);
  }
  TrainConfig cfg;
  cfg.hidden_units = 2;
  auto zero = init_network(1, 1, cfg);
  unflatten(Vector::Zero(flatten(zero).size()), zero);
  CHECK(gradient_check(zero, Matrix::Zero(4, 1), Matrix::Zero(4, 1)) < 1e-8);
}

TEST_CASE("small weights follow the linearized recurrence") {
  // With tiny gate weights z = r = 1/2 and tanh is the identity to first order,
  // so h_t = h_{t-1}/2 + W_h x_t / 2 and y_t = h_t for a unit read-out.
  TrainConfig cfg;
  cfg.hidden_units = 1;
  cfg.layers = 1;
  auto net = init_network(1, 1, cfg);
  auto& w = net.layers[0];
  w = GruWeights::zeros(1, 1);
  w.W_h(0, 0) = 1e-4;
  w.W_z(0, 0) = 1e-5;
  w.U_h(0, 0) = 1e-5;
  net.W_Y(0, 0) = 1.0;
  net.b_Y(0) = 0.0;

  const Matrix x = (Matrix(4, 1) << 1.0, -0.5, 2.0, 0.7).finished();
  const Matrix target = (Matrix(4, 1) << 0.3, 0.1, -0.4, 0.2).finished();
  double h = 0.0, dh = 0.0, grad = 0.0;
  for (int t = 0; t < 4; ++t) {
    h = 0.5 * h + 0.5 * w.W_h(0, 0) * x(t, 0);
    dh = 0.5 * dh + 0.5 * x(t, 0);
    grad += 2.0 * (h - target(t, 0)) * dh / 4.0;
  }
  const Sequence seq{x, target};
  Network g;
  loss_and_gradient(net, {&seq}, {unit_masks(net)}, &g);
  CHECK(std::abs(g.layers[0].W_h(0, 0) - grad) <= 1e-3 * std::abs(grad));
}

TEST_CASE("training determinism and zero epochs") {
  const auto data = toy_set();
  LearningTask task;
  task.inputs = {"U"};
  task.outputs = {"V"};
  TrainConfig cfg;
  cfg.hidden_units = 4;
  cfg.epochs = 0;
  cfg.seed = 21;
  const auto untrained = train_task(task, data, cfg);
  CHECK(untrained.network == init_network(1, 1, cfg));

  cfg.epochs = 3;
  cfg.dropout_rate = 0.2;
  const auto a = train_task(task, data, cfg);
  const auto b = train_task(task, data, cfg);
  CHECK(a.network == b.network);
  CHECK(a.loss_history == b.loss_history);
  CHECK(a.loss_history.size() == 3);
  CHECK_FALSE(a.network == untrained.network);

  auto empty = data;
  empty.split.calibration.clear();
  CHECK_THROWS_AS(train_task(task, empty, cfg), DataError);
}

TEST_CASE("model json round trip is exact") {
  const auto data = toy_set();
  LearningTask task;
  task.inputs = {"U"};
  task.outputs = {"V"};
  TrainConfig cfg;
  cfg.hidden_units = 5;
  cfg.epochs = 2;
  const auto model = train_task(task, data, cfg);
  const auto back = model_from_json(model_to_json(model));
  CHECK(back.network == model.network);
  CHECK(back.input_stats == model.input_stats);
  CHECK(back.config == model.config);
  CHECK(back.task == model.task);
  const Matrix& u = data.experiments[2].series.at("U");
  CHECK(predict(back, u) == predict(model, u));
}

TEST_CASE("sine toy converges") {
  Matrix x(200, 1);
  for (int t = 0; t < 200; ++t) x(t, 0) = -1.7 + 3.4 * t / 199.0;
  const Matrix y = (x.array() * std::numbers::pi / 1.7).sin().matrix();
  TrainConfig cfg;
  cfg.hidden_units = 8;
  cfg.layers = 1;
  cfg.dropout_rate = 0.0;
  cfg.epochs = 1000;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-2;
  auto net = init_network(1, 1, cfg);
  const auto history = train_network(net, {Sequence{x, y}}, cfg);
  CHECK(history.loss.back() <= 0.1 * history.loss.front());
}
