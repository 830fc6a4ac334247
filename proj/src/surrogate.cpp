#include "causalmech/surrogate.hpp"

#include "causalmech/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace causalmech {

using nlohmann::json;

GruWeights GruWeights::zeros(Eigen::Index input, Eigen::Index hidden) {
  GruWeights w;
  w.W_z = w.W_r = w.W_h = Matrix::Zero(hidden, input);
  w.U_z = w.U_r = w.U_h = Matrix::Zero(hidden, hidden);
  w.b_z = w.b_r = w.b_h = Vector::Zero(hidden);
  return w;
}

Eigen::Index Network::parameter_count() const {
  Eigen::Index count = W_Y.size() + b_Y.size();
  for (const auto& l : layers) {
    count += 3 * (l.W_z.size() + l.U_z.size() + l.b_z.size());
  }
  return count;
}

namespace {


template <typename Derived>
Matrix sigmoid(const Eigen::MatrixBase<Derived>& a) {
  return (1.0 / (1.0 + (-a.array()).exp())).matrix();
}

// tanh through the vectorized exponential.
template <typename Derived>
Matrix fast_tanh(const Eigen::MatrixBase<Derived>& a) {
  return (2.0 / (1.0 + (-2.0 * a.array()).exp()) - 1.0).matrix();
}

void check_shapes(const GruWeights& w) {
  const auto h = w.hidden_dim();
  const auto d = w.input_dim();
  const bool ok = w.W_r.rows() == h && w.W_h.rows() == h && w.W_r.cols() == d && w.W_h.cols() == d &&
                  w.U_z.rows() == h && w.U_z.cols() == h && w.U_r.rows() == h && w.U_r.cols() == h &&
                  w.U_h.rows() == h && w.U_h.cols() == h && w.b_z.size() == h && w.b_r.size() == h &&
                  w.b_h.size() == h;
  if (!ok) throw std::invalid_argument("inconsistent recurrent weight shapes");
}

void check_network(const Network& net) {
  if (net.layers.empty()) throw std::invalid_argument("network has no recurrent layers");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    check_shapes(net.layers[l]);
    if (l > 0 && net.layers[l].input_dim() != net.layers[l - 1].hidden_dim()) {
      throw std::invalid_argument("recurrent layer sizes do not chain");
    }
  }
  if (net.W_Y.cols() != net.layers.back().hidden_dim() || net.b_Y.size() != net.W_Y.rows()) {
    throw std::invalid_argument("inconsistent read-out shapes");
  }
}

template <typename Fn>
void for_each_block(Network& net, Fn&& fn) {
  for (auto& l : net.layers) {
    fn(l.W_z), fn(l.W_r), fn(l.W_h), fn(l.U_z), fn(l.U_r), fn(l.U_h);
    fn(l.b_z), fn(l.b_r), fn(l.b_h);
  }
  fn(net.W_Y), fn(net.b_Y);
}

template <typename Fn>
void for_each_block(const Network& net, Fn&& fn) {
  for_each_block(const_cast<Network&>(net), [&](auto& block) { fn(std::as_const(block)); });
}

Network zeros_like(const Network& net) {
  Network out = net;
  for_each_block(out, [](auto& block) { block.setZero(); });
  return out;
}

struct LayerCache {
  std::vector<Matrix> x;  // unmasked inputs, t = 0..T-1
  std::vector<Matrix> h;  // h[0] = 0, h[t + 1] = state after step t
  std::vector<Matrix> z, r, i;
  Matrix m_x, m_h;
  Matrix xm;  // masked inputs of all steps side by side, input x (T B)
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix m_y;
  std::vector<Matrix> y;
};

Matrix stack_masks(const std::vector<NetworkMasks>& masks, std::size_t layer, bool input) {
  const auto& first = input ? masks.front().layers[layer].m_x : masks.front().layers[layer].m_h;
  Matrix out(first.size(), static_cast<Eigen::Index>(masks.size()));
  for (std::size_t b = 0; b < masks.size(); ++b) {
    const auto& m = input ? masks[b].layers[layer].m_x : masks[b].layers[layer].m_h;
    if (m.size() != first.size()) throw std::invalid_argument("dropout mask size mismatch");
    out.col(static_cast<Eigen::Index>(b)) = m;
  }
  return out;
}

// Input-side weights of the three gates stacked as [W_z; W_r; W_h].
Matrix stacked_inputs(const GruWeights& w) {
  Matrix out(3 * w.hidden_dim(), w.input_dim());
  out << w.W_z, w.W_r, w.W_h;
  return out;
}

Matrix stacked_recurrent(const GruWeights& w) {
  Matrix out(2 * w.hidden_dim(), w.hidden_dim());
  out << w.U_z, w.U_r;
  return out;
}

ForwardCache run_forward(const Network& net, const std::vector<Matrix>& x, const std::vector<NetworkMasks>& masks) {
  check_network(net);
  const auto B = static_cast<Eigen::Index>(masks.size());
  if (B == 0) throw std::invalid_argument("forward pass needs at least one mask set");
  for (const auto& m : masks) {
    if (m.layers.size() != net.layers.size()) throw std::invalid_argument("mask layer count mismatch");
  }
  ForwardCache cache;
  std::vector<Matrix> input = x;
  const std::size_t T = x.size();
  for (const auto& step : x) {
    if (step.rows() != net.input_dim() || step.cols() != B) throw std::invalid_argument("input shape mismatch");
  }
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& w = net.layers[l];
    const Eigen::Index H = w.hidden_dim();
    LayerCache lc;
    lc.m_x = stack_masks(masks, l, true);
    lc.m_h = stack_masks(masks, l, false);
    if (lc.m_x.rows() != w.input_dim() || lc.m_h.rows() != H) {
      throw std::invalid_argument("dropout mask size mismatch");
    }
    lc.x = std::move(input);
    lc.xm.resize(w.input_dim(), static_cast<Eigen::Index>(T) * B);
    for (std::size_t t = 0; t < T; ++t) {
      lc.xm.middleCols(static_cast<Eigen::Index>(t) * B, B) = lc.x[t].cwiseProduct(lc.m_x);
    }
    Matrix projected = stacked_inputs(w) * lc.xm;
    Vector bias(3 * H);
    bias << w.b_z, w.b_r, w.b_h;
    projected.colwise() += bias;
    const Matrix u_zr = stacked_recurrent(w);

    lc.h.assign(1, Matrix::Zero(H, B));
    for (std::size_t t = 0; t < T; ++t) {
      const auto p = projected.middleCols(static_cast<Eigen::Index>(t) * B, B);
      const Matrix hm = lc.h[t].cwiseProduct(lc.m_h);
      const Matrix a_zr = u_zr * hm;
      const Matrix z = sigmoid(p.topRows(H) + a_zr.topRows(H));
      const Matrix r = sigmoid(p.middleRows(H, H) + a_zr.bottomRows(H));
      const Matrix i = fast_tanh(p.bottomRows(H) + w.U_h * r.cwiseProduct(hm));
      lc.h.push_back(z.cwiseProduct(lc.h[t]) + (1.0 - z.array()).matrix().cwiseProduct(i));
      lc.z.push_back(z);
      lc.r.push_back(r);
      lc.i.push_back(i);
    }
    input.assign(lc.h.begin() + 1, lc.h.end());
    cache.layers.push_back(std::move(lc));
  }
  cache.m_y.resize(net.W_Y.cols(), B);
  for (Eigen::Index b = 0; b < B; ++b) {
    if (masks[static_cast<std::size_t>(b)].m_y.size() != net.W_Y.cols()) {
      throw std::invalid_argument("read-out mask size mismatch");
    }
    cache.m_y.col(b) = masks[static_cast<std::size_t>(b)].m_y;
  }
  for (std::size_t t = 0; t < T; ++t) {
    Matrix y = net.W_Y * input[t].cwiseProduct(cache.m_y);
    y.colwise() += net.b_Y;
    cache.y.push_back(std::move(y));
  }
  return cache;
}

void run_backward(const Network& net, const ForwardCache& cache, const std::vector<Matrix>& dy, Network& grad) {
  const std::size_t T = dy.size();
  const Eigen::Index B = dy.front().cols();
  const auto& top = cache.layers.back();
  std::vector<Matrix> dh_ext(T);
  for (std::size_t t = 0; t < T; ++t) {
    const Matrix hm = top.h[t + 1].cwiseProduct(cache.m_y);
    grad.W_Y.noalias() += dy[t] * hm.transpose();
    grad.b_Y += dy[t].rowwise().sum();
    dh_ext[t] = (net.W_Y.transpose() * dy[t]).cwiseProduct(cache.m_y);
  }
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& w = net.layers[l];
    const auto& lc = cache.layers[l];
    auto& g = grad.layers[l];
    const Eigen::Index H = w.hidden_dim();
    const Matrix u_zr_t = stacked_recurrent(w).transpose();
    const Matrix u_h_t = w.U_h.transpose();
    // Gate pre-activation gradients [da_z; da_r; da_i] and the recurrent operands of all steps.
    Matrix da(3 * H, static_cast<Eigen::Index>(T) * B);
    Matrix hms(H, static_cast<Eigen::Index>(T) * B);
    Matrix rhms(H, static_cast<Eigen::Index>(T) * B);
    Matrix dh_next = Matrix::Zero(H, B);
    for (std::size_t t = T; t-- > 0;) {
      const Eigen::Index col = static_cast<Eigen::Index>(t) * B;
      const Matrix dh = dh_ext[t] + dh_next;
      const Matrix& h_prev = lc.h[t];
      const Matrix& z = lc.z[t];
      const Matrix& r = lc.r[t];
      const Matrix& i = lc.i[t];
      const Matrix hm = h_prev.cwiseProduct(lc.m_h);

      auto da_t = da.middleCols(col, B);
      da_t.topRows(H) = dh.cwiseProduct(h_prev - i).array() * (z.array() * (1.0 - z.array()));
      da_t.bottomRows(H) = dh.cwiseProduct((1.0 - z.array()).matrix()).array() * (1.0 - i.array().square());
      const Matrix d_rhm = u_h_t * da_t.bottomRows(H);
      da_t.middleRows(H, H) = d_rhm.cwiseProduct(hm).array() * (r.array() * (1.0 - r.array()));
      hms.middleCols(col, B) = hm;
      rhms.middleCols(col, B) = r.cwiseProduct(hm);

      const Matrix dhm = u_zr_t * da_t.topRows(2 * H) + d_rhm.cwiseProduct(r);
      dh_next = dh.cwiseProduct(z) + dhm.cwiseProduct(lc.m_h);
    }
    const Matrix dw = da * lc.xm.transpose();
    g.W_z += dw.topRows(H);
    g.W_r += dw.middleRows(H, H);
    g.W_h += dw.bottomRows(H);
    const Matrix du = da.topRows(2 * H) * hms.transpose();
    g.U_z += du.topRows(H);
    g.U_r += du.bottomRows(H);
    g.U_h.noalias() += da.bottomRows(H) * rhms.transpose();
    const Vector db = da.rowwise().sum();
    g.b_z += db.head(H);
    g.b_r += db.segment(H, H);
    g.b_h += db.tail(H);

    if (l == 0) break;
    const Matrix dxm = stacked_inputs(w).transpose() * da;
    std::vector<Matrix> dx(T);
    for (std::size_t t = 0; t < T; ++t) {
      dx[t] = dxm.middleCols(static_cast<Eigen::Index>(t) * B, B).cwiseProduct(lc.m_x);
    }
    dh_ext = std::move(dx);
  }
}

std::vector<Matrix> columns_by_step(const std::vector<const Sequence*>& windows, bool inputs) {
  const auto T = static_cast<std::size_t>(inputs ? windows.front()->x.rows() : windows.front()->y.rows());
  const auto dim = inputs ? windows.front()->x.cols() : windows.front()->y.cols();
  std::vector<Matrix> out(T, Matrix(dim, static_cast<Eigen::Index>(windows.size())));
  for (std::size_t b = 0; b < windows.size(); ++b) {
    const Matrix& m = inputs ? windows[b]->x : windows[b]->y;
    if (static_cast<std::size_t>(m.rows()) != T || m.cols() != dim) {
      throw std::invalid_argument("batch windows differ in shape");
    }
    for (std::size_t t = 0; t < T; ++t) out[t].col(static_cast<Eigen::Index>(b)) = m.row(static_cast<Eigen::Index>(t)).transpose();
  }
  return out;
}

Vector draw_mask(Eigen::Index size, double rate, std::mt19937_64& rng) {
  if (rate <= 0.0) return Vector::Ones(size);
  std::bernoulli_distribution keep(1.0 - rate);
  Vector m(size);
  const double scale = 1.0 / (1.0 - rate);
  for (Eigen::Index k = 0; k < size; ++k) m(k) = keep(rng) ? scale : 0.0;
  return m;
}

}  // namespace

Vector gru_cell(const Vector& x, const Vector& h_prev, const GruWeights& w, const DropoutMasks& masks) {
  check_shapes(w);
  if (x.size() != w.input_dim() || h_prev.size() != w.hidden_dim() || masks.m_x.size() != x.size() ||
      masks.m_h.size() != h_prev.size()) {
    throw std::invalid_argument("gru_cell: shape mismatch");
  }
  const Vector xm = x.cwiseProduct(masks.m_x);
  const Vector hm = h_prev.cwiseProduct(masks.m_h);
  const Vector z = sigmoid(w.W_z * xm + w.U_z * hm + w.b_z);
  const Vector r = sigmoid(w.W_r * xm + w.U_r * hm + w.b_r);
  const Vector i = fast_tanh(w.W_h * xm + w.U_h * r.cwiseProduct(hm) + w.b_h);
  return z.cwiseProduct(h_prev) + (1.0 - z.array()).matrix().cwiseProduct(i);
}

NetworkMasks unit_masks(const Network& net) {
  NetworkMasks masks;
  for (const auto& l : net.layers) masks.layers.push_back({Vector::Ones(l.input_dim()), Vector::Ones(l.hidden_dim())});
  masks.m_y = Vector::Ones(net.W_Y.cols());
  return masks;
}

NetworkMasks sample_masks(const Network& net, double rate, std::mt19937_64& rng, bool drop_inputs) {
  if (!(rate >= 0.0 && rate < 1.0)) throw std::invalid_argument("dropout rate must lie in [0, 1)");
  NetworkMasks masks;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& w = net.layers[l];
    DropoutMasks m;
    m.m_x = (l == 0 && !drop_inputs) ? Vector::Ones(w.input_dim()) : draw_mask(w.input_dim(), rate, rng);
    m.m_h = draw_mask(w.hidden_dim(), rate, rng);
    masks.layers.push_back(std::move(m));
  }
  masks.m_y = draw_mask(net.W_Y.cols(), rate, rng);
  return masks;
}

std::vector<Matrix> forward_batch(const Network& net, const std::vector<Matrix>& x,
                                  const std::vector<NetworkMasks>& masks) {
  return run_forward(net, x, masks).y;
}

Matrix forward_sequence(const Network& net, const Matrix& x, const NetworkMasks& masks) {
  check_network(net);
  if (x.cols() != net.input_dim()) throw std::invalid_argument("forward_sequence: input dimension mismatch");
  std::vector<Matrix> steps;
  for (Eigen::Index t = 0; t < x.rows(); ++t) steps.push_back(x.row(t).transpose());
  const auto y = forward_batch(net, steps, {masks});
  Matrix out(x.rows(), net.output_dim());
  for (Eigen::Index t = 0; t < x.rows(); ++t) out.row(t) = y[static_cast<std::size_t>(t)].transpose();
  return out;
}

Network init_network(Eigen::Index input_dim, Eigen::Index output_dim, const TrainConfig& cfg) {
  if (input_dim < 1 || output_dim < 1 || cfg.hidden_units < 1 || cfg.layers < 1) {
    throw std::invalid_argument("init_network: dimensions must be positive");
  }
  std::mt19937_64 rng(derive_seed(cfg.seed, 5));
  auto uniform = [&](Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = dist(rng);
    }
    return m;
  };
  const Eigen::Index h = cfg.hidden_units;
  Network net;
  Eigen::Index in = input_dim;
  for (int l = 0; l < cfg.layers; ++l) {
    GruWeights w = GruWeights::zeros(in, h);
    w.W_z = uniform(h, in, in);
    w.W_r = uniform(h, in, in);
    w.W_h = uniform(h, in, in);
    w.U_z = uniform(h, h, h);
    w.U_r = uniform(h, h, h);
    w.U_h = uniform(h, h, h);
    net.layers.push_back(std::move(w));
    in = h;
  }
  net.W_Y = uniform(output_dim, h, h);
  net.b_Y = Vector::Zero(output_dim);
  return net;
}

double loss_and_gradient(const Network& net, const std::vector<const Sequence*>& windows,
                         const std::vector<NetworkMasks>& masks, Network* gradient) {
  if (windows.empty() || windows.size() != masks.size()) throw std::invalid_argument("loss: batch/mask mismatch");
  const auto x = columns_by_step(windows, true);
  const auto y = columns_by_step(windows, false);
  const ForwardCache cache = run_forward(net, x, masks);
  const double count = static_cast<double>(y.size()) * static_cast<double>(y.front().size());
  double sse = 0.0;
  std::vector<Matrix> dy(y.size());
  for (std::size_t t = 0; t < y.size(); ++t) {
    const Matrix diff = cache.y[t] - y[t];
    sse += diff.squaredNorm();
    dy[t] = (2.0 / count) * diff;
  }
  if (gradient) {
    *gradient = zeros_like(net);
    run_backward(net, cache, dy, *gradient);
  }
  return sse / count;
}

Vector flatten(const Network& net) {
  Vector theta(net.parameter_count());
  Eigen::Index pos = 0;
  for_each_block(net, [&](const auto& block) {
    theta.segment(pos, block.size()) = Eigen::Map<const Vector>(block.data(), block.size());
    pos += block.size();
  });
  return theta;
}

void unflatten(const Vector& theta, Network& net) {
  if (theta.size() != net.parameter_count()) throw std::invalid_argument("unflatten: parameter count mismatch");
  Eigen::Index pos = 0;
  for_each_block(net, [&](auto& block) {
    Eigen::Map<Vector>(block.data(), block.size()) = theta.segment(pos, block.size());
    pos += block.size();
  });
}

TrainHistory train_network(Network& net, const std::vector<Sequence>& sequences, const TrainConfig& cfg) {
  if (sequences.empty()) throw DataError("training needs at least one sequence");
  if (cfg.epochs < 0 || cfg.batch_size < 1 || cfg.window_length < 1) {
    throw std::invalid_argument("invalid training configuration");
  }
  std::vector<Sequence> windows;
  for (const auto& s : sequences) {
    if (s.x.rows() != s.y.rows() || s.x.rows() < 1) throw DataError("input and target series differ in length");
    if (s.x.cols() != net.input_dim() || s.y.cols() != net.output_dim()) {
      throw DataError("training data dimension does not match the network");
    }
    const Eigen::Index T = s.x.rows();
    const Eigen::Index W = cfg.window_length;
    if (T <= W) {
      windows.push_back(s);
      continue;
    }
    for (Eigen::Index start = 0; start + W <= T; ++start) {
      windows.push_back({s.x.middleRows(start, W), s.y.middleRows(start, W)});
    }
  }

  TrainHistory history;
  std::mt19937_64 rng(derive_seed(cfg.seed, 6));
  Vector theta = flatten(net);
  Vector m1 = Vector::Zero(theta.size());
  Vector m2 = Vector::Zero(theta.size());
  long long step = 0;
  Network grad;
  std::vector<std::size_t> order(windows.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return windows[a].x.rows() < windows[b].x.rows(); });
    double sse = 0.0;
    double elements = 0.0;
    for (std::size_t start = 0; start < order.size();) {
      const auto length = windows[order[start]].x.rows();
      std::vector<const Sequence*> batch;
      std::vector<NetworkMasks> masks;
      while (start < order.size() && batch.size() < static_cast<std::size_t>(cfg.batch_size) &&
             windows[order[start]].x.rows() == length) {
        batch.push_back(&windows[order[start]]);
        masks.push_back(sample_masks(net, cfg.dropout_rate, rng, cfg.input_dropout));
        ++start;
      }
      const double loss = loss_and_gradient(net, batch, masks, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch + 1));
      }
      const double n = static_cast<double>(batch.size() * static_cast<std::size_t>(length * net.output_dim()));
      sse += loss * n;
      elements += n;

      ++step;
      const Vector g = flatten(grad);
      m1 = cfg.beta1 * m1 + (1.0 - cfg.beta1) * g;
      m2 = cfg.beta2 * m2 + (1.0 - cfg.beta2) * g.cwiseProduct(g);
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + cfg.epsilon);
      unflatten(theta, net);
    }
    history.loss.push_back(sse / elements);
  }
  return history;
}

TrainedModel train_task(const LearningTask& task, const ExperimentSet& data, const TrainConfig& cfg) {
  if (task.inputs.empty() || task.outputs.empty()) throw DataError("learning task needs inputs and outputs");
  const auto& ids = data.split.calibration;
  if (ids.empty()) throw DataError("calibration split is empty");
  const auto inputs = task.input_list();
  const auto outputs = task.output_list();
  for (const auto& name : inputs) find_node(data.schema, name);
  for (const auto& name : outputs) find_node(data.schema, name);

  const Normalizer normalizer = fit_normalizer(data, ids);
  TrainedModel model;
  model.task = task;
  model.config = cfg;
  model.input_stats = normalizer.block(inputs);
  model.output_stats = normalizer.block(outputs);
  for (const auto& name : inputs) model.dims[name] = find_node(data.schema, name).dimension();
  for (const auto& name : outputs) model.dims[name] = find_node(data.schema, name).dimension();

  std::vector<Sequence> sequences;
  for (const auto* e : data.select(ids)) {
    sequences.push_back({model.input_stats.apply(e->stack(inputs)), model.output_stats.apply(e->stack(outputs))});
  }
  model.network = init_network(model.input_stats.mean.size(), model.output_stats.mean.size(), cfg);
  const auto history = train_network(model.network, sequences, cfg);
  model.loss_history = history.loss;
  model.final_loss = history.loss.empty() ? 0.0 : history.loss.back();
  return model;
}

Matrix predict(const TrainedModel& model, const Matrix& raw_inputs, const NetworkMasks& masks) {
  return model.output_stats.invert(forward_sequence(model.network, model.input_stats.apply(raw_inputs), masks));
}

Matrix predict(const TrainedModel& model, const Matrix& raw_inputs) {
  return predict(model, raw_inputs, unit_masks(model.network));
}

double gradient_check(const Network& net, const Matrix& x, const Matrix& y) {
  const Sequence seq{x, y};
  const std::vector<const Sequence*> batch{&seq};
  const std::vector<NetworkMasks> masks{unit_masks(net)};
  Network grad;
  loss_and_gradient(net, batch, masks, &grad);
  const Vector analytic = flatten(grad);
  const Vector theta = flatten(net);
  Network probe = net;
  constexpr double h = 1e-5;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Vector shifted = theta;
    shifted(k) = theta(k) + h;
    unflatten(shifted, probe);
    const double up = loss_and_gradient(probe, batch, masks, nullptr);
    shifted(k) = theta(k) - h;
    unflatten(shifted, probe);
    const double down = loss_and_gradient(probe, batch, masks, nullptr);
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic(k) - numeric) / std::max(std::abs(analytic(k)) + std::abs(numeric), 1e-6);
    worst = std::max(worst, rel);
  }
  return worst;
}

namespace {

json matrix_json(const Matrix& m) {
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
  }
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", data}};
}

Matrix matrix_from(const json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw DataError("matrix data size mismatch");
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j2 = 0; j2 < cols; ++j2) m(i, j2) = data[static_cast<std::size_t>(i * cols + j2)];
  }
  return m;
}

json stats_json(const NodeStats& s) {
  return {{"mean", std::vector<double>(s.mean.data(), s.mean.data() + s.mean.size())},
          {"stddev", std::vector<double>(s.stddev.data(), s.stddev.data() + s.stddev.size())}};
}

NodeStats stats_from(const json& j) {
  const auto mean = j.at("mean").get<std::vector<double>>();
  const auto sd = j.at("stddev").get<std::vector<double>>();
  if (mean.size() != sd.size()) throw DataError("normalizer mean/stddev size mismatch");
  NodeStats s;
  s.mean = Eigen::Map<const RowVector>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  s.stddev = Eigen::Map<const RowVector>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  return s;
}

}  // namespace

std::string model_to_json(const TrainedModel& model) {
  const auto& c = model.config;
  json doc;
  doc["task"] = {{"inputs", model.task.input_list()},
                 {"outputs", model.task.output_list()},
                 {"order_index", model.task.order_index}};
  doc["config"] = {{"hidden_units", c.hidden_units}, {"layers", c.layers},
                   {"dropout_rate", c.dropout_rate}, {"input_dropout", c.input_dropout},
                   {"epochs", c.epochs},             {"batch_size", c.batch_size},
                   {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
                   {"beta2", c.beta2},               {"epsilon", c.epsilon},
                   {"window_length", c.window_length}, {"seed", c.seed}};
  doc["dims"] = model.dims;
  doc["input_stats"] = stats_json(model.input_stats);
  doc["output_stats"] = stats_json(model.output_stats);
  doc["layers"] = json::array();
  for (const auto& l : model.network.layers) {
    doc["layers"].push_back({{"W_z", matrix_json(l.W_z)}, {"W_r", matrix_json(l.W_r)}, {"W_h", matrix_json(l.W_h)},
                             {"U_z", matrix_json(l.U_z)}, {"U_r", matrix_json(l.U_r)}, {"U_h", matrix_json(l.U_h)},
                             {"b_z", matrix_json(l.b_z)}, {"b_r", matrix_json(l.b_r)}, {"b_h", matrix_json(l.b_h)}});
  }
  doc["W_Y"] = matrix_json(model.network.W_Y);
  doc["b_Y"] = matrix_json(model.network.b_Y);
  doc["final_loss"] = model.final_loss;
  return doc.dump(1) + "\n";
}

TrainedModel model_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    TrainedModel model;
    for (const auto& s : doc.at("task").at("inputs")) model.task.inputs.insert(s.get<std::string>());
    for (const auto& s : doc.at("task").at("outputs")) model.task.outputs.insert(s.get<std::string>());
    model.task.order_index = doc.at("task").value("order_index", 0);
    const auto& c = doc.at("config");
    auto& cfg = model.config;
    cfg.hidden_units = c.at("hidden_units").get<int>();
    cfg.layers = c.at("layers").get<int>();
    cfg.dropout_rate = c.at("dropout_rate").get<double>();
    cfg.input_dropout = c.at("input_dropout").get<bool>();
    cfg.epochs = c.at("epochs").get<int>();
    cfg.batch_size = c.at("batch_size").get<int>();
    cfg.learning_rate = c.at("learning_rate").get<double>();
    cfg.beta1 = c.at("beta1").get<double>();
    cfg.beta2 = c.at("beta2").get<double>();
    cfg.epsilon = c.at("epsilon").get<double>();
    cfg.window_length = c.at("window_length").get<int>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    model.dims = doc.at("dims").get<std::map<std::string, int>>();
    model.input_stats = stats_from(doc.at("input_stats"));
    model.output_stats = stats_from(doc.at("output_stats"));
    for (const auto& l : doc.at("layers")) {
      GruWeights w;
      w.W_z = matrix_from(l.at("W_z"));
      w.W_r = matrix_from(l.at("W_r"));
      w.W_h = matrix_from(l.at("W_h"));
      w.U_z = matrix_from(l.at("U_z"));
      w.U_r = matrix_from(l.at("U_r"));
      w.U_h = matrix_from(l.at("U_h"));
      w.b_z = matrix_from(l.at("b_z"));
      w.b_r = matrix_from(l.at("b_r"));
      w.b_h = matrix_from(l.at("b_h"));
      model.network.layers.push_back(std::move(w));
    }
    model.network.W_Y = matrix_from(doc.at("W_Y"));
    model.network.b_Y = matrix_from(doc.at("b_Y"));
    model.final_loss = doc.at("final_loss").get<double>();
    check_network(model.network);
    if (model.input_stats.mean.size() != model.network.input_dim() ||
        model.output_stats.mean.size() != model.network.output_dim()) {
      throw DataError("model normalizer does not match network dimensions");
    }
    return model;
  } catch (const json::exception& ex) {
    throw DataError(std::string("malformed model JSON: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    throw DataError(std::string("malformed model JSON: ") + ex.what());
  }
}

}  // namespace causalmech
