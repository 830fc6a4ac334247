#include "causalmech/kernels.hpp"

#include "causalmech/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace causalmech {

std::string to_string(NullMethod method) {
  return method == NullMethod::Gamma ? "gamma" : "permutation";
}

NullMethod parse_null_method(const std::string& text) {
  if (text == "gamma" || text == "gamma-approx") return NullMethod::Gamma;
  if (text == "permutation") return NullMethod::Permutation;
  throw UsageError("unknown independence-test method '" + text + "'");
}

double median_bandwidth(const Matrix& samples) {
  const Eigen::Index n = samples.rows();
  if (n < 2) throw std::invalid_argument("median_bandwidth needs at least two samples");
  std::vector<double> distances;
  distances.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      distances.push_back((samples.row(i) - samples.row(j)).norm());
    }
  }
  const std::size_t m = distances.size();
  const std::size_t mid = m / 2;
  std::nth_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid), distances.end());
  double median = distances[mid];
  if (m % 2 == 0) {
    const double lower = *std::max_element(distances.begin(), distances.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

GramMatrix gram_gaussian(const Matrix& samples, double bandwidth) {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("kernel bandwidth must be positive");
  const Eigen::Index n = samples.rows();
  const double scale = -1.0 / (2.0 * bandwidth * bandwidth);
  GramMatrix gram{Matrix(n, n), bandwidth};
  for (Eigen::Index i = 0; i < n; ++i) {
    gram.entries(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double value = std::exp(scale * (samples.row(i) - samples.row(j)).squaredNorm());
      gram.entries(i, j) = value;
      gram.entries(j, i) = value;
    }
  }
  return gram;
}

GramMatrix gram_gaussian(const Matrix& samples) {
  return gram_gaussian(samples, median_bandwidth(samples));
}

Matrix center_gram(const Matrix& gram) {
  const RowVector col_mean = gram.colwise().mean();
  const Vector row_mean = gram.rowwise().mean();
  const double total = gram.mean();
  Matrix out = gram;
  out.rowwise() -= col_mean;
  out.colwise() -= row_mean;
  out.array() += total;
  return out;
}

double hsic(const GramMatrix& kx, const GramMatrix& ky) {
  const Eigen::Index n = kx.size();
  if (n != ky.size()) throw std::invalid_argument("hsic: Gram matrices differ in size");
  if (n < 2) throw std::invalid_argument("hsic: need at least two samples");
  const Matrix kxc = center_gram(kx.entries);
  return kxc.cwiseProduct(ky.entries).sum() / static_cast<double>(n * n);
}

Matrix standardize_columns(const Matrix& samples) {
  Matrix out = samples.rowwise() - samples.colwise().mean();
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    const double sd = std::sqrt(out.col(c).squaredNorm() / static_cast<double>(out.rows()));
    if (sd > 1e-12) {
      out.col(c) /= sd;
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

namespace {

bool is_constant(const Matrix& block) {
  if (block.rows() == 0) return true;
  const double scale = std::max(1.0, block.cwiseAbs().maxCoeff());
  return ((block.rowwise() - block.row(0)).cwiseAbs().maxCoeff()) <= 1e-12 * scale;
}

void check_blocks(const Matrix& x, const Matrix& y, const Matrix* z, const KciOptions& options) {
  const Eigen::Index n = x.rows();
  if (y.rows() != n || (z != nullptr && z->rows() != n)) {
    throw DataError("kci_test: sample blocks have different lengths");
  }
  if (n < 10) throw DataError("kci_test: need at least 10 samples, got " + std::to_string(n));
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw std::invalid_argument("kci_test: alpha must lie in (0, 1)");
  }
}

IndependenceResult degenerate_result(const KciOptions& options) {
  IndependenceResult result;
  result.alpha = options.alpha;
  result.method = options.method;
  result.degenerate = true;
  return result;
}

double gamma_p_value(double statistic, double mean, double variance) {
  if (!(mean > 0.0) || !(variance > 0.0)) return 1.0;
  const double shape = mean * mean / variance;
  const double scale = variance / mean;
  if (statistic <= 0.0) return 1.0;
  return boost::math::gamma_q(shape, statistic / scale);
}

IndependenceResult finish(double statistic, double p_value, const KciOptions& options) {
  IndependenceResult result;
  result.statistic = std::max(statistic, 0.0);
  result.p_value = std::clamp(p_value, 0.0, 1.0);
  result.alpha = options.alpha;
  result.method = options.method;
  result.independent = result.p_value > options.alpha;
  return result;
}

}  // namespace

IndependenceResult kci_test(const Matrix& x, const Matrix& y, const KciOptions& options) {
  check_blocks(x, y, nullptr, options);
  if (is_constant(x) || is_constant(y)) return degenerate_result(options);
  const Eigen::Index n = x.rows();
  const double nd = static_cast<double>(n);

  const Matrix kx = center_gram(gram_gaussian(standardize_columns(x)).entries);
  const Matrix ky = center_gram(gram_gaussian(standardize_columns(y)).entries);
  const double raw = kx.cwiseProduct(ky).sum();

  double p_value = 1.0;
  if (options.method == NullMethod::Gamma) {
    const double mean = kx.trace() * ky.trace() / nd;
    const double variance = 2.0 * kx.squaredNorm() * ky.squaredNorm() / (nd * nd);
    p_value = gamma_p_value(raw, mean, variance);
  } else {
    std::mt19937_64 rng(options.seed);
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    int exceed = 0;
    for (int p = 0; p < options.permutations; ++p) {
      std::iota(perm.begin(), perm.end(), Eigen::Index{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      double value = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        const auto pj = perm[static_cast<std::size_t>(j)];
        for (Eigen::Index i = 0; i < n; ++i) {
          value += kx(i, j) * ky(perm[static_cast<std::size_t>(i)], pj);
        }
      }
      exceed += value >= raw;
    }
    p_value = (1.0 + exceed) / (1.0 + options.permutations);
  }
  return finish(raw / nd, p_value, options);
}

IndependenceResult kci_test(const Matrix& x, const Matrix& y, const Matrix& z, const KciOptions& options) {
  if (z.cols() == 0) return kci_test(x, y, options);
  check_blocks(x, y, &z, options);
  if (is_constant(x) || is_constant(y)) return degenerate_result(options);
  const Eigen::Index n = x.rows();
  const double nd = static_cast<double>(n);

  const Matrix zs = standardize_columns(z);
  Matrix xz(n, x.cols() + z.cols());
  xz << standardize_columns(x), 0.5 * zs;

  const Matrix kx = center_gram(gram_gaussian(xz).entries);
  const Matrix ky = center_gram(gram_gaussian(standardize_columns(y)).entries);
  const Matrix kz = center_gram(gram_gaussian(zs).entries);

  // Residual operator of kernel ridge regression on z: eps (Kz + eps I)^-1.
  const double eps = options.ridge_scale * nd;
  Matrix system = kz;
  system.diagonal().array() += eps;
  const Eigen::LLT<Matrix> llt(system);
  if (llt.info() != Eigen::Success) throw NumericalError("kci_test: conditioning system is not positive definite");
  const Matrix rz = eps * llt.solve(Matrix::Identity(n, n));
  Matrix kxr = rz * kx * rz;
  Matrix kyr = rz * ky * rz;
  kxr = 0.5 * (kxr + kxr.transpose()).eval();
  kyr = 0.5 * (kyr + kyr.transpose()).eval();

  const Matrix product = kxr.cwiseProduct(kyr);
  const double raw = product.sum();

  double p_value = 1.0;
  if (options.method == NullMethod::Gamma) {
    p_value = gamma_p_value(raw, product.trace(), 2.0 * product.squaredNorm());
  } else {
    // Spectral null: weighted sum of chi-square(1) variables.
    const Eigen::SelfAdjointEigenSolver<Matrix> solver(product, Eigen::EigenvaluesOnly);
    const Vector& eig = solver.eigenvalues();
    const double top = eig.maxCoeff();
    std::vector<double> weights;
    for (Eigen::Index k = 0; k < eig.size(); ++k) {
      if (eig(k) > 1e-10 * top) weights.push_back(eig(k));
    }
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    int exceed = 0;
    for (int p = 0; p < options.permutations; ++p) {
      double value = 0.0;
      for (double w : weights) {
        const double g = normal(rng);
        value += w * g * g;
      }
      exceed += value >= raw;
    }
    p_value = (1.0 + exceed) / (1.0 + options.permutations);
  }
  return finish(raw / nd, p_value, options);
}

DirectionScore direction_score(const Matrix& cause, const Matrix& effect, const Matrix& surrogate,
                               const DirectionOptions& options) {
  const Eigen::Index n = cause.rows();
  if (effect.rows() != n || surrogate.rows() != n) {
    throw DataError("direction_score: sample blocks have different lengths");
  }
  if (n < 2) throw DataError("direction_score: need at least two samples");
  if (is_constant(cause) || is_constant(effect) || is_constant(surrogate)) {
    return DirectionScore{0.0, true};
  }
  const double lambda = options.ridge_scale * static_cast<double>(n);
  const Matrix kc = gram_gaussian(standardize_columns(surrogate)).entries;
  const Matrix kx = gram_gaussian(standardize_columns(cause)).entries;
  const Matrix ky = gram_gaussian(standardize_columns(effect)).entries;

  // Cause embedding indexed by U: A Kx A^T with A = Kc (Kc + lambda I)^-1.
  Matrix system = kc;
  system.diagonal().array() += lambda;
  const Matrix a = Eigen::LLT<Matrix>(system).solve(kc).transpose();
  const Matrix m_cause = center_gram(a * kx * a.transpose());

  // Effect-given-cause embedding: Hilbert-Schmidt inner products of the
  // conditional operators at U = u_i.
  Matrix joint = kx.cwiseProduct(kc);
  joint.diagonal().array() += lambda;
  const Eigen::LLT<Matrix> joint_llt(joint);
  const Matrix g_ky = joint_llt.solve(joint_llt.solve(ky).transpose()).transpose();
  const Matrix inner = g_ky.cwiseProduct(kx);
  const Matrix m_effect = center_gram(kc * inner * kc);

  const double tc = m_cause.trace();
  const double te = m_effect.trace();
  if (!(tc > 0.0) || !(te > 0.0)) return DirectionScore{0.0, true};
  const double delta = m_cause.cwiseProduct(m_effect).sum() / (tc * te);
  return DirectionScore{std::max(delta, 0.0), false};
}

}  // namespace causalmech
