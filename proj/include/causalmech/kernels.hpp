#pragma once

#include "causalmech/common.hpp"

#include <cstdint>
#include <string>

namespace causalmech {

// Gaussian Gram matrix with the bandwidth that produced it.
struct GramMatrix {
  Matrix entries;
  double bandwidth = 1.0;

  Eigen::Index size() const { return entries.rows(); }
};

// Median of the pairwise Euclidean distances between distinct rows; 1 when that
// median is zero. Rows are samples.
double median_bandwidth(const Matrix& samples);

// entries(i, j) = exp(-|x_i - x_j|^2 / (2 bandwidth^2)), exactly symmetric, unit diagonal.
GramMatrix gram_gaussian(const Matrix& samples, double bandwidth);
GramMatrix gram_gaussian(const Matrix& samples);

// H K H with H = I - 1/n.
Matrix center_gram(const Matrix& gram);

// Biased empirical HSIC, trace(Kx H Ky H) / n^2.
double hsic(const GramMatrix& kx, const GramMatrix& ky);

// Column-wise z-scores; constant columns become zero.
Matrix standardize_columns(const Matrix& samples);

enum class NullMethod { Gamma, Permutation };

std::string to_string(NullMethod method);
NullMethod parse_null_method(const std::string& text);

struct KciOptions {
  double alpha = 0.05;
  NullMethod method = NullMethod::Gamma;
  // Permutations (unconditional) or spectral null draws (conditional).
  int permutations = 500;
  // Ridge of the conditioning regression is ridge_scale * n.
  double ridge_scale = 1e-3;
  std::uint64_t seed = 0;
};

struct IndependenceResult {
  double statistic = 0.0;
  double p_value = 1.0;
  bool independent = true;
  double alpha = 0.05;
  NullMethod method = NullMethod::Gamma;
  bool degenerate = false;
};

// Kernel-based (conditional) independence test. Rows are samples; all blocks must
// share n >= 10. A block whose samples are all identical yields independent with
// p = 1 and the degenerate flag set.
IndependenceResult kci_test(const Matrix& x, const Matrix& y, const KciOptions& options = {});
IndependenceResult kci_test(const Matrix& x, const Matrix& y, const Matrix& z,
                            const KciOptions& options = {});

struct DirectionOptions {
  // Ridge of the conditional-embedding regressions is ridge_scale * n.
  double ridge_scale = 0.01;
};

struct DirectionScore {
  double delta = 0.0;
  bool degenerate = false;
};

// Normalized HSIC between the U-indexed embeddings of p(cause | U) and
// p(effect | cause, U). Smaller values indicate the more plausible direction.
DirectionScore direction_score(const Matrix& cause, const Matrix& effect, const Matrix& surrogate,
                               const DirectionOptions& options = {});

}  // namespace causalmech
