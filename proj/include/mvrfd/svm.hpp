#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mvrfd/dissimilarity.hpp"
#include "mvrfd/matrix.hpp"

namespace mvrfd {

struct SmoOptions {
  double tolerance = 1e-3;        ///< stop when the maximal KKT violation drops below this
  std::size_t max_passes = 10000; ///< iteration cap is max_passes * n
  bool record_objective = false;  ///< keep the dual objective after every update
};

/// Solution of one binary soft-margin dual
///   max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
///   s.t. 0 <= alpha_i <= C,  sum_i alpha_i y_i = 0.
struct BinaryDualSolution {
  std::vector<double> alpha;
  double bias = 0.0;       ///< decision(x) = sum_i alpha_i y_i K(x_i, x) + bias
  double objective = 0.0;  ///< dual objective at the returned alpha
  double kkt_gap = 0.0;    ///< maximal violation at exit
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;
};

/// Sequential pairwise optimisation with maximal-violating-pair selection.
/// The kernel need not be positive semidefinite: a non-positive curvature
/// along the chosen pair is replaced by a tiny positive constant, which keeps
/// every step an ascent step and lets the box clip it.
/// `signs` holds +1 / -1 per instance.
BinaryDualSolution solve_binary_dual(const Matrix& kernel, std::span<const int> signs, double c,
                                     const SmoOptions& options = {});

/// Dual objective of `alpha` (the maximised quantity).
double dual_objective(const Matrix& kernel, std::span<const int> signs, std::span<const double> alpha);

/// One-vs-one multi-class SVM over a precomputed kernel.
struct SvmModel {
  std::size_t num_classes = 0;
  std::size_t training_size = 0;
  double c = 0.0;
  std::vector<std::pair<int, int>> class_pairs;  ///< (a, b) with a < b; positive decision votes a
  std::vector<std::vector<double>> dual_coefficients;  ///< per pair, alpha_i * y_i over all training instances
  std::vector<double> biases;
  std::vector<std::size_t> support_indices;  ///< training indices with a nonzero weight in any pair
  std::vector<double> objectives;
  std::vector<std::size_t> iterations;
  std::vector<bool> converged;

  /// Decision value of every subproblem for a test instance's kernel row.
  [[nodiscard]] std::vector<double> decision_values(std::span<const double> kernel_row) const;
  /// Majority vote over the subproblems; ties go to the lowest class id.
  [[nodiscard]] int predict(std::span<const double> kernel_row) const;

  friend bool operator==(const SvmModel&, const SvmModel&) = default;
};

/// Throws ConfigError unless the kernel is square, finite and symmetric.
void check_kernel(const Matrix& kernel);

SvmModel train_svm(const Matrix& kernel, std::span<const int> labels, double c, const SmoOptions& options = {});
SvmModel train_svm(const SimilarityMatrix& kernel, std::span<const int> labels, double c,
                   const SmoOptions& options = {});

int predict_svm(const SvmModel& model, std::span<const double> kernel_row);

struct KernelGrid {
  std::vector<double> c_values{0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};
  /// Throws ConfigError unless non-empty, positive and strictly increasing.
  void validate() const;
};

struct CSelection {
  double c = 0.0;
  std::vector<double> cv_accuracy;  ///< mean fold accuracy per grid value
  std::size_t folds = 0;
};

/// Stratified folds: 3 when every class has at least 3 members, else 2.
/// Members of each class are shuffled with `seed` and dealt round-robin.
std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::uint64_t seed, std::size_t& folds);

/// Grid value with the best mean cross-validated accuracy on the training
/// kernel; ties resolve to the smallest C.
CSelection select_c_detailed(const Matrix& kernel, std::span<const int> labels, const KernelGrid& grid,
                             std::uint64_t seed, const SmoOptions& options = {});
double select_c(const SimilarityMatrix& kernel, std::span<const int> labels, const KernelGrid& grid,
                std::uint64_t seed);

}  // namespace mvrfd
