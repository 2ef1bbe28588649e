#include "mvrfd/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/core.h>

#include "mvrfd/error.hpp"
#include "mvrfd/rng.hpp"

namespace mvrfd {
namespace {

constexpr double kTau = 1e-12;

// Internally the solver minimises f(a) = 1/2 a'Qa - e'a with Q_ij = y_i y_j K_ij,
// tracking the gradient G = Qa - e (libsvm convention).
double minimised_objective(std::span<const double> alpha, std::span<const double> gradient) {
  double f = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) f += alpha[i] * (gradient[i] - 1.0);
  return 0.5 * f;
}

bool in_up(double a, int y, double c) { return (y > 0 && a < c) || (y < 0 && a > 0); }
bool in_low(double a, int y, double c) { return (y < 0 && a < c) || (y > 0 && a > 0); }

Matrix submatrix(const Matrix& m, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = m(rows[i], cols[j]);
  return out;
}

}  // namespace

double dual_objective(const Matrix& kernel, std::span<const int> signs, std::span<const double> alpha) {
  double linear = 0.0;
  double quadratic = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    linear += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < alpha.size(); ++j)
      quadratic += alpha[i] * alpha[j] * signs[i] * signs[j] * kernel(i, j);
  }
  return linear - 0.5 * quadratic;
}

BinaryDualSolution solve_binary_dual(const Matrix& kernel, std::span<const int> signs, double c,
                                     const SmoOptions& options) {
  const auto n = signs.size();
  if (kernel.rows() != n || kernel.cols() != n)
    throw ShapeError(fmt::format("kernel is {}x{} for {} labels", kernel.rows(), kernel.cols(), n));
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError(fmt::format("C must be positive, got {}", c));
  for (int y : signs)
    if (y != 1 && y != -1) throw ConfigError("binary labels must be +1 or -1");

  BinaryDualSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> gradient(n, -1.0);
  auto& alpha = sol.alpha;
  const std::size_t cap = std::max<std::size_t>(1, options.max_passes) * std::max<std::size_t>(1, n);

  while (true) {
    std::size_t i = n, j = n;
    double up_max = -std::numeric_limits<double>::infinity();
    double low_min = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -signs[t] * gradient[t];
      if (in_up(alpha[t], signs[t], c) && v > up_max) {
        up_max = v;
        i = t;
      }
      if (in_low(alpha[t], signs[t], c) && v < low_min) {
        low_min = v;
        j = t;
      }
    }
    sol.kkt_gap = (i == n || j == n) ? 0.0 : up_max - low_min;
    if (i == n || j == n || sol.kkt_gap < options.tolerance) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= cap) break;
    ++sol.iterations;

    const double kii = kernel(i, i), kjj = kernel(j, j), kij = kernel(i, j);
    double curvature = kii + kjj - 2.0 * kij;
    if (curvature <= 0.0) curvature = kTau;
    const double old_i = alpha[i], old_j = alpha[j];

    if (signs[i] != signs[j]) {
      const double delta = (-gradient[i] - gradient[j]) / curvature;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) {
          alpha[j] = 0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = -diff;
      }
      if (diff > 0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      const double delta = (gradient[i] - gradient[j]) / curvature;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0) {
        alpha[j] = 0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0) {
        alpha[i] = 0;
        alpha[j] = sum;
      }
    }

    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < n; ++t)
      gradient[t] += signs[t] * (signs[i] * kernel(i, t) * di + signs[j] * kernel(j, t) * dj);
    if (options.record_objective) sol.objective_trace.push_back(-minimised_objective(alpha, gradient));
  }

  // Bias from free vectors, or the midpoint of the feasible interval.
  double upper = std::numeric_limits<double>::infinity();
  double lower = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = signs[t] * gradient[t];
    if (alpha[t] >= c) {
      if (signs[t] < 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else if (alpha[t] <= 0) {
      if (signs[t] > 0) upper = std::min(upper, yg);
      else lower = std::max(lower, yg);
    } else {
      free_sum += yg;
      ++free_count;
    }
  }
  double rho = 0.0;
  if (free_count > 0) rho = free_sum / static_cast<double>(free_count);
  else if (std::isfinite(upper) && std::isfinite(lower)) rho = (upper + lower) / 2.0;
  else if (std::isfinite(upper)) rho = upper;
  else if (std::isfinite(lower)) rho = lower;
  sol.bias = -rho;
  sol.objective = -minimised_objective(alpha, gradient);
  return sol;
}

void check_kernel(const Matrix& kernel) {
  if (kernel.rows() != kernel.cols())
    throw ConfigError(fmt::format("kernel must be square, got {}x{}", kernel.rows(), kernel.cols()));
  double scale = 0.0;
  for (double v : kernel.values()) {
    if (!std::isfinite(v)) throw ConfigError("kernel has non-finite entries");
    scale = std::max(scale, std::abs(v));
  }
  const double tolerance = 1e-12 * std::max(1.0, scale);
  for (std::size_t i = 0; i < kernel.rows(); ++i)
    for (std::size_t j = i + 1; j < kernel.cols(); ++j)
      if (std::abs(kernel(i, j) - kernel(j, i)) > tolerance)
        throw ConfigError(fmt::format("kernel is not symmetric at ({}, {})", i, j));
}

SvmModel train_svm(const Matrix& kernel, std::span<const int> labels, double c, const SmoOptions& options) {
  check_kernel(kernel);
  const auto n = labels.size();
  if (kernel.rows() != n) throw ShapeError(fmt::format("kernel is {}x{} for {} labels", kernel.rows(), kernel.cols(), n));
  int highest = -1;
  for (int y : labels) {
    if (y < 0) throw ConfigError("class labels must be non-negative");
    highest = std::max(highest, y);
  }
  const auto k = static_cast<std::size_t>(highest + 1);
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::vector<int> present;
  for (std::size_t cls = 0; cls < k; ++cls)
    if (!members[cls].empty()) present.push_back(static_cast<int>(cls));
  if (present.size() < 2) throw DataError("SVM training needs at least two classes");

  SvmModel model;
  model.num_classes = k;
  model.training_size = n;
  model.c = c;
  std::vector<bool> support(n, false);
  for (std::size_t a = 0; a < present.size(); ++a) {
    for (std::size_t b = a + 1; b < present.size(); ++b) {
      const auto& pos = members[static_cast<std::size_t>(present[a])];
      const auto& neg = members[static_cast<std::size_t>(present[b])];
      std::vector<std::size_t> idx(pos);
      idx.insert(idx.end(), neg.begin(), neg.end());
      std::sort(idx.begin(), idx.end());
      std::vector<int> signs(idx.size());
      for (std::size_t t = 0; t < idx.size(); ++t) signs[t] = labels[idx[t]] == present[a] ? 1 : -1;
      const auto sub = submatrix(kernel, idx, idx);
      auto sol = solve_binary_dual(sub, signs, c, options);

      std::vector<double> coef(n, 0.0);
      for (std::size_t t = 0; t < idx.size(); ++t) {
        coef[idx[t]] = sol.alpha[t] * signs[t];
        if (sol.alpha[t] != 0.0) support[idx[t]] = true;
      }
      model.class_pairs.emplace_back(present[a], present[b]);
      model.dual_coefficients.push_back(std::move(coef));
      model.biases.push_back(sol.bias);
      model.objectives.push_back(sol.objective);
      model.iterations.push_back(sol.iterations);
      model.converged.push_back(sol.converged);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (support[i]) model.support_indices.push_back(i);
  return model;
}

SvmModel train_svm(const SimilarityMatrix& kernel, std::span<const int> labels, double c, const SmoOptions& options) {
  if (!kernel.same_axes()) throw ConfigError("training kernel must be indexed by the same instances on both axes");
  return train_svm(kernel.values, labels, c, options);
}

std::vector<double> SvmModel::decision_values(std::span<const double> kernel_row) const {
  if (kernel_row.size() != training_size)
    throw ShapeError(fmt::format("kernel row has {} entries, model was trained on {}", kernel_row.size(), training_size));
  std::vector<double> out(class_pairs.size());
  for (std::size_t p = 0; p < class_pairs.size(); ++p) {
    double sum = biases[p];
    const auto& coef = dual_coefficients[p];
    for (std::size_t i = 0; i < training_size; ++i)
      if (coef[i] != 0.0) sum += coef[i] * kernel_row[i];
    out[p] = sum;
  }
  return out;
}

int SvmModel::predict(std::span<const double> kernel_row) const {
  const auto values = decision_values(kernel_row);
  std::vector<std::size_t> votes(num_classes, 0);
  for (std::size_t p = 0; p < class_pairs.size(); ++p)
    ++votes[static_cast<std::size_t>(values[p] > 0 ? class_pairs[p].first : class_pairs[p].second)];
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

int predict_svm(const SvmModel& model, std::span<const double> kernel_row) { return model.predict(kernel_row); }

void KernelGrid::validate() const {
  if (c_values.empty()) throw ConfigError("C grid is empty");
  for (std::size_t i = 0; i < c_values.size(); ++i) {
    if (!(c_values[i] > 0.0) || !std::isfinite(c_values[i])) throw ConfigError("C grid values must be positive");
    if (i > 0 && !(c_values[i] > c_values[i - 1])) throw ConfigError("C grid must be strictly increasing");
  }
}

std::vector<std::size_t> stratified_folds(std::span<const int> labels, std::uint64_t seed, std::size_t& folds) {
  int highest = -1;
  for (int y : labels) highest = std::max(highest, y);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(highest + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::size_t smallest = std::numeric_limits<std::size_t>::max();
  for (const auto& m : members)
    if (!m.empty()) smallest = std::min(smallest, m.size());
  if (smallest < 2) throw DataError("cross-validation needs at least 2 members per class");
  folds = smallest >= 3 ? 3 : 2;

  Rng rng(seed);
  std::vector<std::size_t> assignment(labels.size(), 0);
  for (auto& m : members) {
    rng.shuffle(std::span<std::size_t>(m));
    for (std::size_t t = 0; t < m.size(); ++t) assignment[m[t]] = t % folds;
  }
  return assignment;
}

CSelection select_c_detailed(const Matrix& kernel, std::span<const int> labels, const KernelGrid& grid,
                             std::uint64_t seed, const SmoOptions& options) {
  grid.validate();
  check_kernel(kernel);
  if (kernel.rows() != labels.size()) throw ShapeError("kernel and labels disagree on the training size");
  CSelection result;
  const auto assignment = stratified_folds(labels, seed, result.folds);

  std::vector<std::vector<std::size_t>> train_idx(result.folds), test_idx(result.folds);
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t f = 0; f < result.folds; ++f) (assignment[i] == f ? test_idx : train_idx)[f].push_back(i);

  result.cv_accuracy.assign(grid.c_values.size(), 0.0);
  for (std::size_t g = 0; g < grid.c_values.size(); ++g) {
    double total = 0.0;
    for (std::size_t f = 0; f < result.folds; ++f) {
      const auto sub = submatrix(kernel, train_idx[f], train_idx[f]);
      std::vector<int> sub_labels;
      for (auto i : train_idx[f]) sub_labels.push_back(labels[i]);
      const auto model = train_svm(sub, sub_labels, grid.c_values[g], options);
      std::size_t correct = 0;
      std::vector<double> row(train_idx[f].size());
      for (auto t : test_idx[f]) {
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = kernel(t, train_idx[f][j]);
        if (model.predict(row) == labels[t]) ++correct;
      }
      total += static_cast<double>(correct) / static_cast<double>(test_idx[f].size());
    }
    result.cv_accuracy[g] = total / static_cast<double>(result.folds);
  }
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.c_values.size(); ++g)
    if (result.cv_accuracy[g] > result.cv_accuracy[best]) best = g;
  result.c = grid.c_values[best];
  return result;
}

double select_c(const SimilarityMatrix& kernel, std::span<const int> labels, const KernelGrid& grid,
                std::uint64_t seed) {
  if (!kernel.same_axes()) throw ConfigError("training kernel must be indexed by the same instances on both axes");
  return select_c_detailed(kernel.values, labels, grid, seed).c;
}

}  // namespace mvrfd
