#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvrfd/forest.hpp"
#include "mvrfd/matrix.hpp"

namespace mvrfd {

/// Pairwise dissimilarities in [0, 1]. Rows and columns each carry the
/// instance ids they describe; a train x train matrix has equal axes.
struct DissimilarityMatrix {
  Matrix values;
  std::vector<std::size_t> row_instances;
  std::vector<std::size_t> column_instances;

  [[nodiscard]] bool same_axes() const noexcept { return row_instances == column_instances; }
  friend bool operator==(const DissimilarityMatrix&, const DissimilarityMatrix&) = default;
};

/// Entrywise 1 - dissimilarity, same axes.
struct SimilarityMatrix {
  Matrix values;
  std::vector<std::size_t> row_instances;
  std::vector<std::size_t> column_instances;

  [[nodiscard]] bool same_axes() const noexcept { return row_instances == column_instances; }
  friend bool operator==(const SimilarityMatrix&, const SimilarityMatrix&) = default;
};

/// Leaf reached by each instance in each tree: entry (k, i) is l_k(x_i).
class LeafTable {
 public:
  LeafTable() = default;
  LeafTable(std::size_t trees, std::size_t instances) : trees_(trees), instances_(instances), ids_(trees * instances) {}

  [[nodiscard]] std::size_t trees() const noexcept { return trees_; }
  [[nodiscard]] std::size_t instances() const noexcept { return instances_; }
  [[nodiscard]] std::uint32_t operator()(std::size_t tree, std::size_t instance) const noexcept {
    return ids_[tree * instances_ + instance];
  }
  std::uint32_t& operator()(std::size_t tree, std::size_t instance) noexcept { return ids_[tree * instances_ + instance]; }
  [[nodiscard]] std::span<const std::uint32_t> tree_row(std::size_t tree) const noexcept {
    return {ids_.data() + tree * instances_, instances_};
  }

 private:
  std::size_t trees_ = 0;
  std::size_t instances_ = 0;
  std::vector<std::uint32_t> ids_;
};

/// One descent per (tree, instance); throws ShapeError on a width mismatch.
LeafTable leaf_table(const Forest& forest, const Matrix& instances, unsigned jobs = 1);

/// 0 when both instances reach the same leaf of `tree`, else 1.
int tree_dissimilarity(const Tree& tree, std::span<const double> a, std::span<const double> b);

/// Fraction of the forest's trees that separate the two instances.
double forest_dissimilarity(const Forest& forest, std::span<const double> a, std::span<const double> b);

/// Entry (i, j) = forest_dissimilarity(rows_i, columns_j). Work is organised
/// per tree with integer same-leaf counts, so the result does not depend on
/// `jobs`. Axis ids default to 0..n-1.
DissimilarityMatrix build_matrix(const Forest& forest, const Matrix& rows, const Matrix& columns,
                                 std::vector<std::size_t> row_ids = {}, std::vector<std::size_t> column_ids = {},
                                 unsigned jobs = 1);

/// Same computation from precomputed leaf tables of one forest.
DissimilarityMatrix build_matrix(const LeafTable& rows, const LeafTable& columns, std::vector<std::size_t> row_ids = {},
                                 std::vector<std::size_t> column_ids = {}, unsigned jobs = 1);

/// Entrywise mean of per-view matrices sharing axes and shape.
DissimilarityMatrix joint_average(std::span<const DissimilarityMatrix> matrices);

SimilarityMatrix to_similarity(const DissimilarityMatrix& d);
DissimilarityMatrix to_dissimilarity(const SimilarityMatrix& s);

/// Range, and when `same_axes()`: symmetry and zero diagonal; when
/// `grid_denominator` is set, every entry must be a multiple of 1/denominator.
/// Returns every violation found (empty means valid).
std::vector<std::string> check_dissimilarity(const DissimilarityMatrix& d,
                                             std::optional<std::size_t> grid_denominator = std::nullopt);

/// CSV with a header of column instance ids and a leading row-id column.
void write_matrix_csv(const Matrix& values, std::span<const std::size_t> row_ids,
                      std::span<const std::size_t> column_ids, const std::filesystem::path& path);
DissimilarityMatrix read_dissimilarity_csv(const std::filesystem::path& path);

}  // namespace mvrfd
