#include "mvrfd/dissimilarity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "mvrfd/csv.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/parallel.hpp"

namespace mvrfd {
namespace {

std::vector<std::size_t> default_ids(std::vector<std::size_t> ids, std::size_t n, const char* axis) {
  if (ids.empty()) {
    ids.resize(n);
    std::iota(ids.begin(), ids.end(), 0);
  } else if (ids.size() != n) {
    throw ShapeError(fmt::format("{} ids: got {}, expected {}", axis, ids.size(), n));
  }
  return ids;
}

void check_width(const Forest& forest, const Matrix& m, const char* what) {
  if (m.cols() != forest.feature_space_width())
    throw ShapeError(fmt::format("{} have {} features, forest expects {}", what, m.cols(), forest.feature_space_width()));
}

}  // namespace

LeafTable leaf_table(const Forest& forest, const Matrix& instances, unsigned jobs) {
  check_width(forest, instances, "instances");
  LeafTable table(forest.size(), instances.rows());
  parallel_for(forest.size(), jobs, [&](std::size_t k) {
    const auto& tree = forest.tree(k);
    for (std::size_t i = 0; i < instances.rows(); ++i)
      table(k, i) = static_cast<std::uint32_t>(tree.leaf_index_unchecked(instances.row(i)));
  });
  return table;
}

int tree_dissimilarity(const Tree& tree, std::span<const double> a, std::span<const double> b) {
  return tree.leaf_index(a) == tree.leaf_index(b) ? 0 : 1;
}

double forest_dissimilarity(const Forest& forest, std::span<const double> a, std::span<const double> b) {
  std::size_t separated = 0;
  for (const auto& tree : forest.trees()) separated += static_cast<std::size_t>(tree_dissimilarity(tree, a, b));
  return static_cast<double>(separated) / static_cast<double>(forest.size());
}

DissimilarityMatrix build_matrix(const LeafTable& rows, const LeafTable& columns, std::vector<std::size_t> row_ids,
                                 std::vector<std::size_t> column_ids, unsigned jobs) {
  if (rows.trees() != columns.trees() || rows.trees() == 0)
    throw ShapeError("leaf tables must come from the same non-empty forest");
  const auto m = rows.trees();
  const auto r = rows.instances();
  const auto c = columns.instances();

  // Trees are split into contiguous chunks; each chunk owns a count buffer and
  // the integer buffers are merged afterwards, so any schedule gives the same sums.
  const auto chunks = std::clamp<std::size_t>(jobs, 1, m);
  std::vector<std::vector<std::uint32_t>> partial(chunks, std::vector<std::uint32_t>(r * c, 0));
  parallel_for(chunks, jobs, [&](std::size_t chunk) {
    auto& same = partial[chunk];
    std::vector<std::vector<std::uint32_t>> by_leaf;
    for (auto k = chunk * m / chunks; k < (chunk + 1) * m / chunks; ++k) {
      const auto col_leaves = columns.tree_row(k);
      const auto row_leaves = rows.tree_row(k);
      std::uint32_t max_leaf = 0;
      for (auto l : col_leaves) max_leaf = std::max(max_leaf, l);
      for (auto l : row_leaves) max_leaf = std::max(max_leaf, l);
      by_leaf.assign(max_leaf + 1, {});
      for (std::size_t j = 0; j < c; ++j) by_leaf[col_leaves[j]].push_back(static_cast<std::uint32_t>(j));
      for (std::size_t i = 0; i < r; ++i)
        for (auto j : by_leaf[row_leaves[i]]) ++same[i * c + j];
    }
  });
  for (std::size_t chunk = 1; chunk < chunks; ++chunk)
    for (std::size_t e = 0; e < r * c; ++e) partial[0][e] += partial[chunk][e];

  DissimilarityMatrix d;
  d.values = Matrix(r, c);
  const auto trees = static_cast<double>(m);
  auto out = d.values.values();
  for (std::size_t e = 0; e < r * c; ++e) out[e] = static_cast<double>(m - partial[0][e]) / trees;
  d.row_instances = default_ids(std::move(row_ids), r, "row");
  d.column_instances = default_ids(std::move(column_ids), c, "column");
  return d;
}

DissimilarityMatrix build_matrix(const Forest& forest, const Matrix& rows, const Matrix& columns,
                                 std::vector<std::size_t> row_ids, std::vector<std::size_t> column_ids, unsigned jobs) {
  check_width(forest, rows, "row instances");
  check_width(forest, columns, "column instances");
  return build_matrix(leaf_table(forest, rows, jobs), leaf_table(forest, columns, jobs), std::move(row_ids),
                      std::move(column_ids), jobs);
}

DissimilarityMatrix joint_average(std::span<const DissimilarityMatrix> matrices) {
  if (matrices.empty()) throw ShapeError("joint average of an empty list");
  const auto& first = matrices.front();
  for (const auto& m : matrices) {
    if (m.values.rows() != first.values.rows() || m.values.cols() != first.values.cols())
      throw ShapeError(fmt::format("matrix shape {}x{} differs from {}x{}", m.values.rows(), m.values.cols(),
                                   first.values.rows(), first.values.cols()));
    if (m.row_instances != first.row_instances || m.column_instances != first.column_instances)
      throw ShapeError("matrices describe different instances");
  }
  DissimilarityMatrix joint = first;
  auto out = joint.values.values();
  for (std::size_t q = 1; q < matrices.size(); ++q) {
    const auto in = matrices[q].values.values();
    for (std::size_t e = 0; e < out.size(); ++e) out[e] += in[e];
  }
  const auto q = static_cast<double>(matrices.size());
  if (matrices.size() > 1)
    for (auto& v : out) v /= q;
  return joint;
}

SimilarityMatrix to_similarity(const DissimilarityMatrix& d) {
  SimilarityMatrix s{d.values, d.row_instances, d.column_instances};
  for (auto& v : s.values.values()) v = 1.0 - v;
  return s;
}

DissimilarityMatrix to_dissimilarity(const SimilarityMatrix& s) {
  DissimilarityMatrix d{s.values, s.row_instances, s.column_instances};
  for (auto& v : d.values.values()) v = 1.0 - v;
  return d;
}

std::vector<std::string> check_dissimilarity(const DissimilarityMatrix& d, std::optional<std::size_t> grid_denominator) {
  std::vector<std::string> problems;
  const auto& v = d.values;
  if (d.row_instances.size() != v.rows() || d.column_instances.size() != v.cols())
    problems.emplace_back("axis ids do not match the matrix shape");
  for (std::size_t i = 0; i < v.rows(); ++i) {
    for (std::size_t j = 0; j < v.cols(); ++j) {
      const double x = v(i, j);
      if (!(x >= 0.0 && x <= 1.0)) problems.push_back(fmt::format("entry ({}, {}) = {} outside [0, 1]", i, j, x));
      if (grid_denominator) {
        const double scaled = x * static_cast<double>(*grid_denominator);
        if (std::abs(scaled - std::round(scaled)) > 1e-9)
          problems.push_back(fmt::format("entry ({}, {}) = {} is not a multiple of 1/{}", i, j, x, *grid_denominator));
      }
    }
  }
  if (d.same_axes() && v.rows() == v.cols()) {
    for (std::size_t i = 0; i < v.rows(); ++i) {
      if (v(i, i) != 0.0) problems.push_back(fmt::format("diagonal entry {} = {} is not zero", i, v(i, i)));
      for (std::size_t j = i + 1; j < v.cols(); ++j)
        if (v(i, j) != v(j, i)) problems.push_back(fmt::format("entries ({0}, {1}) and ({1}, {0}) differ", i, j));
    }
  }
  return problems;
}

void write_matrix_csv(const Matrix& values, std::span<const std::size_t> row_ids,
                      std::span<const std::size_t> column_ids, const std::filesystem::path& path) {
  if (row_ids.size() != values.rows() || column_ids.size() != values.cols())
    throw ShapeError("axis ids do not match the matrix shape");
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << "instance";
  for (auto id : column_ids) out << ',' << id;
  out << '\n';
  for (std::size_t i = 0; i < values.rows(); ++i) {
    out << row_ids[i];
    for (double x : values.row(i)) out << ',' << csv::format_double(x);
    out << '\n';
  }
}

DissimilarityMatrix read_dissimilarity_csv(const std::filesystem::path& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty() || rows.front().empty() || rows.front().front() != "instance")
    throw DataError(fmt::format("'{}' is not a matrix CSV", path.string()));
  auto parse_id = [&](const std::string& text, std::string_view where) {
    const double v = csv::parse_double(text, where);
    if (v < 0 || v != std::floor(v)) throw DataError(fmt::format("bad instance id '{}' at {}", text, where));
    return static_cast<std::size_t>(v);
  };
  DissimilarityMatrix d;
  const auto& header = rows.front();
  for (std::size_t j = 1; j < header.size(); ++j) d.column_instances.push_back(parse_id(header[j], "header"));
  d.values = Matrix(rows.size() - 1, d.column_instances.size());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != header.size()) throw DataError(fmt::format("row {} of '{}' has the wrong width", i, path.string()));
    d.row_instances.push_back(parse_id(row[0], fmt::format("row {}", i)));
    for (std::size_t j = 1; j < row.size(); ++j)
      d.values(i - 1, j - 1) = csv::parse_double(row[j], fmt::format("row {}, column {}", i, j));
  }
  return d;
}

}  // namespace mvrfd
