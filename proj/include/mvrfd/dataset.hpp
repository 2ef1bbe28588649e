#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvrfd/matrix.hpp"

namespace mvrfd {

/// One group of features describing every instance of a dataset.
struct View {
  std::string name;
  Matrix features;  ///< N rows, one column per feature
  std::vector<std::string> feature_names;

  [[nodiscard]] std::size_t width() const noexcept { return features.cols(); }
  friend bool operator==(const View&, const View&) = default;
};

/// N labeled instances described by Q views. Immutable once loaded.
struct MultiViewDataset {
  std::string name;
  std::vector<View> views;
  std::vector<int> labels;               ///< dense class ids in [0, class_names.size())
  std::vector<std::string> class_names;  ///< original label text, indexed by class id

  [[nodiscard]] std::size_t num_instances() const noexcept { return labels.size(); }
  [[nodiscard]] std::size_t num_views() const noexcept { return views.size(); }
  [[nodiscard]] std::size_t num_classes() const noexcept { return class_names.size(); }
  [[nodiscard]] std::size_t total_features() const noexcept;
  [[nodiscard]] std::vector<std::size_t> class_histogram() const;

  /// Every violated invariant as a human-readable line; empty when valid.
  [[nodiscard]] std::vector<std::string> violations() const;
  /// Throws DataError listing the violations.
  void validate() const;

  friend bool operator==(const MultiViewDataset&, const MultiViewDataset&) = default;
};

/// Parses a manifest:
///
///     # comment
///     name = LSVT
///     labels = labels.csv
///     view.acoustic = acoustic.csv
///
/// Paths are relative to the manifest's directory. View order is manifest order.
MultiViewDataset load_dataset(const std::filesystem::path& manifest_path);

/// Like load_dataset, but collects every problem instead of stopping at the
/// first one. Returns the dataset only if there were none.
struct LoadReport {
  std::vector<std::string> errors;
  std::optional<MultiViewDataset> dataset;
};
LoadReport inspect_dataset(const std::filesystem::path& manifest_path);

/// Writes `<dir>/<file_stem>.manifest` plus one CSV per view and `labels.csv`.
/// Returns the manifest path. Values are written in shortest round-trip form.
std::filesystem::path write_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir,
                                    const std::string& file_stem = "dataset");

/// Early-integration view: columns of every view side by side, in view order.
View concatenate_views(const MultiViewDataset& ds);

/// Labels of the instances listed in `indices`.
std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const std::size_t> indices);

struct Split {
  std::vector<std::size_t> train;  ///< sorted ascending
  std::vector<std::size_t> test;   ///< sorted ascending
  friend bool operator==(const Split&, const Split&) = default;
};

struct SplitPlan {
  std::vector<Split> repetitions;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;
  friend bool operator==(const SplitPlan&, const SplitPlan&) = default;
};

/// Per-class train quota for a stratified split. Each class gets
/// round(fraction * count) clamped to [1, count - 1]; the largest classes are
/// then nudged by one until the total equals round(fraction * N) (or no
/// class can move without breaking the clamp).
std::vector<std::size_t> stratified_train_counts(const std::vector<std::size_t>& class_sizes, double train_fraction);

/// Stratified repeated random splitting. Repetition r draws from a generator
/// seeded with derive_seed(seed, r).
SplitPlan make_split_plan(const MultiViewDataset& ds, std::size_t repetitions, double train_fraction,
                          std::uint64_t seed);

/// CSV with columns repetition,instance_index,role.
void write_split_plan(const SplitPlan& plan, const std::filesystem::path& path);

}  // namespace mvrfd
