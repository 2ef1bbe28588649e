#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mvrfd/dataset.hpp"
#include "mvrfd/dissimilarity.hpp"
#include "mvrfd/feature_selection.hpp"
#include "mvrfd/forest.hpp"
#include "mvrfd/svm.hpp"

namespace mvrfd {

enum class MethodId { RelfRf, SvmrfeRf, Rfsvm, Rfdis, LateRf, LateRfdis };

inline constexpr std::array<MethodId, 6> kAllMethods{MethodId::RelfRf, MethodId::SvmrfeRf, MethodId::Rfsvm,
                                                     MethodId::Rfdis,  MethodId::LateRf,   MethodId::LateRfdis};

/// Command-line key: relf_rf, svmrfe_rf, rfsvm, rfdis, late_rf, late_rfdis.
std::string_view method_key(MethodId method);
/// Table label: RELF+RF, SVMRFE+RF, RFSVM, RFDIS, LateRF, LateRFDIS.
std::string_view method_label(MethodId method);
/// Accepts keys or labels, case-insensitively. Throws ConfigError.
MethodId parse_method(std::string_view text);
/// Comma-separated list, or "all".
std::vector<MethodId> parse_method_list(std::string_view text);

struct PipelineConfig {
  ForestConfig forest;  ///< shared by every forest; its seed is replaced per forest
  KernelGrid c_grid;
  std::size_t relief_neighbors = 10;
  double rfe_c = 1.0;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
};

struct PipelineResult {
  MethodId method = MethodId::Rfsvm;
  std::vector<std::size_t> test_indices;
  std::vector<int> true_labels;
  std::vector<int> predictions;
  double accuracy = 0.0;

  std::optional<double> chosen_c;
  std::vector<double> cv_accuracy;
  std::optional<std::size_t> selected_count;
  std::vector<std::size_t> selected_features;  ///< indices into the concatenated view
  std::vector<std::vector<int>> view_predictions;  ///< late integration: per view, per test instance
  std::size_t representation_width = 0;  ///< width of the table the final classifier saw
  bool reused_view_forests = false;
  std::uint64_t joint_checksum = 0;      ///< hash of the joint train x train matrix when used
  std::uint64_t model_fingerprint = 0;   ///< hash of every trained parameter
};

/// Per-split state shared by the methods that need per-view forests and
/// their dissimilarity matrices. Everything is computed lazily from the
/// training rows only, then cached.
class SplitWorkspace {
 public:
  SplitWorkspace(const MultiViewDataset& ds, const Split& split, const PipelineConfig& config);

  [[nodiscard]] const MultiViewDataset& dataset() const noexcept { return ds_; }
  [[nodiscard]] const Split& split() const noexcept { return split_; }
  [[nodiscard]] const PipelineConfig& config() const noexcept { return config_; }
  [[nodiscard]] const std::vector<int>& train_labels() const noexcept { return train_labels_; }

  [[nodiscard]] const Forest& view_forest(std::size_t view);
  [[nodiscard]] const DissimilarityMatrix& train_dissimilarity(std::size_t view);
  [[nodiscard]] const DissimilarityMatrix& test_dissimilarity(std::size_t view);
  [[nodiscard]] const DissimilarityMatrix& joint_train();
  [[nodiscard]] const DissimilarityMatrix& joint_test();

  /// Number of method runs that found the per-view forests already trained.
  [[nodiscard]] std::size_t forest_reuse_count() const noexcept { return reuse_count_; }
  /// Marks the start of a method run that needs the per-view forests; returns
  /// true when they were already built by an earlier method.
  bool acquire_view_forests();

 private:
  void ensure_views();

  const MultiViewDataset& ds_;
  Split split_;
  PipelineConfig config_;
  std::vector<int> train_labels_;
  bool built_ = false;
  std::size_t reuse_count_ = 0;
  std::vector<Forest> forests_;
  std::vector<DissimilarityMatrix> train_d_;
  std::vector<DissimilarityMatrix> test_d_;
  std::optional<DissimilarityMatrix> joint_train_;
  std::optional<DissimilarityMatrix> joint_test_;
};

/// Seed used for the forest trained on `view` inside a split workspace.
std::uint64_t view_forest_seed(std::uint64_t seed, std::size_t view);

PipelineResult run_relf_rf(const MultiViewDataset& ds, const Split& split, const PipelineConfig& config);
PipelineResult run_svmrfe_rf(const MultiViewDataset& ds, const Split& split, const PipelineConfig& config);
PipelineResult run_rfsvm(SplitWorkspace& workspace);
PipelineResult run_rfdis(SplitWorkspace& workspace);
PipelineResult run_late_rf(SplitWorkspace& workspace);
PipelineResult run_late_rfdis(SplitWorkspace& workspace);

/// Dispatches to the method; the intermediate and late methods share `workspace`.
PipelineResult run_method(MethodId method, SplitWorkspace& workspace);
/// Convenience overload with a private workspace.
PipelineResult run_method(MethodId method, const MultiViewDataset& ds, const Split& split,
                          const PipelineConfig& config);

/// Plurality vote per instance; ties go to the lowest class id.
std::vector<int> plurality_vote(const std::vector<std::vector<int>>& votes, std::size_t num_classes);

/// FNV-1a, used to fingerprint trained models.
class Fingerprint {
 public:
  void add_bytes(const void* data, std::size_t size) noexcept;
  void add(double v) noexcept { add_bytes(&v, sizeof v); }
  void add(std::uint64_t v) noexcept { add_bytes(&v, sizeof v); }
  void add(std::string_view s) noexcept { add_bytes(s.data(), s.size()); }
  void add(const Forest& forest);
  void add(const Matrix& m) noexcept;
  void add(const SvmModel& model) noexcept;
  [[nodiscard]] std::uint64_t value() const noexcept { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

}  // namespace mvrfd
