#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvrfd/matrix.hpp"

namespace mvrfd {

/// Number of candidate features drawn at each split.
struct Mtry {
  enum class Rule { Sqrt, Log2, All, Fixed };
  Rule rule = Rule::Sqrt;
  std::size_t fixed = 0;

  /// Resolved subset size for a p-feature space, always in [1, p].
  [[nodiscard]] std::size_t resolve(std::size_t p) const;
  friend bool operator==(const Mtry&, const Mtry&) = default;
};

struct ForestConfig {
  std::size_t num_trees = 500;
  Mtry mtry{};  ///< ceil(sqrt(p)) by default
  std::size_t min_samples_split = 2;
  std::optional<std::size_t> max_depth;  ///< unlimited when empty
  std::uint64_t seed = 0;
  unsigned jobs = 1;  ///< worker threads; results do not depend on it

  void validate() const;
};

/// Decision tree stored as a flat node array; node 0 is the root.
class Tree {
 public:
  struct Node {
    std::int32_t feature = -1;  ///< -1 marks a leaf
    double threshold = 0.0;     ///< x[feature] <= threshold goes left
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf_id = -1;  ///< leaves only

    [[nodiscard]] bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  Tree() = default;
  /// Validates the structure (contiguous leaf ids, children present, feature
  /// indices in range, non-empty leaf counts) and throws ConfigError if broken.
  Tree(std::vector<Node> nodes, std::vector<std::vector<std::uint32_t>> leaf_counts, std::size_t feature_space_width,
       std::size_t num_classes);

  /// A tree made of one leaf holding `counts`.
  static Tree single_leaf(std::vector<std::uint32_t> counts, std::size_t feature_space_width);
  /// A root split `x[feature] <= threshold` with two leaves (ids 0 left, 1 right).
  static Tree stump(std::size_t feature, double threshold, std::vector<std::uint32_t> left_counts,
                    std::vector<std::uint32_t> right_counts, std::size_t feature_space_width);

  /// Leaf reached by `x`; throws ShapeError when the width differs.
  [[nodiscard]] std::size_t leaf_index(std::span<const double> x) const;
  /// Same, without the width check.
  [[nodiscard]] std::size_t leaf_index_unchecked(std::span<const double> x) const noexcept;

  [[nodiscard]] std::size_t num_leaves() const noexcept { return leaf_counts_.size(); }
  [[nodiscard]] std::size_t feature_space_width() const noexcept { return width_; }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
  [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
  [[nodiscard]] std::span<const std::uint32_t> leaf_class_counts(std::size_t leaf) const { return leaf_counts_.at(leaf); }

  /// Bootstrap multiplicity of each training instance (empty for hand-built trees).
  [[nodiscard]] const std::vector<std::uint32_t>& bootstrap_counts() const noexcept { return bootstrap_; }
  void set_bootstrap_counts(std::vector<std::uint32_t> counts) { bootstrap_ = std::move(counts); }

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<Node> nodes_;
  std::vector<std::vector<std::uint32_t>> leaf_counts_;
  std::size_t width_ = 0;
  std::size_t num_classes_ = 0;
  std::vector<std::uint32_t> bootstrap_;
};

/// Grows one tree on `sample` (row indices into `features`, repeats allowed)
/// with Gini splits over `mtry` random candidate features per node.
Tree grow_tree(const Matrix& features, std::span<const int> labels, std::span<const std::size_t> sample,
               std::size_t num_classes, const ForestConfig& config, std::uint64_t seed);

class Forest {
 public:
  Forest() = default;
  Forest(std::vector<Tree> trees, std::size_t num_classes, std::size_t training_size);

  [[nodiscard]] std::size_t size() const noexcept { return trees_.size(); }
  [[nodiscard]] const std::vector<Tree>& trees() const noexcept { return trees_; }
  [[nodiscard]] const Tree& tree(std::size_t k) const { return trees_.at(k); }
  [[nodiscard]] std::size_t num_classes() const noexcept { return num_classes_; }
  [[nodiscard]] std::size_t training_size() const noexcept { return training_size_; }
  [[nodiscard]] std::size_t feature_space_width() const noexcept {
    return trees_.empty() ? 0 : trees_.front().feature_space_width();
  }

  /// Sum over trees of the reached leaf's class proportions.
  [[nodiscard]] std::vector<double> class_scores(std::span<const double> x) const;
  /// Highest summed proportion; ties go to the lowest class id.
  [[nodiscard]] int predict(std::span<const double> x) const;
  [[nodiscard]] std::vector<int> predict(const Matrix& rows) const;

  /// Versioned text format; thresholds are written in hex so reload is exact.
  void save(std::ostream& out) const;
  static Forest load(std::istream& in);

  friend bool operator==(const Forest&, const Forest&) = default;

 private:
  std::vector<Tree> trees_;
  std::size_t num_classes_ = 0;
  std::size_t training_size_ = 0;
};

/// Bagged forest: tree k sees N bootstrap draws from a generator seeded with
/// derive_seed(config.seed, k), so the result is independent of config.jobs.
/// `num_classes` defaults to max(label) + 1.
Forest train_forest(const Matrix& features, std::span<const int> labels, const ForestConfig& config,
                    std::optional<std::size_t> num_classes = std::nullopt);

}  // namespace mvrfd
