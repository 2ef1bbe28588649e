#include "mvrfd/forest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/core.h>

#include "mvrfd/error.hpp"
#include "mvrfd/parallel.hpp"
#include "mvrfd/rng.hpp"

namespace mvrfd {
namespace {

__extension__ using u128 = unsigned __int128;

/// Weighted-Gini split quality kept as an exact fraction:
/// (sum_c L_c^2 / nL + sum_c R_c^2 / nR) = numerator / denominator.
/// Larger is better (lower weighted impurity).
struct SplitScore {
  u128 numerator = 0;
  u128 denominator = 1;
  [[nodiscard]] bool better_than(const SplitScore& other) const {
    return numerator * other.denominator > other.numerator * denominator;
  }
};

struct Candidate {
  std::int32_t feature = -1;
  double threshold = 0.0;
  SplitScore score;
};

class TreeGrower {
 public:
  TreeGrower(const Matrix& features, std::span<const int> labels, std::size_t num_classes, const ForestConfig& config,
             std::uint64_t seed)
      : features_(features),
        labels_(labels),
        num_classes_(num_classes),
        config_(config),
        mtry_(config.mtry.resolve(features.cols())),
        rng_(seed),
        feature_pool_(features.cols()) {
    std::iota(feature_pool_.begin(), feature_pool_.end(), 0);
  }

  Tree grow(std::vector<std::size_t> sample) {
    samples_ = std::move(sample);
    build(0, samples_.size(), 0);
    return Tree(std::move(nodes_), std::move(leaf_counts_), features_.cols(), num_classes_);
  }

 private:
  std::vector<std::uint32_t> count_classes(std::size_t begin, std::size_t end) const {
    std::vector<std::uint32_t> counts(num_classes_, 0);
    for (auto i = begin; i < end; ++i) ++counts[static_cast<std::size_t>(labels_[samples_[i]])];
    return counts;
  }

  std::int32_t make_leaf(std::vector<std::uint32_t> counts) {
    Tree::Node node;
    node.leaf_id = static_cast<std::int32_t>(leaf_counts_.size());
    leaf_counts_.push_back(std::move(counts));
    nodes_.push_back(node);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  /// Best threshold on one feature, or nothing when every split leaves a side empty.
  std::optional<Candidate> best_threshold(std::size_t feature, std::size_t begin, std::size_t end,
                                          const std::vector<std::uint32_t>& parent_counts) {
    const auto n = end - begin;
    sorted_.clear();
    for (auto i = begin; i < end; ++i) {
      const auto row = samples_[i];
      sorted_.emplace_back(features_(row, feature), labels_[row]);
    }
    std::sort(sorted_.begin(), sorted_.end());
    if (sorted_.front().first == sorted_.back().first) return std::nullopt;

    left_.assign(num_classes_, 0);
    right_.assign(parent_counts.begin(), parent_counts.end());
    std::uint64_t left_sq = 0;
    std::uint64_t right_sq = 0;
    for (auto c : right_) right_sq += static_cast<std::uint64_t>(c) * c;

    std::optional<Candidate> best;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto c = static_cast<std::size_t>(sorted_[i].second);
      left_sq += 2 * static_cast<std::uint64_t>(left_[c]) + 1;
      ++left_[c];
      right_sq -= 2 * static_cast<std::uint64_t>(right_[c]) - 1;
      --right_[c];
      const double here = sorted_[i].first;
      const double next = sorted_[i + 1].first;
      if (here == next) continue;
      const std::uint64_t n_left = i + 1;
      const std::uint64_t n_right = n - n_left;
      SplitScore score{u128(left_sq) * n_right + u128(right_sq) * n_left, u128(n_left) * n_right};
      if (!best || score.better_than(best->score)) {
        double threshold = here + (next - here) / 2.0;
        if (!(threshold >= here && threshold < next)) threshold = here;
        best = Candidate{static_cast<std::int32_t>(feature), threshold, score};
      }
    }
    return best;
  }

  std::optional<Candidate> find_split(std::size_t begin, std::size_t end, const std::vector<std::uint32_t>& counts) {
    const auto n = static_cast<std::uint64_t>(end - begin);
    u128 parent_sq = 0;
    for (auto c : counts) parent_sq += u128(c) * c;
    const SplitScore parent{parent_sq, n};

    for (int attempt = 0; attempt < 2; ++attempt) {
      // Partial Fisher-Yates over the persistent pool draws mtry distinct features.
      const auto p = feature_pool_.size();
      std::optional<Candidate> best;
      for (std::size_t k = 0; k < mtry_; ++k) {
        const auto j = k + static_cast<std::size_t>(rng_.uniform_index(p - k));
        std::swap(feature_pool_[k], feature_pool_[j]);
        auto candidate = best_threshold(feature_pool_[k], begin, end, counts);
        if (candidate && (!best || candidate->score.better_than(best->score))) best = candidate;
      }
      if (best && best->score.better_than(parent)) return best;
    }
    return std::nullopt;
  }

  std::int32_t build(std::size_t begin, std::size_t end, std::size_t depth) {
    auto counts = count_classes(begin, end);
    const auto n = end - begin;
    const auto non_empty = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; });
    const bool depth_reached = config_.max_depth && depth >= *config_.max_depth;
    if (non_empty <= 1 || n < config_.min_samples_split || depth_reached) return make_leaf(std::move(counts));

    const auto split = find_split(begin, end, counts);
    if (!split) return make_leaf(std::move(counts));

    const auto feature = static_cast<std::size_t>(split->feature);
    const auto threshold = split->threshold;
    const auto middle = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                       [&](std::size_t row) { return features_(row, feature) <= threshold; });
    const auto mid = static_cast<std::size_t>(middle - samples_.begin());

    const auto index = static_cast<std::int32_t>(nodes_.size());
    Tree::Node node;
    node.feature = split->feature;
    node.threshold = threshold;
    nodes_.push_back(node);
    const auto left = build(begin, mid, depth + 1);
    const auto right = build(mid, end, depth + 1);
    nodes_[static_cast<std::size_t>(index)].left = left;
    nodes_[static_cast<std::size_t>(index)].right = right;
    return index;
  }

  const Matrix& features_;
  std::span<const int> labels_;
  std::size_t num_classes_;
  const ForestConfig& config_;
  std::size_t mtry_;
  Rng rng_;
  std::vector<std::size_t> feature_pool_;
  std::vector<std::size_t> samples_;
  std::vector<Tree::Node> nodes_;
  std::vector<std::vector<std::uint32_t>> leaf_counts_;
  std::vector<std::pair<double, int>> sorted_;
  std::vector<std::uint32_t> left_;
  std::vector<std::uint32_t> right_;
};

std::size_t infer_num_classes(std::span<const int> labels) {
  int highest = -1;
  for (int y : labels) {
    if (y < 0) throw ConfigError(fmt::format("negative class label {}", y));
    highest = std::max(highest, y);
  }
  return static_cast<std::size_t>(highest + 1);
}

}  // namespace

std::size_t Mtry::resolve(std::size_t p) const {
  if (p == 0) return 0;
  std::size_t m = p;
  switch (rule) {
    case Rule::Sqrt:
      m = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(p))));
      break;
    case Rule::Log2:
      m = static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(p))));
      break;
    case Rule::All:
      m = p;
      break;
    case Rule::Fixed:
      m = fixed;
      break;
  }
  return std::clamp<std::size_t>(m, 1, p);
}

void ForestConfig::validate() const {
  if (num_trees < 1) throw ConfigError("num_trees must be at least 1");
  if (min_samples_split < 2) throw ConfigError("min_samples_split must be at least 2");
  if (mtry.rule == Mtry::Rule::Fixed && mtry.fixed < 1) throw ConfigError("fixed mtry must be at least 1");
}

Tree::Tree(std::vector<Node> nodes, std::vector<std::vector<std::uint32_t>> leaf_counts,
           std::size_t feature_space_width, std::size_t num_classes)
    : nodes_(std::move(nodes)), leaf_counts_(std::move(leaf_counts)), width_(feature_space_width), num_classes_(num_classes) {
  if (nodes_.empty()) throw ConfigError("tree has no nodes");
  std::vector<bool> leaf_seen(leaf_counts_.size(), false);
  for (const auto& node : nodes_) {
    if (node.is_leaf()) {
      if (node.leaf_id < 0 || static_cast<std::size_t>(node.leaf_id) >= leaf_counts_.size() ||
          leaf_seen[static_cast<std::size_t>(node.leaf_id)])
        throw ConfigError("leaf ids must be unique and contiguous from 0");
      leaf_seen[static_cast<std::size_t>(node.leaf_id)] = true;
    } else {
      if (static_cast<std::size_t>(node.feature) >= width_) throw ConfigError("split feature outside feature space");
      const auto n = static_cast<std::int32_t>(nodes_.size());
      if (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n)
        throw ConfigError("internal node is missing a child");
    }
  }
  if (!std::all_of(leaf_seen.begin(), leaf_seen.end(), [](bool b) { return b; }))
    throw ConfigError("leaf ids must be unique and contiguous from 0");
  for (const auto& counts : leaf_counts_) {
    if (counts.size() != num_classes_) throw ConfigError("leaf class counts have the wrong length");
    if (std::accumulate(counts.begin(), counts.end(), std::uint64_t{0}) == 0) throw ConfigError("empty leaf");
  }
}

Tree Tree::single_leaf(std::vector<std::uint32_t> counts, std::size_t feature_space_width) {
  const auto k = counts.size();
  Node leaf;
  leaf.leaf_id = 0;
  return Tree({leaf}, {std::move(counts)}, feature_space_width, k);
}

Tree Tree::stump(std::size_t feature, double threshold, std::vector<std::uint32_t> left_counts,
                 std::vector<std::uint32_t> right_counts, std::size_t feature_space_width) {
  const auto k = left_counts.size();
  Node root{static_cast<std::int32_t>(feature), threshold, 1, 2, -1};
  Node left;
  left.leaf_id = 0;
  Node right;
  right.leaf_id = 1;
  return Tree({root, left, right}, {std::move(left_counts), std::move(right_counts)}, feature_space_width, k);
}

std::size_t Tree::leaf_index(std::span<const double> x) const {
  if (x.size() != width_)
    throw ShapeError(fmt::format("instance has {} features, tree expects {}", x.size(), width_));
  return leaf_index_unchecked(x);
}

std::size_t Tree::leaf_index_unchecked(std::span<const double> x) const noexcept {
  std::size_t at = 0;
  while (!nodes_[at].is_leaf()) {
    const auto& node = nodes_[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return static_cast<std::size_t>(nodes_[at].leaf_id);
}

Tree grow_tree(const Matrix& features, std::span<const int> labels, std::span<const std::size_t> sample,
               std::size_t num_classes, const ForestConfig& config, std::uint64_t seed) {
  if (sample.empty()) throw ConfigError("cannot grow a tree on an empty sample");
  TreeGrower grower(features, labels, num_classes, config, seed);
  return grower.grow(std::vector<std::size_t>(sample.begin(), sample.end()));
}

Forest::Forest(std::vector<Tree> trees, std::size_t num_classes, std::size_t training_size)
    : trees_(std::move(trees)), num_classes_(num_classes), training_size_(training_size) {
  if (trees_.empty()) throw ConfigError("a forest needs at least one tree");
  for (const auto& t : trees_) {
    if (t.num_classes() != num_classes_) throw ConfigError("trees disagree on the number of classes");
    if (t.feature_space_width() != trees_.front().feature_space_width())
      throw ConfigError("trees disagree on the feature space width");
  }
}

std::vector<double> Forest::class_scores(std::span<const double> x) const {
  if (x.size() != feature_space_width())
    throw ShapeError(fmt::format("instance has {} features, forest expects {}", x.size(), feature_space_width()));
  std::vector<double> scores(num_classes_, 0.0);
  for (const auto& tree : trees_) {
    const auto counts = tree.leaf_class_counts(tree.leaf_index_unchecked(x));
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    for (std::size_t c = 0; c < num_classes_; ++c) scores[c] += counts[c] / total;
  }
  return scores;
}

int Forest::predict(std::span<const double> x) const {
  const auto scores = class_scores(x);
  return static_cast<int>(std::max_element(scores.begin(), scores.end()) - scores.begin());
}

std::vector<int> Forest::predict(const Matrix& rows) const {
  std::vector<int> out(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = predict(rows.row(i));
  return out;
}

void Forest::save(std::ostream& out) const {
  out << "mvrfd-forest 1\n";
  out << "classes " << num_classes_ << " training_size " << training_size_ << " trees " << trees_.size() << "\n";
  for (const auto& tree : trees_) {
    out << "tree " << tree.feature_space_width() << ' ' << tree.nodes().size() << ' ' << tree.num_leaves() << ' '
        << tree.bootstrap_counts().size() << "\n";
    for (const auto& node : tree.nodes()) {
      if (node.is_leaf()) {
        out << "L " << node.leaf_id;
        for (auto c : tree.leaf_class_counts(static_cast<std::size_t>(node.leaf_id))) out << ' ' << c;
      } else {
        out << fmt::format("S {} {:a} {} {}", node.feature, node.threshold, node.left, node.right);
      }
      out << "\n";
    }
    if (!tree.bootstrap_counts().empty()) {
      out << "B";
      for (auto c : tree.bootstrap_counts()) out << ' ' << c;
      out << "\n";
    }
  }
}

Forest Forest::load(std::istream& in) {
  auto fail = [](const std::string& what) { return DataError("malformed forest file: " + what); };
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "mvrfd-forest") throw fail("bad header");
  if (version != 1) throw fail(fmt::format("unsupported version {}", version));
  std::string key;
  std::size_t num_classes = 0, training_size = 0, num_trees = 0;
  if (!(in >> key >> num_classes) || key != "classes") throw fail("expected 'classes'");
  if (!(in >> key >> training_size) || key != "training_size") throw fail("expected 'training_size'");
  if (!(in >> key >> num_trees) || key != "trees") throw fail("expected 'trees'");
  std::vector<Tree> trees;
  trees.reserve(num_trees);
  for (std::size_t t = 0; t < num_trees; ++t) {
    std::size_t width = 0, num_nodes = 0, num_leaves = 0, bag_size = 0;
    if (!(in >> key >> width >> num_nodes >> num_leaves >> bag_size) || key != "tree") throw fail("expected 'tree'");
    std::vector<Tree::Node> nodes(num_nodes);
    std::vector<std::vector<std::uint32_t>> leaves(num_leaves, std::vector<std::uint32_t>(num_classes));
    for (auto& node : nodes) {
      std::string kind;
      in >> kind;
      if (kind == "L") {
        in >> node.leaf_id;
        if (!in || node.leaf_id < 0 || static_cast<std::size_t>(node.leaf_id) >= num_leaves) throw fail("bad leaf id");
        for (auto& c : leaves[static_cast<std::size_t>(node.leaf_id)]) in >> c;
      } else if (kind == "S") {
        std::string threshold;
        in >> node.feature >> threshold >> node.left >> node.right;
        char* end = nullptr;
        node.threshold = std::strtod(threshold.c_str(), &end);
        if (end != threshold.c_str() + threshold.size()) throw fail("bad threshold");
      } else {
        throw fail("unknown node kind '" + kind + "'");
      }
      if (!in) throw fail("truncated node");
    }
    std::vector<std::uint32_t> bag(bag_size);
    if (bag_size > 0) {
      if (!(in >> key) || key != "B") throw fail("expected bootstrap counts");
      for (auto& c : bag) in >> c;
      if (!in) throw fail("truncated bootstrap counts");
    }
    Tree tree(std::move(nodes), std::move(leaves), width, num_classes);
    tree.set_bootstrap_counts(std::move(bag));
    trees.push_back(std::move(tree));
  }
  return Forest(std::move(trees), num_classes, training_size);
}

Forest train_forest(const Matrix& features, std::span<const int> labels, const ForestConfig& config,
                    std::optional<std::size_t> num_classes) {
  config.validate();
  const auto n = features.rows();
  if (n == 0 || features.cols() == 0) throw DataError("cannot train a forest on an empty feature table");
  if (labels.size() != n)
    throw ShapeError(fmt::format("{} labels for {} feature rows", labels.size(), features.rows()));
  const auto k = num_classes.value_or(infer_num_classes(labels));
  std::vector<bool> present(k, false);
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw ConfigError(fmt::format("label {} outside [0, {})", y, k));
    present[static_cast<std::size_t>(y)] = true;
  }
  if (std::count(present.begin(), present.end(), true) < 2)
    throw DataError("training labels contain a single class");

  std::vector<Tree> trees(config.num_trees);
  parallel_for(config.num_trees, config.jobs, [&](std::size_t t) {
    Rng rng(derive_seed(config.seed, t));
    std::vector<std::size_t> sample(n);
    std::vector<std::uint32_t> multiplicity(n, 0);
    for (auto& s : sample) {
      s = static_cast<std::size_t>(rng.uniform_index(n));
      ++multiplicity[s];
    }
    auto tree = grow_tree(features, labels, sample, k, config, rng.uniform_index(std::numeric_limits<std::uint64_t>::max()));
    tree.set_bootstrap_counts(std::move(multiplicity));
    trees[t] = std::move(tree);
  });
  return Forest(std::move(trees), k, n);
}

}  // namespace mvrfd
