#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvrfd/matrix.hpp"

namespace mvrfd {

/// Per-feature scores (higher is better) and the induced order: descending
/// score, ties by ascending feature index.
struct FeatureRanking {
  std::vector<double> scores;
  std::vector<std::size_t> order;

  static FeatureRanking from_scores(std::vector<double> scores);
  friend bool operator==(const FeatureRanking&, const FeatureRanking&) = default;
};

/// ReliefF over every instance. Distances are L1 over per-feature min-max
/// normalised values; for each instance the k nearest hits are subtracted and
/// the k nearest misses of every other class added, weighted by that class's
/// prior over (1 - prior of the instance's class). Scores lie in [-1, 1].
/// Throws DataError when a class has fewer than k + 1 members.
FeatureRanking relief_scores(const Matrix& features, std::span<const int> labels, std::size_t k_neighbors,
                             unsigned jobs = 1);

/// k actually used by the Relief baseline: min(requested, smallest class - 1).
std::size_t relief_neighbors_for(std::span<const int> labels, std::size_t requested = 10);

/// Recursive feature elimination with a linear-kernel SVM on standardised
/// features (C = 1). Each round removes the weaker half of the survivors
/// (at least one), judged by |w_f| summed over the one-vs-one subproblems.
/// Zero-variance features are removed before the first round. The ranking is
/// the reverse elimination order; scores are p - position.
FeatureRanking svmrfe_rank(const Matrix& features, std::span<const int> labels, double c = 1.0);

/// Number of features kept out of p:
///   p < 10        -> round(0.75 p)
///   10 <= p < 75  -> round(0.40 p)
///   75 <= p < 100 -> round(0.10 p)
///   100 <= p < 1000 -> round(0.03 p)
///   p >= 1000     -> 25
/// never less than 1.
std::size_t select_count(std::size_t p);

/// The top `count` features of `ranking`, in ranking order.
std::vector<std::size_t> top_features(const FeatureRanking& ranking, std::size_t count);

/// Columns of `features` restricted to the top `count` ranked features.
Matrix apply_selection(const Matrix& features, const FeatureRanking& ranking, std::size_t count);

/// CSV columns feature_index,feature_name,score,rank (rank 1 is best).
void write_ranking_csv(const FeatureRanking& ranking, std::span<const std::string> feature_names,
                       const std::filesystem::path& path);

}  // namespace mvrfd
