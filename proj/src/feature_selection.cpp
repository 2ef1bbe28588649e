#include "mvrfd/feature_selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/core.h>

#include "mvrfd/csv.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/parallel.hpp"
#include "mvrfd/svm.hpp"

namespace mvrfd {
namespace {

std::vector<std::vector<std::size_t>> group_by_class(std::span<const int> labels) {
  int highest = -1;
  for (int y : labels) {
    if (y < 0) throw ConfigError("class labels must be non-negative");
    highest = std::max(highest, y);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(highest + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  return members;
}

std::size_t count_present(const std::vector<std::vector<std::size_t>>& members) {
  return static_cast<std::size_t>(std::count_if(members.begin(), members.end(), [](const auto& m) { return !m.empty(); }));
}

}  // namespace

FeatureRanking FeatureRanking::from_scores(std::vector<double> scores) {
  FeatureRanking ranking;
  ranking.order.resize(scores.size());
  std::iota(ranking.order.begin(), ranking.order.end(), 0);
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  ranking.scores = std::move(scores);
  return ranking;
}

std::size_t relief_neighbors_for(std::span<const int> labels, std::size_t requested) {
  const auto members = group_by_class(labels);
  std::size_t smallest = labels.size();
  for (const auto& m : members)
    if (!m.empty()) smallest = std::min(smallest, m.size());
  if (smallest < 2) throw DataError("ReliefF needs at least 2 members per class");
  return std::min(requested, smallest - 1);
}

FeatureRanking relief_scores(const Matrix& features, std::span<const int> labels, std::size_t k_neighbors,
                             unsigned jobs) {
  const auto n = features.rows();
  const auto p = features.cols();
  if (labels.size() != n) throw ShapeError(fmt::format("{} labels for {} rows", labels.size(), n));
  if (k_neighbors < 1) throw ConfigError("ReliefF needs k >= 1");
  const auto members = group_by_class(labels);
  if (count_present(members) < 2) throw DataError("ReliefF needs at least two classes");
  for (std::size_t c = 0; c < members.size(); ++c)
    if (!members[c].empty() && members[c].size() < k_neighbors + 1)
      throw DataError(fmt::format("class {} has {} members, ReliefF with k={} needs {}", c, members[c].size(),
                                    k_neighbors, k_neighbors + 1));

  // Min-max normalised copy; constant features become all zero.
  Matrix scaled(n, p);
  for (std::size_t f = 0; f < p; ++f) {
    double lo = features(0, f), hi = features(0, f);
    for (std::size_t i = 1; i < n; ++i) {
      lo = std::min(lo, features(i, f));
      hi = std::max(hi, features(i, f));
    }
    const double range = hi - lo;
    for (std::size_t i = 0; i < n; ++i) scaled(i, f) = range > 0 ? (features(i, f) - lo) / range : 0.0;
  }

  Matrix distance(n, n);
  parallel_for(n, jobs, [&](std::size_t i) {
    for (std::size_t j = 0; j < n; ++j) {
      double d = 0.0;
      const auto a = scaled.row(i), b = scaled.row(j);
      for (std::size_t f = 0; f < p; ++f) d += std::abs(a[f] - b[f]);
      distance(i, j) = d;
    }
  });

  std::vector<double> prior(members.size());
  for (std::size_t c = 0; c < members.size(); ++c)
    prior[c] = static_cast<double>(members[c].size()) / static_cast<double>(n);

  auto nearest = [&](std::size_t i, const std::vector<std::size_t>& pool) {
    std::vector<std::size_t> candidates;
    candidates.reserve(pool.size());
    for (auto j : pool)
      if (j != i) candidates.push_back(j);
    const auto k = std::min(k_neighbors, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k), candidates.end(),
                      [&](std::size_t a, std::size_t b) {
                        return distance(i, a) < distance(i, b) || (distance(i, a) == distance(i, b) && a < b);
                      });
    candidates.resize(k);
    return candidates;
  };

  std::vector<double> weights(p, 0.0);
  const double norm = static_cast<double>(n) * static_cast<double>(k_neighbors);
  std::vector<double> delta(p);
  for (std::size_t i = 0; i < n; ++i) {
    const auto own = static_cast<std::size_t>(labels[i]);
    std::fill(delta.begin(), delta.end(), 0.0);
    for (auto h : nearest(i, members[own]))
      for (std::size_t f = 0; f < p; ++f) delta[f] -= std::abs(scaled(i, f) - scaled(h, f));
    for (std::size_t c = 0; c < members.size(); ++c) {
      if (c == own || members[c].empty()) continue;
      const double weight = prior[c] / (1.0 - prior[own]);
      for (auto m : nearest(i, members[c]))
        for (std::size_t f = 0; f < p; ++f) delta[f] += weight * std::abs(scaled(i, f) - scaled(m, f));
    }
    for (std::size_t f = 0; f < p; ++f) weights[f] += delta[f] / norm;
  }
  return FeatureRanking::from_scores(std::move(weights));
}

FeatureRanking svmrfe_rank(const Matrix& features, std::span<const int> labels, double c) {
  const auto n = features.rows();
  const auto p = features.cols();
  if (labels.size() != n) throw ShapeError(fmt::format("{} labels for {} rows", labels.size(), n));
  if (p == 0) throw ConfigError("SVM-RFE needs at least one feature");
  if (count_present(group_by_class(labels)) < 2) throw DataError("SVM-RFE needs at least two classes");

  // Standardise on the given (training) rows.
  Matrix z(n, p);
  std::vector<std::size_t> survivors;
  std::vector<std::size_t> eliminated;
  for (std::size_t f = 0; f < p; ++f) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += features(i, f);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (features(i, f) - mean) * (features(i, f) - mean);
    var /= static_cast<double>(n);
    if (var > 0.0) {
      const double sd = std::sqrt(var);
      for (std::size_t i = 0; i < n; ++i) z(i, f) = (features(i, f) - mean) / sd;
      survivors.push_back(f);
    }
  }
  // Constant features go out first, highest index first, so they rank last.
  for (std::size_t f = p; f-- > 0;)
    if (!std::binary_search(survivors.begin(), survivors.end(), f)) eliminated.push_back(f);

  Matrix kernel(n, n);
  while (!survivors.empty()) {
    if (survivors.size() == 1) {
      eliminated.push_back(survivors.front());
      break;
    }
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        double dot = 0.0;
        for (auto f : survivors) dot += z(i, f) * z(j, f);
        kernel(i, j) = dot;
        kernel(j, i) = dot;
      }
    }
    const auto model = train_svm(kernel, labels, c);
    std::vector<double> magnitude(survivors.size(), 0.0);
    for (const auto& coef : model.dual_coefficients) {
      for (std::size_t s = 0; s < survivors.size(); ++s) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          if (coef[i] != 0.0) w += coef[i] * z(i, survivors[s]);
        magnitude[s] += std::abs(w);
      }
    }
    // Weakest first; among equal weights the higher index goes first.
    std::vector<std::size_t> by_weight(survivors.size());
    std::iota(by_weight.begin(), by_weight.end(), 0);
    std::stable_sort(by_weight.begin(), by_weight.end(), [&](std::size_t a, std::size_t b) {
      if (magnitude[a] != magnitude[b]) return magnitude[a] < magnitude[b];
      return survivors[a] > survivors[b];
    });
    const auto drop = std::max<std::size_t>(1, survivors.size() / 2);
    std::vector<bool> removed(survivors.size(), false);
    for (std::size_t t = 0; t < drop; ++t) {
      removed[by_weight[t]] = true;
      eliminated.push_back(survivors[by_weight[t]]);
    }
    std::vector<std::size_t> next;
    for (std::size_t s = 0; s < survivors.size(); ++s)
      if (!removed[s]) next.push_back(survivors[s]);
    survivors = std::move(next);
  }

  FeatureRanking ranking;
  ranking.order.assign(eliminated.rbegin(), eliminated.rend());
  ranking.scores.assign(p, 0.0);
  for (std::size_t pos = 0; pos < p; ++pos) ranking.scores[ranking.order[pos]] = static_cast<double>(p - pos);
  return ranking;
}

std::size_t select_count(std::size_t p) {
  if (p < 1) throw ConfigError("feature count must be at least 1");
  const auto x = static_cast<double>(p);
  double kept = 25.0;
  if (p < 10) kept = 0.75 * x;
  else if (p < 75) kept = 0.40 * x;
  else if (p < 100) kept = 0.10 * x;
  else if (p < 1000) kept = 0.03 * x;
  const auto count = static_cast<std::size_t>(std::llround(kept));
  return std::clamp<std::size_t>(count, 1, p);
}

std::vector<std::size_t> top_features(const FeatureRanking& ranking, std::size_t count) {
  if (count < 1 || count > ranking.order.size())
    throw ConfigError(fmt::format("cannot select {} of {} features", count, ranking.order.size()));
  return {ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(count)};
}

Matrix apply_selection(const Matrix& features, const FeatureRanking& ranking, std::size_t count) {
  if (ranking.order.size() != features.cols())
    throw ShapeError(fmt::format("ranking covers {} features, table has {}", ranking.order.size(), features.cols()));
  return features.select_columns(top_features(ranking, count));
}

void write_ranking_csv(const FeatureRanking& ranking, std::span<const std::string> feature_names,
                       const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << "feature_index,feature_name,score,rank\n";
  for (std::size_t pos = 0; pos < ranking.order.size(); ++pos) {
    const auto f = ranking.order[pos];
    const std::string name = f < feature_names.size() ? feature_names[f] : std::string{};
    out << f << ',' << csv::escape(name) << ',' << csv::format_double(ranking.scores[f]) << ',' << pos + 1 << '\n';
  }
}

}  // namespace mvrfd
