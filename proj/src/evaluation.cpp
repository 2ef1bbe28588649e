#include "mvrfd/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/normal.hpp>
#include <fmt/core.h>

#include "mvrfd/csv.hpp"
#include "mvrfd/rng.hpp"

namespace mvrfd {
namespace {

constexpr std::uint64_t kRepetitionStream = 1'000'000;

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  return out;
}

}  // namespace

std::vector<double> AccuracyTable::column(std::size_t method_index) const {
  std::vector<double> out;
  out.reserve(accuracy.size());
  for (const auto& row : accuracy) out.push_back(row.at(method_index));
  return out;
}

ProtocolError::ProtocolError(std::size_t repetition, MethodId method, const std::string& what)
    : Error(fmt::format("repetition {}, method {}: {}", repetition, method_label(method), what)),
      repetition_(repetition),
      method_(method) {}

std::uint64_t repetition_seed(std::uint64_t seed, std::size_t repetition) {
  return derive_seed(seed, kRepetitionStream + repetition);
}

AccuracyTable run_protocol(const MultiViewDataset& ds, std::span<const MethodId> methods, const SplitPlan& plan,
                           const PipelineConfig& config) {
  if (methods.empty()) throw ConfigError("no methods to run");
  AccuracyTable table;
  table.dataset = ds.name;
  table.methods.assign(methods.begin(), methods.end());
  for (std::size_t r = 0; r < plan.repetitions.size(); ++r) {
    auto rep_config = config;
    rep_config.seed = repetition_seed(config.seed, r);
    SplitWorkspace workspace(ds, plan.repetitions[r], rep_config);
    std::vector<double> accuracies;
    std::vector<PipelineResult> results;
    for (auto method : methods) {
      try {
        results.push_back(run_method(method, workspace));
      } catch (const std::exception& e) {
        throw ProtocolError(r, method, e.what());
      }
      accuracies.push_back(results.back().accuracy);
    }
    table.accuracy.push_back(std::move(accuracies));
    table.results.push_back(std::move(results));
  }
  return table;
}

MethodSummary summarize_column(MethodId method, std::span<const double> accuracies) {
  if (accuracies.empty()) throw ConfigError("cannot summarise an empty accuracy list");
  MethodSummary s;
  s.method = method;
  s.repetitions = accuracies.size();
  const double n = static_cast<double>(accuracies.size());
  const auto [lo, hi] = std::minmax_element(accuracies.begin(), accuracies.end());
  // A constant list keeps its exact value and zero spread.
  const double mean = *lo == *hi ? *lo : std::accumulate(accuracies.begin(), accuracies.end(), 0.0) / n;
  double ss = 0.0;
  for (double a : accuracies) ss += (a - mean) * (a - mean);
  s.mean_pct = 100.0 * mean;
  s.std_pct = accuracies.size() > 1 ? 100.0 * std::sqrt(ss / (n - 1.0)) : 0.0;
  return s;
}

std::vector<MethodSummary> summarize(const AccuracyTable& table) {
  if (table.accuracy.empty()) throw ConfigError("accuracy table is empty");
  std::vector<MethodSummary> out;
  for (std::size_t m = 0; m < table.methods.size(); ++m) out.push_back(summarize_column(table.methods[m], table.column(m)));
  return out;
}

std::vector<double> midranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < order.size();) {
    auto end = start + 1;
    while (end < order.size() && values[order[end]] == values[order[start]]) ++end;
    // positions start+1 .. end share their mean
    const double rank = (static_cast<double>(start + 1) + static_cast<double>(end)) / 2.0;
    for (auto t = start; t < end; ++t) ranks[order[t]] = rank;
    start = end;
  }
  return ranks;
}

std::vector<double> average_rank(const std::vector<std::vector<double>>& means) {
  if (means.empty()) throw ConfigError("average rank needs at least one dataset");
  const auto k = means.front().size();
  std::vector<double> total(k, 0.0);
  for (std::size_t d = 0; d < means.size(); ++d) {
    if (means[d].size() != k) throw ConfigError(fmt::format("dataset {} is missing method results", d));
    for (double v : means[d])
      if (!std::isfinite(v)) throw ConfigError(fmt::format("dataset {} has a missing accuracy", d));
    const auto ranks = midranks(means[d]);
    for (std::size_t m = 0; m < k; ++m) total[m] += ranks[m];
  }
  for (auto& t : total) t /= static_cast<double>(means.size());
  return total;
}

std::size_t sign_test_critical_value(std::size_t n, double alpha) {
  const boost::math::binomial_distribution<double> null(static_cast<double>(n), 0.5);
  for (std::size_t w = 0; w <= n; ++w) {
    const double tail = w == 0 ? 1.0 : boost::math::cdf(boost::math::complement(null, static_cast<double>(w - 1)));
    if (tail <= alpha) return w;
  }
  return n + 1;
}

std::size_t sign_test_normal_critical_value(std::size_t n, double alpha) {
  const double z = boost::math::quantile(boost::math::normal_distribution<double>(), 1.0 - alpha);
  const double nd = static_cast<double>(n);
  return static_cast<std::size_t>(std::ceil(nd / 2.0 + z * std::sqrt(nd) / 2.0));
}

SignTestResult sign_test(std::span<const double> baseline, std::span<const double> challenger,
                         std::span<const double> alphas) {
  if (baseline.size() != challenger.size())
    throw ShapeError(fmt::format("{} baseline vs {} challenger results", baseline.size(), challenger.size()));
  if (baseline.size() < 2) throw ConfigError("the sign test needs at least 2 datasets");
  SignTestResult r;
  r.datasets = baseline.size();
  for (std::size_t d = 0; d < baseline.size(); ++d) {
    if (challenger[d] > baseline[d]) ++r.wins;
    else if (challenger[d] < baseline[d]) ++r.losses;
    else ++r.ties;
  }
  r.adjusted_wins = r.wins + r.ties / 2;
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
    SignTestLevel level;
    level.alpha = alpha;
    level.critical_exact = sign_test_critical_value(r.datasets, alpha);
    level.critical_normal = sign_test_normal_critical_value(r.datasets, alpha);
    level.significant = r.adjusted_wins >= level.critical_exact;
    level.significant_normal = r.adjusted_wins >= level.critical_normal;
    r.levels.push_back(level);
  }
  return r;
}

EvaluationReport build_report(std::vector<AccuracyTable> tables, std::vector<double> alphas) {
  if (tables.empty()) throw ConfigError("no accuracy tables to report");
  EvaluationReport report;
  report.alphas = std::move(alphas);
  report.methods = tables.front().methods;
  for (const auto& t : tables)
    if (t.methods != report.methods) throw ConfigError("accuracy tables list different methods");

  std::vector<std::vector<double>> means;
  for (const auto& t : tables) {
    report.summaries.push_back(summarize(t));
    std::vector<double> row;
    for (const auto& s : report.summaries.back()) row.push_back(s.mean_pct);
    means.push_back(std::move(row));
  }
  report.average_ranks = average_rank(means);

  if (tables.size() >= 2) {
    std::vector<std::size_t> baselines;
    for (std::size_t m = 0; m < report.methods.size(); ++m)
      if (report.methods[m] == MethodId::RelfRf || report.methods[m] == MethodId::SvmrfeRf) baselines.push_back(m);
    if (baselines.empty()) baselines.push_back(0);
    for (auto b : baselines) {
      for (std::size_t c = 0; c < report.methods.size(); ++c) {
        if (c == b) continue;
        std::vector<double> base, chal;
        for (const auto& row : means) {
          base.push_back(row[b]);
          chal.push_back(row[c]);
        }
        report.sign_tests.push_back({report.methods[b], report.methods[c], sign_test(base, chal, report.alphas)});
      }
    }
  }
  report.tables = std::move(tables);
  return report;
}

void write_raw_csv(const EvaluationReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "dataset,repetition,method,accuracy\n";
  for (const auto& t : report.tables)
    for (std::size_t r = 0; r < t.repetitions(); ++r)
      for (std::size_t m = 0; m < t.methods.size(); ++m)
        out << csv::escape(t.dataset) << ',' << r << ',' << method_key(t.methods[m]) << ','
            << csv::format_double(t.accuracy[r][m]) << '\n';
}

void write_summary_csv(const EvaluationReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "dataset,method,mean_pct,std_pct,avg_rank\n";
  for (std::size_t d = 0; d < report.tables.size(); ++d)
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      const auto& s = report.summaries[d][m];
      out << csv::escape(report.tables[d].dataset) << ',' << method_key(s.method) << ','
          << fmt::format("{:.2f},{:.2f},{:.2f}", s.mean_pct, s.std_pct, report.average_ranks[m]) << '\n';
    }
}

void write_sign_test_csv(const EvaluationReport& report, const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "baseline,challenger,datasets,wins,ties,losses,adjusted_wins,alpha,critical_exact,critical_normal,"
         "significant,significant_normal\n";
  for (const auto& e : report.sign_tests)
    for (const auto& level : e.result.levels)
      out << method_key(e.baseline) << ',' << method_key(e.challenger) << ',' << e.result.datasets << ','
          << e.result.wins << ',' << e.result.ties << ',' << e.result.losses << ',' << e.result.adjusted_wins << ','
          << csv::format_double(level.alpha) << ',' << level.critical_exact << ',' << level.critical_normal << ','
          << (level.significant ? 1 : 0) << ',' << (level.significant_normal ? 1 : 0) << '\n';
}

void write_predictions_csv(const EvaluationReport& report, const std::vector<MultiViewDataset>& datasets,
                           const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "dataset,repetition,method,instance_index,true_label,predicted_label\n";
  for (std::size_t d = 0; d < report.tables.size(); ++d) {
    const auto& t = report.tables[d];
    const auto* names = d < datasets.size() ? &datasets[d].class_names : nullptr;
    auto label = [&](int y) {
      return names ? csv::escape((*names)[static_cast<std::size_t>(y)]) : std::to_string(y);
    };
    for (std::size_t r = 0; r < t.results.size(); ++r)
      for (const auto& res : t.results[r])
        for (std::size_t i = 0; i < res.predictions.size(); ++i)
          out << csv::escape(t.dataset) << ',' << r << ',' << method_key(res.method) << ',' << res.test_indices[i]
              << ',' << label(res.true_labels[i]) << ',' << label(res.predictions[i]) << '\n';
  }
}

std::string format_accuracy(const MethodSummary& s) { return fmt::format("{:.2f}% ± {:.2f}", s.mean_pct, s.std_pct); }

}  // namespace mvrfd
