#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvrfd/dataset.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/pipelines.hpp"

namespace mvrfd {

/// Accuracies of every method on every repetition of one dataset.
struct AccuracyTable {
  std::string dataset;
  std::vector<MethodId> methods;
  std::vector<std::vector<double>> accuracy;             ///< [repetition][method]
  std::vector<std::vector<PipelineResult>> results;      ///< [repetition][method]

  [[nodiscard]] std::size_t repetitions() const noexcept { return accuracy.size(); }
  [[nodiscard]] std::vector<double> column(std::size_t method_index) const;
};

/// A pipeline failure annotated with where it happened.
class ProtocolError : public Error {
 public:
  ProtocolError(std::size_t repetition, MethodId method, const std::string& what);
  [[nodiscard]] std::size_t repetition() const noexcept { return repetition_; }
  [[nodiscard]] MethodId method() const noexcept { return method_; }

 private:
  std::size_t repetition_;
  MethodId method_;
};

/// Seed handed to the pipelines of repetition `r`.
std::uint64_t repetition_seed(std::uint64_t seed, std::size_t repetition);

/// Runs every method on every repetition of `plan`. Methods of one repetition
/// share a SplitWorkspace; results do not depend on the method order.
AccuracyTable run_protocol(const MultiViewDataset& ds, std::span<const MethodId> methods, const SplitPlan& plan,
                           const PipelineConfig& config);

struct MethodSummary {
  MethodId method = MethodId::Rfsvm;
  double mean_pct = 0.0;
  double std_pct = 0.0;  ///< sample (n - 1) standard deviation
  std::size_t repetitions = 0;
};

/// Mean and sample standard deviation of fractions, both in percent.
MethodSummary summarize_column(MethodId method, std::span<const double> accuracies);
std::vector<MethodSummary> summarize(const AccuracyTable& table);

/// Ranks with 1 = highest value; tied values share the mean of their positions.
std::vector<double> midranks(std::span<const double> values);

/// Mean per-dataset midrank of each method. `means[d][m]` is the mean
/// accuracy of method m on dataset d.
std::vector<double> average_rank(const std::vector<std::vector<double>>& means);

struct SignTestLevel {
  double alpha = 0.0;
  std::size_t critical_exact = 0;   ///< smallest w with P(X >= w) <= alpha, X ~ Bin(n, 1/2); n + 1 if none
  std::size_t critical_normal = 0;  ///< ceil(n/2 + z_{1-alpha} sqrt(n)/2)
  bool significant = false;         ///< adjusted wins >= critical_exact
  bool significant_normal = false;  ///< adjusted wins >= critical_normal
};

struct SignTestResult {
  std::size_t datasets = 0;
  std::size_t wins = 0;
  std::size_t ties = 0;
  std::size_t losses = 0;
  std::size_t adjusted_wins = 0;  ///< wins + floor(ties / 2)
  std::vector<SignTestLevel> levels;
};

std::size_t sign_test_critical_value(std::size_t n, double alpha);
std::size_t sign_test_normal_critical_value(std::size_t n, double alpha);

/// Pairwise comparison over datasets: a win is a dataset where the
/// challenger's mean accuracy is strictly higher than the baseline's.
SignTestResult sign_test(std::span<const double> baseline, std::span<const double> challenger,
                         std::span<const double> alphas);

struct SignTestEntry {
  MethodId baseline;
  MethodId challenger;
  SignTestResult result;
};

struct EvaluationReport {
  std::vector<AccuracyTable> tables;
  std::vector<std::vector<MethodSummary>> summaries;  ///< per table
  std::vector<MethodId> methods;
  std::vector<double> average_ranks;  ///< per method, over every table
  std::vector<SignTestEntry> sign_tests;
  std::vector<double> alphas{0.10, 0.05, 0.01};
};

/// Builds summaries, ranks and sign tests. Every table must list the same
/// methods in the same order. Sign tests need at least two datasets; the
/// baselines are RELF+RF and SVMRFE+RF when present, otherwise the first method.
EvaluationReport build_report(std::vector<AccuracyTable> tables, std::vector<double> alphas = {0.10, 0.05, 0.01});

/// dataset,repetition,method,accuracy
void write_raw_csv(const EvaluationReport& report, const std::filesystem::path& path);
/// dataset,method,mean_pct,std_pct,avg_rank
void write_summary_csv(const EvaluationReport& report, const std::filesystem::path& path);
/// baseline,challenger,datasets,wins,ties,losses,adjusted_wins,alpha,critical_exact,critical_normal,significant,significant_normal
void write_sign_test_csv(const EvaluationReport& report, const std::filesystem::path& path);
/// dataset,repetition,method,instance_index,true_label,predicted_label
void write_predictions_csv(const EvaluationReport& report, const std::vector<MultiViewDataset>& datasets,
                           const std::filesystem::path& path);

/// "81.11% ± 5.04"
std::string format_accuracy(const MethodSummary& s);

}  // namespace mvrfd
