#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mvrfd/pipelines.hpp"

namespace mvrfd::cli {

/// Process exit codes.
enum ExitCode : int { kSuccess = 0, kValidationFailure = 1, kRuntimeFailure = 2 };

struct RunConfig {
  std::vector<std::filesystem::path> datasets;
  std::vector<MethodId> methods{kAllMethods.begin(), kAllMethods.end()};
  std::size_t repetitions = 10;
  double train_fraction = 0.5;
  std::size_t num_trees = 500;
  std::vector<double> c_grid{0.01, 0.1, 1.0, 10.0, 100.0, 1000.0};
  std::uint64_t seed = 42;
  std::filesystem::path output_dir = "results";
  unsigned jobs = 1;
  bool write_predictions = true;

  /// Throws ConfigError on empty lists, non-positive counts or a bad fraction.
  void validate() const;
  [[nodiscard]] PipelineConfig pipeline_config() const;
};

/// Applies `key = value` pairs (keys as the long flag names: datasets, methods,
/// repeats, train-fraction, trees, c-grid, seed, out, jobs, predictions).
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Reads a text config file of `key = value` lines (# comments allowed).
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);

/// Rebuilds the RunConfig stored in a run_metadata.json.
RunConfig config_from_metadata(const std::filesystem::path& metadata_path);

/// Runs the repeated-split protocol on every dataset and writes
/// raw_accuracy.csv, summary.csv, sign_test.csv, predictions.csv,
/// splits_<dataset>.csv and run_metadata.json into the output directory.
int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err);

struct DissimOptions {
  std::filesystem::path manifest;
  std::optional<std::string> view;
  std::filesystem::path output_dir = "dissimilarity";
  std::size_t num_trees = 500;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
};

/// Trains one forest per view on the whole dataset and writes
/// dissimilarity_<view>.csv for each view plus dissimilarity_joint.csv
/// (only the named view when `view` is set).
int cmd_dissim(const DissimOptions& options, std::ostream& out, std::ostream& err);

/// Prints the shape report or every violated invariant.
int cmd_validate(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err);

struct GenerateOptions {
  std::string shape = "small";  ///< small, lsvt, metabolomic or radiomics
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "synthetic";
  std::optional<std::string> name;
};

/// Writes a synthetic dataset (manifest + CSVs).
int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err);

}  // namespace mvrfd::cli
