#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mvrfd/cli.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/version.hpp"

using namespace mvrfd;

int main(int argc, char** argv) {
  CLI::App app{"Multi-view random forest dissimilarity benchmark"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the repeated-split protocol on one or more datasets");
  std::vector<std::string> manifests;
  std::string methods, c_grid, config_file, replay, out_dir, train_fraction;
  std::string repeats, trees, seed, jobs;
  bool no_predictions = false;
  run->add_option("datasets", manifests, "Dataset manifest files");
  run->add_option("--methods", methods, "Comma-separated method keys or 'all'");
  run->add_option("--repeats", repeats, "Number of random splits (default 10)");
  run->add_option("--train-fraction", train_fraction, "Training fraction (default 0.5)");
  run->add_option("--trees", trees, "Trees per forest (default 500)");
  run->add_option("--c-grid", c_grid, "Comma-separated SVM C values");
  run->add_option("--seed", seed, "Master seed (default 42)");
  run->add_option("--out", out_dir, "Output directory (default results)");
  run->add_option("--jobs", jobs, "Worker threads (results do not depend on it)");
  run->add_option("--config", config_file, "File of key = value settings; flags override it");
  run->add_option("--replay", replay, "Re-run the configuration stored in a run_metadata.json");
  run->add_flag("--no-predictions", no_predictions, "Skip predictions.csv");

  // dissim
  auto* dissim = app.add_subcommand("dissim", "Write per-view and joint RFD matrices for a dataset");
  cli::DissimOptions dopt;
  std::string view;
  dissim->add_option("manifest", dopt.manifest, "Dataset manifest")->required();
  dissim->add_option("--view", view, "Only this view");
  dissim->add_option("--out", dopt.output_dir, "Output directory");
  dissim->add_option("--trees", dopt.num_trees, "Trees per forest");
  dissim->add_option("--seed", dopt.seed, "Seed");
  dissim->add_option("--jobs", dopt.jobs, "Worker threads");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a dataset manifest and report its shape");
  std::string validate_manifest;
  validate->add_option("manifest", validate_manifest, "Dataset manifest")->required();

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic multi-view dataset");
  cli::GenerateOptions gopt;
  std::string gname;
  generate->add_option("--shape", gopt.shape, "small, lsvt, metabolomic or radiomics");
  generate->add_option("--seed", gopt.seed, "Seed");
  generate->add_option("--out", gopt.output_dir, "Output directory");
  generate->add_option("--name", gname, "Dataset name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kValidationFailure;
  }

  if (*run) {
    cli::RunConfig config;
    try {
      if (!replay.empty()) config = cli::config_from_metadata(replay);
      if (!config_file.empty())
        for (const auto& [k, v] : cli::read_config_file(config_file)) cli::apply_setting(config, k, v);
      if (!manifests.empty()) {
        config.datasets.clear();
        for (const auto& m : manifests) config.datasets.emplace_back(m);
      }
      const std::pair<const char*, const std::string*> flags[] = {
          {"methods", &methods}, {"repeats", &repeats}, {"train-fraction", &train_fraction},
          {"trees", &trees},     {"c-grid", &c_grid},   {"seed", &seed},
          {"out", &out_dir},     {"jobs", &jobs}};
      for (const auto& [key, value] : flags)
        if (!value->empty()) cli::apply_setting(config, key, *value);
      if (no_predictions) config.write_predictions = false;
    } catch (const Error& e) {
      std::cerr << "error [config]: " << e.what() << '\n';
      return cli::kValidationFailure;
    }
    return cli::cmd_run(config, std::cout, std::cerr);
  }
  if (*dissim) {
    if (!view.empty()) dopt.view = view;
    return cli::cmd_dissim(dopt, std::cout, std::cerr);
  }
  if (*validate) return cli::cmd_validate(validate_manifest, std::cout, std::cerr);
  if (*generate) {
    if (!gname.empty()) gopt.name = gname;
    return cli::cmd_generate(gopt, std::cout, std::cerr);
  }
  return cli::kValidationFailure;
}
