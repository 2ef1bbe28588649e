#include "mvrfd/cli.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>

#include <fmt/core.h>
#include <json.hpp>

#include "mvrfd/csv.hpp"
#include "mvrfd/dataset.hpp"
#include "mvrfd/dissimilarity.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/evaluation.hpp"
#include "mvrfd/synthetic.hpp"
#include "mvrfd/version.hpp"

namespace mvrfd::cli {
namespace {

using json = nlohmann::ordered_json;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    auto item = trim(std::string_view(text).substr(start, end - start));
    if (!item.empty()) out.push_back(std::move(item));
    start = end + 1;
  }
  return out;
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto text = trim(value);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty())
    throw ConfigError(fmt::format("'{}' expects a non-negative integer, got '{}'", key, value));
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    return csv::parse_double(value, key);
  } catch (const DataError&) {
    throw ConfigError(fmt::format("'{}' expects a real number, got '{}'", key, value));
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("'{}' expects true or false, got '{}'", key, value));
}

std::string safe_file_part(std::string_view name) {
  std::string out;
  for (char c : name) out.push_back(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ? c : '_');
  return out.empty() ? "dataset" : out;
}

json config_json(const RunConfig& config) {
  json j;
  j["datasets"] = json::array();
  for (const auto& d : config.datasets) j["datasets"].push_back(std::filesystem::absolute(d).lexically_normal().string());
  j["methods"] = json::array();
  for (auto m : config.methods) j["methods"].push_back(std::string(method_key(m)));
  j["repeats"] = config.repetitions;
  j["train-fraction"] = config.train_fraction;
  j["trees"] = config.num_trees;
  j["c-grid"] = config.c_grid;
  j["seed"] = config.seed;
  j["out"] = config.output_dir.string();
  j["jobs"] = config.jobs;
  j["predictions"] = config.write_predictions;
  return j;
}

json design_choices() {
  return json{
      {"split_criterion", "gini"},
      {"mtry", "ceil(sqrt(p))"},
      {"min_samples_split", 2},
      {"max_depth", "unlimited"},
      {"degenerate_node", "one retry with a fresh feature subset, then leaf"},
      {"forest_vote", "summed leaf class proportions, ties to lowest class"},
      {"dissimilarity_trees", "all trees for all pairs (no out-of-bag filtering)"},
      {"svm_multiclass", "one-vs-one, vote ties to lowest class"},
      {"svm_solver", "pairwise SMO, maximal violating pair, tolerance 1e-3, cap 1e4 passes"},
      {"c_selection", "per training split, stratified 3-fold CV (2-fold fallback), ties to smallest C"},
      {"relief", "ReliefF, k = min(10, smallest class - 1), all instances"},
      {"svmrfe", "linear SVM on standardised features, C = 1, halve survivors per round"},
      {"feature_count_boundaries", "10, 75, 100, 1000 assigned to the higher band"},
      {"late_vote", "hard plurality vote, ties to lowest class"},
      {"view_forests", "trained once per split and shared by RFSVM, RFDIS, LateRF, LateRFDIS"},
      {"stratification", "round(fraction * class size), clamped, total adjusted on largest classes"},
      {"sign_test", "exact binomial critical values govern; normal approximation also reported; ties split half to wins"},
  };
}

void write_json(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << j.dump(2) << '\n';
}

}  // namespace

void RunConfig::validate() const {
  if (datasets.empty()) throw ConfigError("no dataset manifests given");
  if (methods.empty()) throw ConfigError("no methods selected");
  if (repetitions < 1) throw ConfigError("repeats must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train-fraction must lie in (0, 1)");
  if (num_trees < 1) throw ConfigError("trees must be positive");
  if (jobs < 1) throw ConfigError("jobs must be positive");
  KernelGrid{c_grid}.validate();
}

PipelineConfig RunConfig::pipeline_config() const {
  PipelineConfig pc;
  pc.forest.num_trees = num_trees;
  pc.c_grid = KernelGrid{c_grid};
  pc.seed = seed;
  pc.jobs = jobs;
  return pc;
}

void apply_setting(RunConfig& config, const std::string& raw_key, const std::string& value) {
  const auto key = trim(raw_key);
  if (key == "datasets" || key == "dataset") {
    config.datasets.clear();
    for (const auto& d : split_list(value)) config.datasets.emplace_back(d);
  } else if (key == "methods") {
    config.methods = parse_method_list(value);
  } else if (key == "repeats") {
    config.repetitions = parse_unsigned(key, value);
  } else if (key == "train-fraction") {
    config.train_fraction = parse_real(key, value);
  } else if (key == "trees") {
    config.num_trees = parse_unsigned(key, value);
  } else if (key == "c-grid") {
    config.c_grid.clear();
    for (const auto& c : split_list(value)) config.c_grid.push_back(parse_real(key, c));
  } else if (key == "seed") {
    config.seed = parse_unsigned(key, value);
  } else if (key == "out") {
    config.output_dir = trim(value);
  } else if (key == "jobs") {
    config.jobs = static_cast<unsigned>(parse_unsigned(key, value));
  } else if (key == "predictions") {
    config.write_predictions = parse_bool(key, value);
  } else {
    throw ConfigError(fmt::format("unknown setting '{}'", key));
  }
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file '{}'", path.string()));
  std::map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(fmt::format("{}:{}: expected 'key = value'", path.string(), line_no));
    out[trim(std::string_view(text).substr(0, eq))] = trim(std::string_view(text).substr(eq + 1));
  }
  return out;
}

RunConfig config_from_metadata(const std::filesystem::path& metadata_path) {
  std::ifstream in(metadata_path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", metadata_path.string()));
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("'{}' is not valid JSON: {}", metadata_path.string(), e.what()));
  }
  if (!j.contains("config")) throw ConfigError("metadata has no 'config' block");
  const auto& c = j["config"];
  RunConfig config;
  try {
    config.datasets.clear();
    for (const auto& d : c.at("datasets")) config.datasets.emplace_back(d.get<std::string>());
    config.methods.clear();
    for (const auto& m : c.at("methods")) config.methods.push_back(parse_method(m.get<std::string>()));
    config.repetitions = c.at("repeats").get<std::size_t>();
    config.train_fraction = c.at("train-fraction").get<double>();
    config.num_trees = c.at("trees").get<std::size_t>();
    config.c_grid = c.at("c-grid").get<std::vector<double>>();
    config.seed = c.at("seed").get<std::uint64_t>();
    config.output_dir = c.at("out").get<std::string>();
    config.jobs = c.at("jobs").get<unsigned>();
    config.write_predictions = c.value("predictions", true);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("metadata config block is malformed: {}", e.what()));
  }
  return config;
}

int cmd_run(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    config.validate();
  } catch (const Error& e) {
    err << "error [config]: " << e.what() << '\n';
    return kValidationFailure;
  }

  std::vector<MultiViewDataset> datasets;
  for (const auto& path : config.datasets) {
    try {
      datasets.push_back(load_dataset(path));
    } catch (const Error& e) {
      err << "error [load]: " << e.what() << '\n';
      return kValidationFailure;
    }
  }

  const auto& dir = config.output_dir;
  json meta;
  meta["tool"] = "mvrfd";
  meta["version"] = kVersion;
  meta["status"] = "running";
  meta["config"] = config_json(config);
  meta["design_choices"] = design_choices();
  meta["datasets"] = json::array();
  for (std::size_t d = 0; d < datasets.size(); ++d) {
    const auto& ds = datasets[d];
    json info{{"name", ds.name}, {"manifest", std::filesystem::absolute(config.datasets[d]).lexically_normal().string()}, {"instances", ds.num_instances()},
              {"views", json::array()}, {"classes", ds.class_names}, {"class_histogram", ds.class_histogram()}};
    for (const auto& v : ds.views) info["views"].push_back({{"name", v.name}, {"features", v.width()}});
    meta["datasets"].push_back(std::move(info));
  }

  std::string stage = "setup";
  try {
    std::filesystem::create_directories(dir);
    std::filesystem::remove(dir / "INCOMPLETE");
    const auto pipeline = config.pipeline_config();
    std::vector<AccuracyTable> tables;
    meta["runs"] = json::array();
    for (std::size_t d = 0; d < datasets.size(); ++d) {
      const auto& ds = datasets[d];
      stage = fmt::format("split plan for '{}'", ds.name);
      const auto plan = make_split_plan(ds, config.repetitions, config.train_fraction, config.seed);
      write_split_plan(plan, dir / fmt::format("splits_{}.csv", safe_file_part(ds.name)));
      stage = fmt::format("protocol on '{}'", ds.name);
      out << fmt::format("[{}] N={} Q={} p={} ({} repetitions x {} methods)\n", ds.name, ds.num_instances(),
                         ds.num_views(), ds.total_features(), config.repetitions, config.methods.size());
      auto table = run_protocol(ds, config.methods, plan, pipeline);
      for (std::size_t r = 0; r < table.results.size(); ++r) {
        for (const auto& res : table.results[r]) {
          json run{{"dataset", ds.name},
                   {"repetition", r},
                   {"method", std::string(method_key(res.method))},
                   {"accuracy", res.accuracy},
                   {"model_fingerprint", fmt::format("{:016x}", res.model_fingerprint)}};
          if (res.chosen_c) {
            run["chosen_c"] = *res.chosen_c;
            run["cv_accuracy"] = res.cv_accuracy;
          }
          if (res.selected_count) run["selected_features"] = *res.selected_count;
          if (res.method != MethodId::RelfRf && res.method != MethodId::SvmrfeRf)
            run["reused_view_forests"] = res.reused_view_forests;
          meta["runs"].push_back(std::move(run));
        }
      }
      for (const auto& s : summarize(table))
        out << fmt::format("  {:<10} {}\n", method_label(s.method), format_accuracy(s));
      tables.push_back(std::move(table));
    }

    stage = "report";
    const auto report = build_report(std::move(tables));
    write_raw_csv(report, dir / "raw_accuracy.csv");
    write_summary_csv(report, dir / "summary.csv");
    write_sign_test_csv(report, dir / "sign_test.csv");
    std::vector<std::string> outputs{"raw_accuracy.csv", "summary.csv", "sign_test.csv"};
    if (config.write_predictions) {
      write_predictions_csv(report, datasets, dir / "predictions.csv");
      outputs.emplace_back("predictions.csv");
    }
    meta["average_rank"] = json::object();
    for (std::size_t m = 0; m < report.methods.size(); ++m)
      meta["average_rank"][std::string(method_key(report.methods[m]))] = report.average_ranks[m];
    if (report.sign_tests.empty()) meta["sign_test_note"] = "skipped: fewer than 2 datasets";
    meta["outputs"] = outputs;
    meta["status"] = "complete";
    write_json(meta, dir / "run_metadata.json");
    out << "wrote results to " << dir.string() << '\n';
    return kSuccess;
  } catch (const std::exception& e) {
    err << "error [" << stage << "]: " << e.what() << '\n';
    meta["status"] = "incomplete";
    meta["failed_stage"] = stage;
    meta["error"] = e.what();
    try {
      std::filesystem::create_directories(dir);
      write_json(meta, dir / "run_metadata.json");
      std::ofstream(dir / "INCOMPLETE") << stage << ": " << e.what() << '\n';
    } catch (...) {
    }
    return kRuntimeFailure;
  }
}

int cmd_dissim(const DissimOptions& options, std::ostream& out, std::ostream& err) {
  MultiViewDataset ds;
  try {
    ds = load_dataset(options.manifest);
  } catch (const Error& e) {
    err << "error [load]: " << e.what() << '\n';
    return kValidationFailure;
  }
  std::vector<std::size_t> selected;
  for (std::size_t v = 0; v < ds.num_views(); ++v)
    if (!options.view || ds.views[v].name == *options.view) selected.push_back(v);
  if (selected.empty()) {
    err << "error [arguments]: unknown view '" << *options.view << "'\n";
    return kValidationFailure;
  }
  if (options.num_trees < 1) {
    err << "error [arguments]: trees must be positive\n";
    return kValidationFailure;
  }

  try {
    std::filesystem::create_directories(options.output_dir);
    ForestConfig fc;
    fc.num_trees = options.num_trees;
    fc.jobs = options.jobs;
    std::vector<DissimilarityMatrix> per_view;
    for (auto v : selected) {
      fc.seed = view_forest_seed(options.seed, v);
      const auto& view = ds.views[v];
      const auto forest = train_forest(view.features, ds.labels, fc, ds.num_classes());
      const auto leaves = leaf_table(forest, view.features, options.jobs);
      per_view.push_back(build_matrix(leaves, leaves, {}, {}, options.jobs));
      const auto path = options.output_dir / fmt::format("dissimilarity_{}.csv", safe_file_part(view.name));
      const auto& d = per_view.back();
      write_matrix_csv(d.values, d.row_instances, d.column_instances, path);
      out << "wrote " << path.string() << '\n';
    }
    if (!options.view) {
      const auto joint = joint_average(per_view);
      const auto path = options.output_dir / "dissimilarity_joint.csv";
      write_matrix_csv(joint.values, joint.row_instances, joint.column_instances, path);
      out << "wrote " << path.string() << '\n';
    }
    return kSuccess;
  } catch (const std::exception& e) {
    err << "error [dissimilarity]: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

int cmd_validate(const std::filesystem::path& manifest, std::ostream& out, std::ostream& err) {
  const auto report = inspect_dataset(manifest);
  if (!report.dataset) {
    err << "invalid dataset '" << manifest.string() << "':\n";
    for (const auto& e : report.errors) err << "  " << e << '\n';
    return kValidationFailure;
  }
  const auto& ds = *report.dataset;
  out << fmt::format("{}: N={}, Q={}, classes={}\n", ds.name, ds.num_instances(), ds.num_views(), ds.num_classes());
  for (const auto& v : ds.views) out << fmt::format("  view {}: p={}\n", v.name, v.width());
  out << fmt::format("  total features: {}\n", ds.total_features());
  const auto histogram = ds.class_histogram();
  for (std::size_t c = 0; c < histogram.size(); ++c)
    out << fmt::format("  class {} ({}): {}\n", c, ds.class_names[c], histogram[c]);
  return kSuccess;
}

int cmd_generate(const GenerateOptions& options, std::ostream& out, std::ostream& err) {
  try {
    SyntheticSpec spec;
    if (options.shape == "lsvt") spec = lsvt_like_spec(options.seed);
    else if (options.shape == "metabolomic") spec = metabolomic_like_spec(options.seed);
    else if (options.shape == "radiomics") spec = radiomics_like_spec(options.seed);
    else if (options.shape == "small") spec.seed = options.seed;
    else {
      err << "error [arguments]: unknown shape '" << options.shape << "'\n";
      return kValidationFailure;
    }
    if (options.name) spec.name = *options.name;
    const auto ds = make_synthetic(spec);
    const auto manifest = write_dataset(ds, options.output_dir, safe_file_part(ds.name));
    out << "wrote " << manifest.string() << '\n';
    return kSuccess;
  } catch (const std::exception& e) {
    err << "error [generate]: " << e.what() << '\n';
    return kRuntimeFailure;
  }
}

}  // namespace mvrfd::cli
