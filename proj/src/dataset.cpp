#include "mvrfd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <fmt/core.h>

#include "mvrfd/csv.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/rng.hpp"

namespace mvrfd {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

struct Manifest {
  std::string name;
  std::filesystem::path labels;
  std::vector<std::pair<std::string, std::filesystem::path>> views;
};

Manifest parse_manifest(const std::filesystem::path& path, std::vector<std::string>& errors) {
  Manifest manifest;
  std::ifstream in(path);
  if (!in) {
    errors.push_back(fmt::format("cannot open manifest '{}'", path.string()));
    return manifest;
  }
  const auto base = path.parent_path();
  std::set<std::string> seen_views;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      errors.push_back(fmt::format("manifest line {}: expected 'key = value'", line_no));
      continue;
    }
    const auto key = trim(std::string_view(text).substr(0, eq));
    const auto value = trim(std::string_view(text).substr(eq + 1));
    if (key == "name") {
      manifest.name = value;
    } else if (key == "labels") {
      manifest.labels = base / value;
    } else if (key.starts_with("view.") && key.size() > 5) {
      auto view_name = key.substr(5);
      if (!seen_views.insert(view_name).second) {
        errors.push_back(fmt::format("duplicate view name '{}'", view_name));
        continue;
      }
      manifest.views.emplace_back(std::move(view_name), base / value);
    } else {
      errors.push_back(fmt::format("manifest line {}: unknown key '{}'", line_no, key));
    }
  }
  if (manifest.name.empty()) manifest.name = path.stem().string();
  if (manifest.labels.empty()) errors.push_back("manifest has no 'labels' entry");
  if (manifest.views.empty()) errors.push_back("manifest lists no views");
  return manifest;
}

std::optional<View> read_view(const std::string& name, const std::filesystem::path& path,
                              std::vector<std::string>& errors) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::read_file(path);
  } catch (const DataError& e) {
    errors.push_back(fmt::format("view '{}': {}", name, e.what()));
    return std::nullopt;
  }
  if (rows.empty()) {
    errors.push_back(fmt::format("view '{}': file '{}' is empty", name, path.string()));
    return std::nullopt;
  }
  View view;
  view.name = name;
  view.feature_names = rows.front();
  const auto width = view.feature_names.size();
  view.features = Matrix(rows.size() - 1, width);
  bool ok = true;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != width) {
      errors.push_back(fmt::format("view '{}': row {} has {} cells, header has {}", name, r - 1, row.size(), width));
      ok = false;
      continue;
    }
    for (std::size_t c = 0; c < width; ++c) {
      try {
        view.features(r - 1, c) =
            csv::parse_double(row[c], fmt::format("view '{}', row {}, column '{}'", name, r - 1, view.feature_names[c]));
      } catch (const DataError& e) {
        errors.emplace_back(e.what());
        ok = false;
      }
    }
  }
  if (!ok) return std::nullopt;
  return view;
}

}  // namespace

std::size_t MultiViewDataset::total_features() const noexcept {
  std::size_t total = 0;
  for (const auto& v : views) total += v.width();
  return total;
}

std::vector<std::size_t> MultiViewDataset::class_histogram() const {
  std::vector<std::size_t> counts(num_classes(), 0);
  for (int y : labels)
    if (y >= 0 && static_cast<std::size_t>(y) < counts.size()) ++counts[static_cast<std::size_t>(y)];
  return counts;
}

std::vector<std::string> MultiViewDataset::violations() const {
  std::vector<std::string> out;
  const auto n = num_instances();
  if (views.empty()) out.emplace_back("dataset has no views");
  if (n == 0) out.emplace_back("dataset has no instances");
  std::set<std::string> names;
  for (const auto& view : views) {
    if (!names.insert(view.name).second) out.push_back(fmt::format("duplicate view name '{}'", view.name));
    if (view.features.rows() != n)
      out.push_back(fmt::format("view '{}' has {} rows, labels have {}", view.name, view.features.rows(), n));
    if (view.width() == 0) out.push_back(fmt::format("view '{}' has no features", view.name));
    if (view.feature_names.size() != view.width())
      out.push_back(fmt::format("view '{}' has {} feature names for {} columns", view.name, view.feature_names.size(),
                                view.width()));
    for (std::size_t r = 0; r < view.features.rows(); ++r)
      for (std::size_t c = 0; c < view.width(); ++c)
        if (!std::isfinite(view.features(r, c)))
          out.push_back(fmt::format("view '{}', row {}, column {}: non-finite value", view.name, r, c));
  }
  if (num_classes() < 2) out.push_back(fmt::format("need at least 2 classes, found {}", num_classes()));
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes())
      out.push_back(fmt::format("label {} of instance {} outside [0, {})", labels[i], i, num_classes()));
  return out;
}

void MultiViewDataset::validate() const {
  const auto problems = violations();
  if (problems.empty()) return;
  std::string message = fmt::format("dataset '{}' is invalid:", name);
  for (const auto& p : problems) message += "\n  " + p;
  throw DataError(message);
}

LoadReport inspect_dataset(const std::filesystem::path& manifest_path) {
  LoadReport report;
  auto& errors = report.errors;
  const auto manifest = parse_manifest(manifest_path, errors);

  MultiViewDataset ds;
  ds.name = manifest.name;

  if (!manifest.labels.empty()) {
    try {
      const auto rows = csv::read_file(manifest.labels);
      if (rows.empty()) {
        errors.push_back(fmt::format("labels file '{}' is empty", manifest.labels.string()));
      } else {
        if (rows.front().size() != 1 || trim(rows.front().front()) != "label")
          errors.emplace_back("labels file must have a single column with header 'label'");
        std::map<std::string, int> codes;
        for (std::size_t r = 1; r < rows.size(); ++r) {
          const auto text = rows[r].empty() ? std::string{} : trim(rows[r].front());
          if (rows[r].size() != 1 || text.empty()) {
            errors.push_back(fmt::format("labels row {}: expected one non-empty cell", r - 1));
            continue;
          }
          auto [it, inserted] = codes.emplace(text, static_cast<int>(ds.class_names.size()));
          if (inserted) ds.class_names.push_back(text);
          ds.labels.push_back(it->second);
        }
        if (ds.labels.empty()) errors.emplace_back("labels file has no data rows");
      }
    } catch (const DataError& e) {
      errors.emplace_back(e.what());
    }
  }

  for (const auto& [view_name, path] : manifest.views) {
    if (auto view = read_view(view_name, path, errors)) ds.views.push_back(std::move(*view));
  }

  if (errors.empty()) {
    auto problems = ds.violations();
    errors.insert(errors.end(), problems.begin(), problems.end());
  }
  if (errors.empty()) report.dataset = std::move(ds);
  return report;
}

MultiViewDataset load_dataset(const std::filesystem::path& manifest_path) {
  auto report = inspect_dataset(manifest_path);
  if (!report.dataset) {
    std::string message = fmt::format("failed to load '{}':", manifest_path.string());
    for (const auto& e : report.errors) message += "\n  " + e;
    throw DataError(message);
  }
  return std::move(*report.dataset);
}

std::filesystem::path write_dataset(const MultiViewDataset& ds, const std::filesystem::path& dir,
                                    const std::string& file_stem) {
  std::filesystem::create_directories(dir);
  const auto manifest_path = dir / (file_stem + ".manifest");
  std::ofstream manifest(manifest_path);
  manifest << "name = " << ds.name << "\n";
  const auto labels_file = file_stem + "_labels.csv";
  manifest << "labels = " << labels_file << "\n";
  {
    std::ofstream labels(dir / labels_file);
    labels << "label\n";
    for (int y : ds.labels) labels << csv::escape(ds.class_names[static_cast<std::size_t>(y)]) << "\n";
  }
  for (const auto& view : ds.views) {
    const auto view_file = fmt::format("{}_{}.csv", file_stem, view.name);
    manifest << "view." << view.name << " = " << view_file << "\n";
    std::ofstream out(dir / view_file);
    out << csv::join(view.feature_names) << "\n";
    for (std::size_t r = 0; r < view.features.rows(); ++r) {
      std::string line;
      for (std::size_t c = 0; c < view.width(); ++c) {
        if (c > 0) line.push_back(',');
        line += csv::format_double(view.features(r, c));
      }
      out << line << "\n";
    }
  }
  if (!manifest) throw Error(fmt::format("failed writing '{}'", manifest_path.string()));
  return manifest_path;
}

View concatenate_views(const MultiViewDataset& ds) {
  View out;
  out.name = "concatenated";
  const auto n = ds.num_instances();
  out.features = Matrix(n, ds.total_features());
  std::size_t offset = 0;
  for (const auto& view : ds.views) {
    for (std::size_t r = 0; r < n; ++r) {
      auto src = view.features.row(r);
      std::copy(src.begin(), src.end(), out.features.row(r).begin() + static_cast<std::ptrdiff_t>(offset));
    }
    out.feature_names.insert(out.feature_names.end(), view.feature_names.begin(), view.feature_names.end());
    offset += view.width();
  }
  if (ds.views.size() == 1) out.name = ds.views.front().name;
  return out;
}

std::vector<int> gather_labels(const std::vector<int>& labels, std::span<const std::size_t> indices) {
  std::vector<int> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels[i]);
  return out;
}

std::vector<std::size_t> stratified_train_counts(const std::vector<std::size_t>& class_sizes, double train_fraction) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError(fmt::format("train fraction must lie in (0, 1), got {}", train_fraction));
  std::vector<std::size_t> quota(class_sizes.size());
  std::size_t total = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const auto size = class_sizes[c];
    if (size < 2) throw DataError(fmt::format("class {} has {} member(s); stratified splitting needs at least 2", c, size));
    const auto rounded = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(size)));
    quota[c] = std::clamp<std::size_t>(rounded, 1, size - 1);
    total += size;
  }
  const auto target = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(total)));

  // Largest classes first; stable so equal sizes keep class order.
  std::vector<std::size_t> by_size(class_sizes.size());
  std::iota(by_size.begin(), by_size.end(), 0);
  std::stable_sort(by_size.begin(), by_size.end(),
                   [&](std::size_t a, std::size_t b) { return class_sizes[a] > class_sizes[b]; });

  auto assigned = std::accumulate(quota.begin(), quota.end(), std::size_t{0});
  while (assigned != target) {
    bool moved = false;
    for (auto c : by_size) {
      if (assigned == target) break;
      if (assigned < target && quota[c] + 1 <= class_sizes[c] - 1) {
        ++quota[c];
        ++assigned;
        moved = true;
      } else if (assigned > target && quota[c] > 1) {
        --quota[c];
        --assigned;
        moved = true;
      }
    }
    if (!moved) break;
  }
  return quota;
}

SplitPlan make_split_plan(const MultiViewDataset& ds, std::size_t repetitions, double train_fraction,
                          std::uint64_t seed) {
  if (repetitions == 0) throw ConfigError("repetitions must be positive");
  const auto histogram = ds.class_histogram();
  const auto quota = stratified_train_counts(histogram, train_fraction);

  std::vector<std::vector<std::size_t>> members(ds.num_classes());
  for (std::size_t i = 0; i < ds.num_instances(); ++i) members[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  SplitPlan plan;
  plan.train_fraction = train_fraction;
  plan.seed = seed;
  for (std::size_t r = 0; r < repetitions; ++r) {
    Rng rng(derive_seed(seed, r));
    Split split;
    for (std::size_t c = 0; c < members.size(); ++c) {
      auto pool = members[c];
      rng.shuffle(std::span<std::size_t>(pool));
      split.train.insert(split.train.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]));
      split.test.insert(split.test.end(), pool.begin() + static_cast<std::ptrdiff_t>(quota[c]), pool.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    plan.repetitions.push_back(std::move(split));
  }
  return plan;
}

void write_split_plan(const SplitPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  out << "repetition,instance_index,role\n";
  for (std::size_t r = 0; r < plan.repetitions.size(); ++r) {
    const auto& split = plan.repetitions[r];
    // One row per instance, ordered by instance index.
    std::size_t a = 0, b = 0;
    while (a < split.train.size() || b < split.test.size()) {
      if (b == split.test.size() || (a < split.train.size() && split.train[a] < split.test[b]))
        out << r << ',' << split.train[a++] << ",train\n";
      else
        out << r << ',' << split.test[b++] << ",test\n";
    }
  }
}

}  // namespace mvrfd
