#include "mvrfd/pipelines.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include <fmt/core.h>

#include "mvrfd/error.hpp"
#include "mvrfd/rng.hpp"

namespace mvrfd {
namespace {

// Seed streams, one per independently trained component of a split.
constexpr std::uint64_t kRelfForestStream = 1;
constexpr std::uint64_t kRfeForestStream = 2;
constexpr std::uint64_t kDissimilaritySpaceStream = 3;
constexpr std::uint64_t kCvStream = 4;
constexpr std::uint64_t kViewForestStream = 100;

struct MethodNames {
  MethodId id;
  std::string_view key;
  std::string_view label;
};

constexpr std::array<MethodNames, 6> kNames{{
    {MethodId::RelfRf, "relf_rf", "RELF+RF"},
    {MethodId::SvmrfeRf, "svmrfe_rf", "SVMRFE+RF"},
    {MethodId::Rfsvm, "rfsvm", "RFSVM"},
    {MethodId::Rfdis, "rfdis", "RFDIS"},
    {MethodId::LateRf, "late_rf", "LateRF"},
    {MethodId::LateRfdis, "late_rfdis", "LateRFDIS"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

ForestConfig forest_config(const PipelineConfig& config, std::uint64_t seed) {
  ForestConfig fc = config.forest;
  fc.seed = seed;
  fc.jobs = config.jobs;
  return fc;
}

PipelineResult start_result(MethodId method, const MultiViewDataset& ds, const Split& split) {
  PipelineResult r;
  r.method = method;
  r.test_indices = split.test;
  r.true_labels = gather_labels(ds.labels, split.test);
  return r;
}

void finish(PipelineResult& r) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < r.predictions.size(); ++i)
    if (r.predictions[i] == r.true_labels[i]) ++correct;
  r.accuracy = r.predictions.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(r.predictions.size());
}

PipelineResult run_selection_rf(MethodId method, const MultiViewDataset& ds, const Split& split,
                                const PipelineConfig& config) {
  auto result = start_result(method, ds, split);
  const auto all = concatenate_views(ds);
  const auto train = all.features.select_rows(split.train);
  const auto test = all.features.select_rows(split.test);
  const auto train_labels = gather_labels(ds.labels, split.train);

  FeatureRanking ranking;
  std::uint64_t stream = 0;
  if (method == MethodId::RelfRf) {
    ranking = relief_scores(train, train_labels, relief_neighbors_for(train_labels, config.relief_neighbors), config.jobs);
    stream = kRelfForestStream;
  } else {
    ranking = svmrfe_rank(train, train_labels, config.rfe_c);
    stream = kRfeForestStream;
  }
  const auto count = select_count(all.width());
  result.selected_count = count;
  result.selected_features = top_features(ranking, count);
  const auto forest = train_forest(train.select_columns(result.selected_features), train_labels,
                                   forest_config(config, derive_seed(config.seed, stream)), ds.num_classes());
  result.predictions = forest.predict(test.select_columns(result.selected_features));
  result.representation_width = count;

  Fingerprint fp;
  for (auto f : result.selected_features) fp.add(static_cast<std::uint64_t>(f));
  fp.add(forest);
  result.model_fingerprint = fp.value();
  finish(result);
  return result;
}

// Forest trained on a dissimilarity space. Group 0 is the joint matrix and also
// view 0's own matrix, so with a single view RFDIS and LateRFDIS coincide.
std::uint64_t dissimilarity_space_seed(std::uint64_t seed, std::size_t group) {
  return derive_seed(derive_seed(seed, kDissimilaritySpaceStream), group);
}

std::uint64_t checksum(const DissimilarityMatrix& d) {
  Fingerprint fp;
  fp.add(d.values);
  return fp.value();
}

}  // namespace

std::string_view method_key(MethodId method) {
  for (const auto& n : kNames)
    if (n.id == method) return n.key;
  return "unknown";
}

std::string_view method_label(MethodId method) {
  for (const auto& n : kNames)
    if (n.id == method) return n.label;
  return "unknown";
}

MethodId parse_method(std::string_view text) {
  const auto wanted = lower(text);
  for (const auto& n : kNames)
    if (wanted == n.key || wanted == lower(n.label)) return n.id;
  throw ConfigError(fmt::format("unknown method '{}'", text));
}

std::vector<MethodId> parse_method_list(std::string_view text) {
  if (lower(text) == "all") return {kAllMethods.begin(), kAllMethods.end()};
  std::vector<MethodId> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find(',', start);
    if (end == std::string_view::npos) end = text.size();
    auto item = text.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      const auto m = parse_method(item);
      if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    start = end + 1;
  }
  if (out.empty()) throw ConfigError("method list is empty");
  return out;
}

std::uint64_t view_forest_seed(std::uint64_t seed, std::size_t view) {
  return derive_seed(seed, kViewForestStream + view);
}

SplitWorkspace::SplitWorkspace(const MultiViewDataset& ds, const Split& split, const PipelineConfig& config)
    : ds_(ds), split_(split), config_(config), train_labels_(gather_labels(ds.labels, split.train)) {
  if (split_.train.empty() || split_.test.empty()) throw ConfigError("split needs non-empty train and test parts");
  for (auto i : split_.train)
    if (i >= ds.num_instances()) throw ConfigError(fmt::format("train index {} out of range", i));
  for (auto i : split_.test)
    if (i >= ds.num_instances()) throw ConfigError(fmt::format("test index {} out of range", i));
}

void SplitWorkspace::ensure_views() {
  if (built_) return;
  const auto q = ds_.num_views();
  forests_.reserve(q);
  for (std::size_t v = 0; v < q; ++v) {
    const auto& view = ds_.views[v];
    const auto train_rows = view.features.select_rows(split_.train);
    const auto test_rows = view.features.select_rows(split_.test);
    forests_.push_back(train_forest(train_rows, train_labels_, forest_config(config_, view_forest_seed(config_.seed, v)),
                                    ds_.num_classes()));
    const auto train_leaves = leaf_table(forests_.back(), train_rows, config_.jobs);
    const auto test_leaves = leaf_table(forests_.back(), test_rows, config_.jobs);
    train_d_.push_back(build_matrix(train_leaves, train_leaves, split_.train, split_.train, config_.jobs));
    test_d_.push_back(build_matrix(test_leaves, train_leaves, split_.test, split_.train, config_.jobs));
  }
  built_ = true;
}

bool SplitWorkspace::acquire_view_forests() {
  const bool reused = built_;
  if (reused) ++reuse_count_;
  ensure_views();
  return reused;
}

const Forest& SplitWorkspace::view_forest(std::size_t view) {
  ensure_views();
  return forests_.at(view);
}

const DissimilarityMatrix& SplitWorkspace::train_dissimilarity(std::size_t view) {
  ensure_views();
  return train_d_.at(view);
}

const DissimilarityMatrix& SplitWorkspace::test_dissimilarity(std::size_t view) {
  ensure_views();
  return test_d_.at(view);
}

const DissimilarityMatrix& SplitWorkspace::joint_train() {
  ensure_views();
  if (!joint_train_) joint_train_ = joint_average(train_d_);
  return *joint_train_;
}

const DissimilarityMatrix& SplitWorkspace::joint_test() {
  ensure_views();
  if (!joint_test_) joint_test_ = joint_average(test_d_);
  return *joint_test_;
}

PipelineResult run_relf_rf(const MultiViewDataset& ds, const Split& split, const PipelineConfig& config) {
  return run_selection_rf(MethodId::RelfRf, ds, split, config);
}

PipelineResult run_svmrfe_rf(const MultiViewDataset& ds, const Split& split, const PipelineConfig& config) {
  return run_selection_rf(MethodId::SvmrfeRf, ds, split, config);
}

PipelineResult run_rfsvm(SplitWorkspace& ws) {
  auto result = start_result(MethodId::Rfsvm, ws.dataset(), ws.split());
  result.reused_view_forests = ws.acquire_view_forests();
  const auto& joint = ws.joint_train();
  const auto kernel = to_similarity(joint);
  const auto& config = ws.config();
  const auto selection =
      select_c_detailed(kernel.values, ws.train_labels(), config.c_grid, derive_seed(config.seed, kCvStream));
  result.chosen_c = selection.c;
  result.cv_accuracy = selection.cv_accuracy;
  const auto model = train_svm(kernel, ws.train_labels(), selection.c);

  const auto test_kernel = to_similarity(ws.joint_test());
  result.predictions.reserve(test_kernel.values.rows());
  for (std::size_t i = 0; i < test_kernel.values.rows(); ++i)
    result.predictions.push_back(model.predict(test_kernel.values.row(i)));
  result.representation_width = joint.values.cols();
  result.joint_checksum = checksum(joint);

  Fingerprint fp;
  for (std::size_t v = 0; v < ws.dataset().num_views(); ++v) fp.add(ws.view_forest(v));
  fp.add(selection.c);
  fp.add(model);
  result.model_fingerprint = fp.value();
  finish(result);
  return result;
}

PipelineResult run_rfdis(SplitWorkspace& ws) {
  auto result = start_result(MethodId::Rfdis, ws.dataset(), ws.split());
  result.reused_view_forests = ws.acquire_view_forests();
  const auto& joint = ws.joint_train();
  const auto& config = ws.config();
  const auto forest = train_forest(joint.values, ws.train_labels(),
                                   forest_config(config, dissimilarity_space_seed(config.seed, 0)),
                                   ws.dataset().num_classes());
  result.predictions = forest.predict(ws.joint_test().values);
  result.representation_width = joint.values.cols();
  result.joint_checksum = checksum(joint);

  Fingerprint fp;
  for (std::size_t v = 0; v < ws.dataset().num_views(); ++v) fp.add(ws.view_forest(v));
  fp.add(forest);
  result.model_fingerprint = fp.value();
  finish(result);
  return result;
}

PipelineResult run_late_rf(SplitWorkspace& ws) {
  auto result = start_result(MethodId::LateRf, ws.dataset(), ws.split());
  result.reused_view_forests = ws.acquire_view_forests();
  const auto& ds = ws.dataset();
  Fingerprint fp;
  for (std::size_t v = 0; v < ds.num_views(); ++v) {
    const auto& forest = ws.view_forest(v);
    result.view_predictions.push_back(forest.predict(ds.views[v].features.select_rows(ws.split().test)));
    fp.add(forest);
  }
  result.predictions = plurality_vote(result.view_predictions, ds.num_classes());
  result.model_fingerprint = fp.value();
  finish(result);
  return result;
}

PipelineResult run_late_rfdis(SplitWorkspace& ws) {
  auto result = start_result(MethodId::LateRfdis, ws.dataset(), ws.split());
  result.reused_view_forests = ws.acquire_view_forests();
  const auto& ds = ws.dataset();
  const auto& config = ws.config();
  Fingerprint fp;
  for (std::size_t v = 0; v < ds.num_views(); ++v) {
    const auto& train = ws.train_dissimilarity(v);
    const auto forest = train_forest(train.values, ws.train_labels(),
                                     forest_config(config, dissimilarity_space_seed(config.seed, v)),
                                     ds.num_classes());
    result.view_predictions.push_back(forest.predict(ws.test_dissimilarity(v).values));
    result.representation_width = train.values.cols();
    fp.add(ws.view_forest(v));
    fp.add(forest);
  }
  result.predictions = plurality_vote(result.view_predictions, ds.num_classes());
  result.model_fingerprint = fp.value();
  finish(result);
  return result;
}

PipelineResult run_method(MethodId method, SplitWorkspace& ws) {
  switch (method) {
    case MethodId::RelfRf:
      return run_relf_rf(ws.dataset(), ws.split(), ws.config());
    case MethodId::SvmrfeRf:
      return run_svmrfe_rf(ws.dataset(), ws.split(), ws.config());
    case MethodId::Rfsvm:
      return run_rfsvm(ws);
    case MethodId::Rfdis:
      return run_rfdis(ws);
    case MethodId::LateRf:
      return run_late_rf(ws);
    case MethodId::LateRfdis:
      return run_late_rfdis(ws);
  }
  throw ConfigError("unknown method");
}

PipelineResult run_method(MethodId method, const MultiViewDataset& ds, const Split& split,
                          const PipelineConfig& config) {
  SplitWorkspace ws(ds, split, config);
  return run_method(method, ws);
}

std::vector<int> plurality_vote(const std::vector<std::vector<int>>& votes, std::size_t num_classes) {
  if (votes.empty()) return {};
  const auto n = votes.front().size();
  std::vector<int> out(n);
  std::vector<std::size_t> tally(num_classes);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(tally.begin(), tally.end(), 0);
    for (const auto& v : votes) ++tally.at(static_cast<std::size_t>(v.at(i)));
    out[i] = static_cast<int>(std::max_element(tally.begin(), tally.end()) - tally.begin());
  }
  return out;
}

void Fingerprint::add_bytes(const void* data, std::size_t size) noexcept {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash_ ^= bytes[i];
    hash_ *= 0x100000001b3ULL;
  }
}

void Fingerprint::add(const Forest& forest) {
  std::ostringstream text;
  forest.save(text);
  add(std::string_view(text.str()));
}

void Fingerprint::add(const Matrix& m) noexcept {
  add(static_cast<std::uint64_t>(m.rows()));
  add(static_cast<std::uint64_t>(m.cols()));
  add_bytes(m.values().data(), m.values().size() * sizeof(double));
}

void Fingerprint::add(const SvmModel& model) noexcept {
  add(model.c);
  for (const auto& coef : model.dual_coefficients) add_bytes(coef.data(), coef.size() * sizeof(double));
  add_bytes(model.biases.data(), model.biases.size() * sizeof(double));
}

}  // namespace mvrfd
