#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "mvrfd/csv.hpp"
#include "mvrfd/dataset.hpp"
#include "mvrfd/error.hpp"
#include "mvrfd/synthetic.hpp"
#include "support.hpp"

using namespace mvrfd;
using testing::TempDir;
using testing::write_text;

namespace {

void write_small(const TempDir& dir, const std::string& view2 = "u\n5\n6\n7\n8\n",
                 const std::string& labels = "label\na\na\nb\nb\n") {
  write_text(dir / "v1.csv", "x,y\n1,2\n3,4\n5,6\n7,8\n");
  write_text(dir / "v2.csv", view2);
  write_text(dir / "labels.csv", labels);
  write_text(dir / "small.manifest", "# two views\nname = small\nlabels = labels.csv\nview.first = v1.csv\nview.second = v2.csv\n");
}

bool mentions(const std::vector<std::string>& lines, const std::string& needle) {
  return std::any_of(lines.begin(), lines.end(), [&](const auto& l) { return l.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("manifest with two views of four rows loads with first-appearance class encoding") {
  TempDir dir("ds");
  write_small(dir);
  const auto ds = load_dataset(dir / "small.manifest");
  CHECK(ds.name == "small");
  CHECK(ds.num_instances() == 4);
  CHECK(ds.num_views() == 2);
  CHECK(ds.class_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.labels == std::vector<int>{0, 0, 1, 1});
  CHECK(ds.views[0].name == "first");
  CHECK(ds.views[0].feature_names == std::vector<std::string>{"x", "y"});
  CHECK(ds.views[0].features(2, 1) == 6.0);
  CHECK(ds.views[1].features(3, 0) == 8.0);
}

TEST_CASE("labels encode by first appearance, not sorted order") {
  TempDir dir("ds");
  write_small(dir, "u\n5\n6\n7\n8\n", "label\nz\na\nz\na\n");
  const auto ds = load_dataset(dir / "small.manifest");
  CHECK(ds.class_names == std::vector<std::string>{"z", "a"});
  CHECK(ds.labels == std::vector<int>{0, 1, 0, 1});
}

TEST_CASE("CRLF files and quoted headers are accepted") {
  TempDir dir("ds");
  write_text(dir / "v.csv", "\"f,1\",g\r\n1,2\r\n3,4\r\n");
  write_text(dir / "l.csv", "label\r\nyes\r\nno\r\n");
  write_text(dir / "m.manifest", "name = crlf\r\nlabels = l.csv\r\nview.only = v.csv\r\n");
  const auto ds = load_dataset(dir / "m.manifest");
  CHECK(ds.views[0].feature_names[0] == "f,1");
  CHECK(ds.views[0].features(1, 1) == 4.0);
}

TEST_CASE("ingestion errors") {
  TempDir dir("ds");
  SUBCASE("row-count mismatch") {
    write_small(dir, "u\n5\n6\n7\n");
    CHECK_THROWS_AS(load_dataset(dir / "small.manifest"), DataError);
    CHECK(mentions(inspect_dataset(dir / "small.manifest").errors, "3 rows"));
  }
  SUBCASE("missing view file") {
    write_small(dir);
    std::filesystem::remove(dir / "v2.csv");
    CHECK_THROWS_AS(load_dataset(dir / "small.manifest"), DataError);
  }
  SUBCASE("missing manifest") { CHECK_THROWS_AS(load_dataset(dir / "absent.manifest"), DataError); }
  SUBCASE("non-numeric cell") {
    write_small(dir, "u\n5\nfive\n7\n8\n");
    const auto report = inspect_dataset(dir / "small.manifest");
    CHECK_FALSE(report.dataset);
    CHECK(mentions(report.errors, "non-numeric"));
  }
  SUBCASE("NaN cell names row and column") {
    write_small(dir, "u\n5\n6\nnan\n8\n");
    const auto report = inspect_dataset(dir / "small.manifest");
    REQUIRE_FALSE(report.dataset);
    CHECK(mentions(report.errors, "row 2, column 'u'"));
  }
  SUBCASE("empty cell") {
    write_small(dir, "u\n5\n\"\"\n7\n8\n");
    CHECK_THROWS_AS(load_dataset(dir / "small.manifest"), DataError);
  }
  SUBCASE("single class") {
    write_small(dir, "u\n5\n6\n7\n8\n", "label\na\na\na\na\n");
    CHECK(mentions(inspect_dataset(dir / "small.manifest").errors, "at least 2 classes"));
  }
  SUBCASE("empty labels file") {
    write_small(dir, "u\n5\n6\n7\n8\n", "");
    CHECK_FALSE(inspect_dataset(dir / "small.manifest").dataset);
  }
  SUBCASE("duplicate view names") {
    write_small(dir);
    write_text(dir / "small.manifest", "name = d\nlabels = labels.csv\nview.a = v1.csv\nview.a = v2.csv\n");
    CHECK(mentions(inspect_dataset(dir / "small.manifest").errors, "duplicate view"));
  }
  SUBCASE("unknown key") {
    write_small(dir);
    write_text(dir / "small.manifest", "name = d\nlabels = labels.csv\nview.a = v1.csv\ncolour = red\n");
    CHECK(mentions(inspect_dataset(dir / "small.manifest").errors, "unknown key"));
  }
  SUBCASE("every problem is listed") {
    write_small(dir, "u\n5\nx\n7\n");
    write_text(dir / "v1.csv", "x,y\n1,2\n3,inf\n5,6\n7,8\n");
    const auto report = inspect_dataset(dir / "small.manifest");
    CHECK(report.errors.size() >= 2);
  }
}

TEST_CASE("LSVT-shaped synthetic data has the expected shape") {
  const auto ds = make_synthetic(lsvt_like_spec(3));
  CHECK(ds.num_instances() == 126);
  CHECK(ds.num_views() == 4);
  CHECK(ds.total_features() == 309);
  CHECK(ds.num_classes() == 2);
  CHECK(concatenate_views(ds).width() == 309);
  CHECK(ds.violations().empty());
}

TEST_CASE("concatenate_views") {
  SUBCASE("single view is returned unchanged") {
    auto ds = make_synthetic(SyntheticSpec{.view_widths = {5}});
    const auto joined = concatenate_views(ds);
    CHECK(joined.features == ds.views[0].features);
    CHECK(joined.feature_names == ds.views[0].feature_names);
  }
  SUBCASE("every cell lands at its computed position") {
    auto ds = make_synthetic(SyntheticSpec{.view_widths = {3, 2, 4}});
    const auto joined = concatenate_views(ds);
    REQUIRE(joined.width() == 9);
    CHECK(joined.features.rows() == ds.num_instances());
    std::size_t offset = 0;
    for (const auto& view : ds.views) {
      for (std::size_t r = 0; r < ds.num_instances(); ++r)
        for (std::size_t c = 0; c < view.width(); ++c) CHECK(joined.features(r, offset + c) == view.features(r, c));
      offset += view.width();
    }
    CHECK(joined.features(7, 3) == ds.views[1].features(7, 0));
  }
}

TEST_CASE("write then reload reproduces the dataset exactly") {
  TempDir dir("rt");
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    SyntheticSpec spec{.name = "roundtrip", .instances = 40, .view_widths = {3, 5}, .class_weights = {1, 1, 2}, .seed = seed};
    const auto ds = make_synthetic(spec);
    const auto manifest = write_dataset(ds, dir.path() / std::to_string(seed));
    const auto back = load_dataset(manifest);
    CHECK(back == ds);
  }
}

TEST_CASE("stratified_train_counts") {
  CHECK(stratified_train_counts({5, 5}, 0.5) == std::vector<std::size_t>{2, 3});
  CHECK(stratified_train_counts({2, 2}, 0.5) == std::vector<std::size_t>{1, 1});
  CHECK(stratified_train_counts({2, 100}, 0.01) == std::vector<std::size_t>{1, 1});
  CHECK_THROWS_AS(stratified_train_counts({1, 5}, 0.5), DataError);
  CHECK_THROWS_AS(stratified_train_counts({4, 5}, 1.0), ConfigError);
  CHECK_THROWS_AS(stratified_train_counts({4, 5}, 0.0), ConfigError);

  std::mt19937_64 gen(9);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + gen() % 4;
    std::vector<std::size_t> sizes(k);
    for (auto& s : sizes) s = 2 + gen() % 40;
    const double fraction = 0.05 + 0.9 * std::uniform_real_distribution<double>()(gen);
    // Away from the clamp every class can absorb its share of the correction in one step.
    const bool roomy = fraction >= 0.2 && fraction <= 0.8 &&
                       std::all_of(sizes.begin(), sizes.end(), [](std::size_t s) { return s >= 10; });
    const auto counts = stratified_train_counts(sizes, fraction);
    const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    bool total_reachable = true;
    for (std::size_t c = 0; c < k; ++c) {
      const auto rounded = std::clamp<double>(std::round(fraction * static_cast<double>(sizes[c])), 1.0,
                                              static_cast<double>(sizes[c] - 1));
      CHECK(counts[c] >= 1);
      CHECK(counts[c] <= sizes[c] - 1);
      if (roomy) CHECK(std::abs(static_cast<double>(counts[c]) - rounded) <= 1.0);
      total_reachable = total_reachable && sizes[c] > 2;
    }
    const auto target = static_cast<std::size_t>(std::round(fraction * static_cast<double>(n)));
    if (total_reachable && target >= k && target <= n - k) CHECK(total == target);
  }
}

TEST_CASE("split plan on ten balanced instances") {
  MultiViewDataset ds;
  ds.name = "ten";
  ds.class_names = {"a", "b"};
  ds.labels = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  ds.views.push_back(View{"v", Matrix(10, 1, 1.0), {"f"}});
  const auto plan = make_split_plan(ds, 10, 0.5, 7);
  REQUIRE(plan.repetitions.size() == 10);
  for (const auto& split : plan.repetitions) {
    CHECK(split.train.size() == 5);
    CHECK(split.test.size() == 5);
    std::size_t train_a = 0;
    for (auto i : split.train) train_a += ds.labels[i] == 0;
    CHECK(train_a >= 2);
    CHECK(train_a <= 3);
  }
  CHECK(make_split_plan(ds, 10, 0.5, 7) == plan);
  CHECK_FALSE(make_split_plan(ds, 10, 0.5, 8) == plan);
}

TEST_CASE("split plan properties on random datasets") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticSpec spec{.instances = 20 + seed * 3, .view_widths = {2}, .class_weights = {1.0, 2.0, 0.5 + 0.1 * double(seed)}, .seed = seed};
    const auto ds = make_synthetic(spec);
    const auto hist = ds.class_histogram();
    const auto quota = stratified_train_counts(hist, 0.5);
    const auto plan = make_split_plan(ds, 10, 0.5, seed);
    std::set<std::vector<std::size_t>> distinct;
    for (const auto& split : plan.repetitions) {
      CHECK(std::is_sorted(split.train.begin(), split.train.end()));
      CHECK(std::is_sorted(split.test.begin(), split.test.end()));
      std::vector<std::size_t> all = split.train;
      all.insert(all.end(), split.test.begin(), split.test.end());
      std::sort(all.begin(), all.end());
      std::vector<std::size_t> expected(ds.num_instances());
      std::iota(expected.begin(), expected.end(), 0);
      CHECK(all == expected);
      std::vector<std::size_t> per_class(hist.size(), 0);
      for (auto i : split.train) ++per_class[static_cast<std::size_t>(ds.labels[i])];
      CHECK(per_class == quota);
      distinct.insert(split.train);
    }
    CHECK(distinct.size() > 1);
  }
}

TEST_CASE("split plan export") {
  TempDir dir("sp");
  auto ds = make_synthetic(SyntheticSpec{.instances = 12});
  const auto plan = make_split_plan(ds, 2, 0.5, 1);
  write_split_plan(plan, dir / "plan.csv");
  const auto rows = csv::read_file(dir / "plan.csv");
  REQUIRE(rows.size() == 1 + 2 * 12);
  CHECK(rows[0] == csv::Row{"repetition", "instance_index", "role"});
  std::size_t train = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) train += rows[r][2] == "train";
  CHECK(train == plan.repetitions[0].train.size() + plan.repetitions[1].train.size());
}

TEST_CASE("csv number parsing") {
  CHECK(csv::parse_double(" 1.5 ", "x") == 1.5);
  CHECK(csv::parse_double("+2e3", "x") == 2000.0);
  CHECK_THROWS_AS(csv::parse_double("", "x"), DataError);
  CHECK_THROWS_AS(csv::parse_double("1.5abc", "x"), DataError);
  CHECK_THROWS_AS(csv::parse_double("inf", "x"), DataError);
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123})
    CHECK(csv::parse_double(csv::format_double(v), "x") == v);
}
