// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "../qp_reference.hpp"
#include "../support.hpp"
#include "mvrfd/dissimilarity.hpp"
#include "mvrfd/evaluation.hpp"
#include "mvrfd/feature_selection.hpp"
#include "mvrfd/rng.hpp"
#include "mvrfd/svm.hpp"
#include "mvrfd/synthetic.hpp"

using namespace mvrfd;
using Clock = std::chrono::steady_clock;

namespace {

const std::filesystem::path kFixtures = MVRFD_FIXTURE_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;

  void expect(bool ok, const std::string& what) {
    if (ok) return;
    pass = false;
    if (failures.size() < 5) failures.push_back(what);
  }
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

int run_cli(const std::string& args, const std::filesystem::path& log) {
  const auto cmd = std::string("\"") + MVRFD_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string quoted(const std::filesystem::path& p) { return "\"" + p.string() + "\""; }

// Per-view matrices sit on the 1/M grid. The joint matrix of Q views equals
// the dissimilarity of the pooled Q*M-tree ensemble, so it sits on 1/(Q*M).
void check_workspace_matrices(SplitWorkspace& ws, std::size_t trees, const std::string& tag, Outcome& out) {
  const auto q = ws.dataset().num_views();
  auto expect_valid = [&](const DissimilarityMatrix& d, std::size_t grid, const std::string& what) {
    const auto problems = check_dissimilarity(d, grid);
    out.expect(problems.empty(), fmt::format("{} {}: {}", tag, what, problems.empty() ? "" : problems.front()));
  };
  for (std::size_t v = 0; v < q; ++v) {
    const auto& train = ws.train_dissimilarity(v);
    out.expect(train.same_axes() && train.values.rows() == train.values.cols(), tag + " train matrix is not square");
    expect_valid(train, trees, fmt::format("view {} train", v));
    expect_valid(ws.test_dissimilarity(v), trees, fmt::format("view {} test", v));
  }
  expect_valid(ws.joint_train(), q * trees, "joint train");
  expect_valid(ws.joint_test(), q * trees, "joint test");
}

void leakage_check(const MultiViewDataset& ds, const Split& split, const PipelineConfig& cfg, std::uint64_t shuffle_seed,
                   const std::string& tag, Outcome& out) {
  auto mutated = ds;
  std::vector<int> test_labels;
  for (auto i : split.test) test_labels.push_back(ds.labels[i]);
  std::mt19937_64 gen(shuffle_seed);
  std::shuffle(test_labels.begin(), test_labels.end(), gen);
  // A shuffle can leave every label in place on tiny or constant test sets.
  std::reverse(test_labels.begin(), test_labels.end());
  for (std::size_t t = 0; t < split.test.size(); ++t) mutated.labels[split.test[t]] = test_labels[t];
  if (mutated.labels == ds.labels) {
    for (auto i : split.test) mutated.labels[i] = (mutated.labels[i] + 1) % static_cast<int>(ds.num_classes());
  }

  SplitWorkspace clean_ws(ds, split, cfg);
  SplitWorkspace dirty_ws(mutated, split, cfg);
  for (auto m : kAllMethods) {
    const auto clean = run_method(m, clean_ws);
    const auto dirty = run_method(m, dirty_ws);
    const auto name = fmt::format("{} {}", tag, method_label(m));
    out.expect(clean.model_fingerprint == dirty.model_fingerprint, name + ": trained parameters changed");
    out.expect(clean.selected_features == dirty.selected_features, name + ": selected features changed");
    out.expect(clean.chosen_c == dirty.chosen_c && clean.cv_accuracy == dirty.cv_accuracy, name + ": C selection changed");
    out.expect(clean.predictions == dirty.predictions, name + ": predictions changed");
  }
}

// 1. Matrix invariants on random multi-view data.
Outcome matrix_invariants() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 gen(1001);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  std::size_t matrices = 0;
  for (int trial = 0; trial < 50; ++trial) {
    SyntheticSpec spec;
    spec.instances = pick(16, 60);
    spec.view_widths.resize(pick(1, 4));
    for (auto& w : spec.view_widths) w = pick(1, 12);
    spec.class_weights.assign(pick(2, 3), 1.0);
    spec.seed = gen();
    const auto ds = make_synthetic(spec);
    const auto trees = pick(1, 50);
    PipelineConfig cfg;
    cfg.forest.num_trees = trees;
    cfg.seed = gen();
    const auto plan = make_split_plan(ds, 1, 0.5, gen());
    SplitWorkspace ws(ds, plan.repetitions[0], cfg);
    check_workspace_matrices(ws, trees, fmt::format("dataset {}", trial), out);
    matrices += 2 * ds.num_views() + 2;
  }
  const double secs = seconds_since(start);
  out.expect(secs < 60.0, fmt::format("took {:.1f} s", secs));
  out.detail = fmt::format("{} matrices on 50 datasets, {:.1f} s", matrices, secs);
  return out;
}

// 2. build_matrix against explicit leaf-assignment tables.
Outcome brute_force_oracle() {
  Outcome out;
  std::mt19937_64 gen(2002);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = pick(4, 20);
    const auto p = pick(1, 6);
    const auto trees = pick(1, 5);
    auto x = testing::random_matrix(n, p, gen);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
    std::shuffle(y.begin(), y.end(), gen);
    ForestConfig fc;
    fc.num_trees = trees;
    fc.seed = gen();
    const auto forest = train_forest(x, y, fc, 2);
    const auto queries = testing::random_matrix(pick(1, 20), p, gen);

    auto assignments = [&](const Matrix& m) {
      std::vector<std::vector<std::size_t>> table(trees, std::vector<std::size_t>(m.rows()));
      for (std::size_t k = 0; k < trees; ++k)
        for (std::size_t i = 0; i < m.rows(); ++i) table[k][i] = forest.trees()[k].leaf_index(m.row(i));
      return table;
    };
    const auto train_leaves = assignments(x);
    const auto query_leaves = assignments(queries);
    auto oracle = [&](const auto& rows, std::size_t nr, const auto& cols, std::size_t nc) {
      Matrix d(nr, nc);
      for (std::size_t i = 0; i < nr; ++i)
        for (std::size_t j = 0; j < nc; ++j) {
          std::size_t differ = 0;
          for (std::size_t k = 0; k < trees; ++k) differ += rows[k][i] != cols[k][j];
          d(i, j) = static_cast<double>(differ) / static_cast<double>(trees);
        }
      return d;
    };
    out.expect(build_matrix(forest, x, x).values == oracle(train_leaves, n, train_leaves, n),
               fmt::format("case {}: train x train differs", trial));
    out.expect(build_matrix(forest, queries, x).values == oracle(query_leaves, queries.rows(), train_leaves, n),
               fmt::format("case {}: query x train differs", trial));
  }
  out.detail = "100 forests, train x train and query x train, exact";
  return out;
}

// 3. SMO against an independent projected-gradient QP solver.
Outcome svm_solver() {
  Outcome out;
  const auto start = Clock::now();
  std::mt19937_64 gen(3003);
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(gen); };
  const std::vector<double> cs{0.1, 1.0, 10.0};
  double worst_gap = 0.0;
  std::size_t compared = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const auto n = pick(4, 15);
    const auto dims = pick(1, 4);
    auto points = testing::random_matrix(n, dims, gen);
    std::vector<int> y(n), signs(n);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(i % 2);
      signs[i] = y[i] == 0 ? 1 : -1;
      points(i, 0) += 0.8 * signs[i];
    }
    const auto probes = testing::random_matrix(40, dims, gen);
    auto gram = [](const Matrix& a, const Matrix& b) {
      Matrix k(a.rows(), b.rows());
      for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j)
          for (std::size_t d = 0; d < a.cols(); ++d) k(i, j) += a(i, d) * b(j, d);
      return k;
    };
    const auto kernel = gram(points, points);
    const auto probe_kernel = gram(probes, points);
    const double c = cs[pick(0, 2)];

    const auto model = train_svm(kernel, y, c);
    const auto ref = testing::solve_reference(kernel, signs, c, 60000);
    const double gap = std::abs(model.objectives[0] - ref.objective);
    worst_gap = std::max(worst_gap, gap);
    out.expect(gap <= 1e-4 * std::max(1.0, std::abs(ref.objective)),
               fmt::format("case {}: objective {} vs reference {}", trial, model.objectives[0], ref.objective));
    for (std::size_t t = 0; t < probes.rows(); ++t) {
      double g = ref.bias;
      for (std::size_t j = 0; j < n; ++j) g += ref.alpha[j] * signs[j] * probe_kernel(t, j);
      const int expected = g > 0 ? 0 : 1;
      out.expect(model.predict(probe_kernel.row(t)) == expected,
                 fmt::format("case {}: probe {} predicted differently (reference decision {})", trial, t, g));
      ++compared;
    }
  }
  const double secs = seconds_since(start);
  out.expect(secs < 60.0, fmt::format("took {:.1f} s", secs));
  out.detail = fmt::format("30 problems, worst objective gap {:.2e}, {} predictions, {:.1f} s", worst_gap, compared, secs);
  return out;
}

// 4. Sign-test critical values against the binomial tail in integers.
Outcome sign_test_exactness() {
  Outcome out;
  for (std::size_t n = 1; n <= 12; ++n) {
    std::vector<std::uint64_t> binom(n + 1, 1);
    for (std::size_t k = 1; k <= n; ++k) binom[k] = binom[k - 1] * (n - k + 1) / k;
    const std::uint64_t total = std::uint64_t{1} << n;
    for (const auto [alpha, percent] : {std::pair{0.10, 10u}, std::pair{0.05, 5u}, std::pair{0.01, 1u}}) {
      // Smallest w with sum_{k >= w} C(n, k) / 2^n <= percent / 100.
      std::size_t expected = n + 1;
      std::uint64_t tail = 0;
      for (std::size_t w = n + 1; w-- > 0;) {
        tail += binom[w];
        if (tail * 100 <= percent * total) expected = w;
        else break;
      }
      const auto got = sign_test_critical_value(n, alpha);
      out.expect(got == expected, fmt::format("n={} alpha={}: {} vs {}", n, alpha, got, expected));

      // A sign test over one dataset is rejected; the critical value itself covers n = 1.
      for (std::size_t wins = 0; n >= 2 && wins <= n; ++wins) {
        std::vector<double> base(n, 0.5), challenger(n, 0.4);
        for (std::size_t d = 0; d < wins; ++d) challenger[d] = 0.6;
        const std::vector<double> alphas{alpha};
        const auto r = sign_test(base, challenger, alphas);
        out.expect(r.levels[0].critical_exact == expected && r.levels[0].significant == (wins >= expected),
                   fmt::format("sign_test n={} wins={} alpha={}", n, wins, alpha));
      }
    }
  }
  out.expect(sign_test_critical_value(7, 0.05) == 7, "n=7 alpha=0.05 is not 7");
  out.detail = "n = 1..12, alpha in {0.10, 0.05, 0.01}; n=7, alpha=0.05 -> 7";
  return out;
}

// 5. Feature-count rule.
Outcome feature_count() {
  Outcome out;
  const std::vector<std::pair<std::size_t, std::size_t>> cases{
      {6746, 25}, {309, 9}, {8, 6},   {1, 1},    {9, 7},     {10, 4},    {74, 30},
      {75, 8},    {99, 10}, {100, 3}, {999, 30}, {1000, 25}, {476, 14}, {2, 2}};
  for (const auto& [p, expected] : cases) {
    const auto got = select_count(p);
    out.expect(got == expected, fmt::format("p={}: {} vs {}", p, got, expected));
  }
  out.detail = fmt::format("{} cases including band boundaries", cases.size());
  return out;
}

// 6. Byte-identical raw accuracies from two full CLI runs.
Outcome protocol_determinism(const testing::TempDir& dir) {
  Outcome out;
  const auto start = Clock::now();
  const auto suite = dir / "suite";
  std::string datasets = quoted(kFixtures / "toy_a" / "toy_a.manifest") + " " + quoted(kFixtures / "toy_b" / "toy_b.manifest");
  datasets += " " + quoted(write_dataset(make_synthetic(lsvt_like_spec(1)), suite / "lsvt_like", "lsvt_like"));
  datasets += " " + quoted(write_dataset(make_synthetic(metabolomic_like_spec(1)), suite / "metabolomic_like", "metabolomic_like"));
  for (const char* run : {"first", "second"}) {
    const int code = run_cli("run " + datasets + " --out " + quoted(dir / run), dir / (std::string(run) + ".log"));
    out.expect(code == 0, fmt::format("{} run exited with {}", run, code));
  }
  const auto a = testing::read_text(dir / "first" / "raw_accuracy.csv");
  const auto b = testing::read_text(dir / "second" / "raw_accuracy.csv");
  out.expect(!a.empty() && a == b, "raw_accuracy.csv differs between runs");
  const double secs = seconds_since(start);
  out.expect(secs < 300.0, fmt::format("took {:.1f} s", secs));
  out.detail = fmt::format("4 datasets x 6 methods x 10 repetitions, 500 trees, {} bytes identical, {:.1f} s", a.size(), secs);
  return out;
}

// 7. Synthetic substitute: dissimilarity methods match or beat concatenation with ReliefF.
Outcome ranking_substitute() {
  Outcome out;
  const auto start = Clock::now();
  const std::vector<MethodId> methods{MethodId::RelfRf, MethodId::Rfsvm, MethodId::Rfdis};
  std::size_t held = 0;
  std::string means;
  for (std::uint64_t g = 1; g <= 10; ++g) {
    // Four views observe the same latent class signal through their own noise level.
    SyntheticSpec spec;
    spec.name = fmt::format("correlated_{}", g);
    spec.instances = 100;
    spec.view_widths = {50, 100, 150, 200};
    spec.latent_dims = 2;
    spec.separation = 0.8;
    spec.informative_fraction = 0.8;
    spec.view_noise = {3.0, 4.0, 5.0, 6.0};
    spec.seed = derive_seed(777, g);
    const auto ds = make_synthetic(spec);
    PipelineConfig cfg;
    cfg.seed = 42;
    const auto plan = make_split_plan(ds, 10, 0.5, 42);
    const auto summary = summarize(run_protocol(ds, methods, plan, cfg));
    const bool ok = summary[1].mean_pct >= summary[0].mean_pct && summary[2].mean_pct >= summary[0].mean_pct;
    held += ok;
    means += fmt::format(" {}:{:.1f}/{:.1f}/{:.1f}", g, summary[0].mean_pct, summary[1].mean_pct, summary[2].mean_pct);
  }
  out.expect(held >= 8, fmt::format("ordering held on {} of 10 generations", held));
  out.detail = fmt::format("ordering held on {}/10 generations, {:.1f} s; RELF+RF/RFSVM/RFDIS %:{}", held,
                           seconds_since(start), means);
  return out;
}

// 8. Shuffled test labels leave every trained parameter alone.
Outcome leakage_mutation() {
  Outcome out;
  const std::vector<std::filesystem::path> manifests{kFixtures / "toy_a" / "toy_a.manifest",
                                                     kFixtures / "toy_b" / "toy_b.manifest"};
  std::size_t checks = 0;
  for (const auto& manifest : manifests) {
    const auto ds = load_dataset(manifest);
    const auto plan = make_split_plan(ds, 3, 0.5, 8);
    for (std::size_t r = 0; r < plan.repetitions.size(); ++r) {
      PipelineConfig cfg;
      cfg.forest.num_trees = 100;
      cfg.seed = repetition_seed(8, r);
      leakage_check(ds, plan.repetitions[r], cfg, r, fmt::format("{} rep {}", ds.name, r), out);
      ++checks;
    }
  }
  const auto lsvt = make_synthetic(lsvt_like_spec(3));
  PipelineConfig cfg;
  cfg.seed = 5;
  leakage_check(lsvt, make_split_plan(lsvt, 1, 0.5, 5).repetitions[0], cfg, 9, "lsvt_like", out);
  ++checks;
  out.detail = fmt::format("{} splits x 6 methods: fingerprints, feature sets, C choice, predictions", checks);
  return out;
}

// 9. Radiomics-scale fixture: end-to-end runtime plus criteria 1, 6 and 8.
Outcome radiomics_scale(const testing::TempDir& dir) {
  Outcome out;
  const auto ds = make_synthetic(radiomics_like_spec(1));
  out.expect(ds.num_instances() == 84 && ds.num_views() == 5 && ds.total_features() == 6746, "fixture has the wrong shape");
  const auto manifest = write_dataset(ds, dir / "radiomics_like", "radiomics_like");

  std::vector<double> run_secs;
  for (const char* run : {"first", "second"}) {
    const auto start = Clock::now();
    const int code = run_cli("run " + quoted(manifest) + " --out " + quoted(dir / run), dir / (std::string(run) + ".log"));
    run_secs.push_back(seconds_since(start));
    out.expect(code == 0, fmt::format("{} run exited with {}", run, code));
    out.expect(run_secs.back() < 600.0, fmt::format("{} run took {:.1f} s", run, run_secs.back()));
  }
  const auto raw = testing::read_text(dir / "first" / "raw_accuracy.csv");
  out.expect(!raw.empty() && raw == testing::read_text(dir / "second" / "raw_accuracy.csv"),
             "raw_accuracy.csv differs between runs");
  out.expect(std::count(raw.begin(), raw.end(), '\n') == 1 + 10 * 6, "raw_accuracy.csv lacks some method runs");

  PipelineConfig cfg;
  cfg.seed = repetition_seed(42, 0);
  const auto plan = make_split_plan(ds, 2, 0.5, 42);
  SplitWorkspace ws(ds, plan.repetitions[0], cfg);
  check_workspace_matrices(ws, cfg.forest.num_trees, "radiomics_like", out);
  leakage_check(ds, plan.repetitions[1], cfg, 11, "radiomics_like", out);

  out.detail = fmt::format("N=84, Q=5, p=6746; six methods x 10 repetitions in {:.1f} s and {:.1f} s; "
                           "matrix invariants, determinism and leakage checked",
                           run_secs[0], run_secs[1]);
  return out;
}

}  // namespace

int main() {
  testing::TempDir determinism_dir("acceptance_det");
  testing::TempDir radiomics_dir("acceptance_rad");

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, matrix_invariants},
      {2, brute_force_oracle},
      {3, svm_solver},
      {4, sign_test_exactness},
      {5, feature_count},
      {6, [&] { return protocol_determinism(determinism_dir); }},
      {7, ranking_substitute},
      {8, leakage_mutation},
      {9, [&] { return radiomics_scale(radiomics_dir); }},
  };

  int failed = 0;
  for (const auto& [id, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.failures.push_back(fmt::format("exception: {}", e.what()));
    }
    failed += !o.pass;
    fmt::print("criterion {}: {} - {}\n", id, o.pass ? "PASS" : "FAIL", o.detail);
    for (const auto& f : o.failures) fmt::print("    {}\n", f);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
