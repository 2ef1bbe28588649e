#include "mvrfd/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/core.h>

#include "mvrfd/error.hpp"
#include "mvrfd/rng.hpp"

namespace mvrfd {

MultiViewDataset make_synthetic(const SyntheticSpec& spec) {
  const auto n = spec.instances;
  const auto k = spec.class_weights.size();
  if (k < 2) throw ConfigError("synthetic data needs at least two classes");
  if (n < 2 * k) throw ConfigError("synthetic data needs at least two instances per class");
  if (spec.view_widths.empty() || spec.view_noise.empty()) throw ConfigError("synthetic data needs at least one view");
  if (spec.latent_dims == 0) throw ConfigError("latent dimension must be positive");

  Rng rng(spec.seed);

  // Class sizes proportional to the weights, at least 2 each, summing to n.
  const double weight_sum = std::accumulate(spec.class_weights.begin(), spec.class_weights.end(), 0.0);
  std::vector<std::size_t> sizes(k);
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    sizes[c] = std::max<std::size_t>(2, static_cast<std::size_t>(std::llround(spec.class_weights[c] / weight_sum *
                                                                               static_cast<double>(n))));
    assigned += sizes[c];
  }
  for (std::size_t c = 0; assigned != n; c = (c + 1) % k) {
    if (assigned < n) {
      ++sizes[c];
      ++assigned;
    } else if (sizes[c] > 2) {
      --sizes[c];
      --assigned;
    }
  }
  std::vector<int> labels;
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), sizes[c], static_cast<int>(c));
  rng.shuffle(std::span<int>(labels));

  Matrix centres(k, spec.latent_dims);
  for (auto& v : centres.values()) v = spec.separation * rng.normal();
  Matrix latent(n, spec.latent_dims);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < spec.latent_dims; ++d)
      latent(i, d) = centres(static_cast<std::size_t>(labels[i]), d) + rng.normal();

  MultiViewDataset ds;
  ds.name = spec.name;
  // Relabel by first appearance so the dataset matches what a reload produces.
  std::vector<int> code(k, -1);
  for (int y : labels) {
    auto& slot = code[static_cast<std::size_t>(y)];
    if (slot < 0) {
      slot = static_cast<int>(ds.class_names.size());
      ds.class_names.push_back(fmt::format("class{}", y));
    }
    ds.labels.push_back(slot);
  }

  for (std::size_t q = 0; q < spec.view_widths.size(); ++q) {
    const auto width = spec.view_widths[q];
    if (width == 0) throw ConfigError("views need at least one column");
    const double noise = spec.view_noise[q % spec.view_noise.size()];
    View view;
    view.name = fmt::format("view{}", q + 1);
    view.features = Matrix(n, width);
    const auto informative = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(spec.informative_fraction * static_cast<double>(width))), 1, width);
    for (std::size_t f = 0; f < width; ++f) {
      view.feature_names.push_back(fmt::format("v{}_f{}", q + 1, f));
      std::vector<double> loading(spec.latent_dims, 0.0);
      if (f < informative)
        for (auto& w : loading) w = rng.normal() / std::sqrt(static_cast<double>(spec.latent_dims));
      const double scale = std::exp(rng.normal());
      const double offset = 5.0 * rng.normal();
      for (std::size_t i = 0; i < n; ++i) {
        double value = 0.0;
        for (std::size_t d = 0; d < spec.latent_dims; ++d) value += loading[d] * latent(i, d);
        value += (f < informative ? noise : 1.0) * rng.normal();
        view.features(i, f) = offset + scale * value;
      }
    }
    // Informative columns are not clustered at the front.
    std::vector<std::size_t> perm(width);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    view.features = view.features.select_columns(perm);
    ds.views.push_back(std::move(view));
  }
  ds.validate();
  return ds;
}

SyntheticSpec lsvt_like_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.name = "lsvt_like";
  s.instances = 126;
  s.view_widths = {26, 24, 134, 125};
  s.class_weights = {1.0, 2.0};
  s.latent_dims = 6;
  s.separation = 0.6;
  s.informative_fraction = 0.3;
  s.view_noise = {1.5, 2.0, 2.5, 3.0};
  s.seed = seed;
  return s;
}

SyntheticSpec metabolomic_like_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.name = "metabolomic_like";
  s.instances = 94;
  s.view_widths = {2, 100, 374};
  s.class_weights = {1.0, 1.0};
  s.latent_dims = 6;
  s.separation = 0.5;
  s.informative_fraction = 0.3;
  s.view_noise = {2.0, 2.5, 3.0};
  s.seed = seed;
  return s;
}

SyntheticSpec radiomics_like_spec(std::uint64_t seed) {
  SyntheticSpec s;
  s.name = "radiomics_like";
  s.instances = 84;
  s.view_widths = {1686, 1686, 1686, 1686, 2};
  s.class_weights = {1.0, 2.0};
  s.latent_dims = 6;
  s.separation = 0.6;
  s.informative_fraction = 0.2;
  s.view_noise = {2.0, 2.5, 3.0, 3.5, 1.0};
  s.seed = seed;
  return s;
}

}  // namespace mvrfd
