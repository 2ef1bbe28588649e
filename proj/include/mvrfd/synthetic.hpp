#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mvrfd/dataset.hpp"

namespace mvrfd {

/// Multi-view data driven by a shared latent class signal. Each instance
/// draws a latent vector around its class centre; every view observes a few
/// random projections of that latent vector through its own noise, plus pure
/// noise columns. Columns get random affine scalings so raw scales differ.
struct SyntheticSpec {
  std::string name = "synthetic";
  std::size_t instances = 60;
  std::vector<std::size_t> view_widths{8, 8};
  std::vector<double> class_weights{1.0, 1.0};  ///< relative class sizes; its length is the class count
  std::size_t latent_dims = 4;
  double separation = 1.5;               ///< scale of the class centres in latent space
  double informative_fraction = 0.3;     ///< share of each view's columns carrying signal
  std::vector<double> view_noise{1.0};   ///< per-view noise sd, recycled when shorter than the view list
  std::uint64_t seed = 1;
};

MultiViewDataset make_synthetic(const SyntheticSpec& spec);

/// 126 instances, 4 views, 309 features, 2 imbalanced classes.
SyntheticSpec lsvt_like_spec(std::uint64_t seed);
/// 94 instances, 3 views, 476 features, 2 balanced classes.
SyntheticSpec metabolomic_like_spec(std::uint64_t seed);
/// 84 instances, 5 views, 6746 features, 2 imbalanced classes.
SyntheticSpec radiomics_like_spec(std::uint64_t seed);

}  // namespace mvrfd
