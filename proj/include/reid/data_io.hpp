#pragma once

#include <cstdint>
#include <string>

#include "reid/sampling.hpp"

namespace reid {

struct SyntheticSpec {
  std::size_t num_ids = 32;
  std::size_t samples_per_id = 8;
  std::size_t input_dim = 16;
  double centroid_scale = 10.0;
  double within_spread = 0.1;
  std::uint64_t seed = 0;
};

// Per identity: a uniform centroid in [-scale, scale]^dim plus isotropic
// Gaussian noise per sample.
LabeledDataset gen_synthetic(const SyntheticSpec& spec);

// Text format: header `id,camera,f0,...`; camera may be empty; `#` comments.
LabeledDataset load_features(const std::string& path);
void save_features(const LabeledDataset& ds, const std::string& path);

struct Split {
  LabeledDataset train;
  LabeledDataset query;
  LabeledDataset gallery;
};

// Identity-disjoint split; one query sample per test identity.
Split split(const LabeledDataset& ds, double train_frac, Rng& rng);

}  // namespace reid
