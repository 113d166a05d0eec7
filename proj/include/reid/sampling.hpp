#pragma once

#include <cstdint>
#include <vector>

#include "reid/batch.hpp"

namespace reid {

struct LabeledDataset {
  Matrix features;            // M x F
  std::vector<int> ids;       // M
  std::vector<int> cameras;   // M or empty

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

// P identities x K samples each, as row indices into a LabeledDataset.
struct PkBatch {
  std::vector<std::size_t> indices;  // N = p * k
  std::size_t p = 0;
  std::size_t k = 0;
};

struct Triplet {
  std::size_t a, a_pos, b;  // id(a)=id(a_pos), a!=a_pos, id(b)!=id(a)
};

struct Quadruplet {
  std::size_t a, a_pos, b, c;  // b, c from two distinct non-anchor identities
};

// Deterministic seeded random source. Draws go through our own bounded-int
// reduction so sequences are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next();
  // Uniform in [0, n).
  std::size_t below(std::size_t n);
  // Uniform in [0, 1).
  double uniform();
  // Standard normal (Box-Muller, no cached spare so draws stay reproducible).
  double normal();

 private:
  std::uint64_t state_;
};

PkBatch pk_sample(const LabeledDataset& ds, std::size_t p, std::size_t k, Rng& rng);

std::vector<Triplet> sample_triplets(const PkBatch& batch,
                                     const std::vector<int>& ds_ids, Rng& rng);

std::vector<Quadruplet> sample_quadruplets(const PkBatch& batch,
                                           const std::vector<int>& ds_ids,
                                           Rng& rng);

// Gather the rows of a PkBatch into a standalone embedding batch.
EmbeddingBatch gather(const LabeledDataset& ds, const PkBatch& batch);

}  // namespace reid
