#pragma once

#include <vector>

#include "reid/linalg.hpp"

namespace reid {

// N embedding rows with per-row identity labels. Camera labels are optional
// (empty vector when absent).
struct EmbeddingBatch {
  Matrix features;            // N x D
  std::vector<int> ids;       // N
  std::vector<int> cameras;   // N or empty

  std::size_t size() const { return features.rows; }
  std::size_t dim() const { return features.cols; }
};

}  // namespace reid
