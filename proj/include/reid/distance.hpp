#pragma once

#include <utility>

#include "reid/batch.hpp"
#include "reid/linalg.hpp"

namespace reid {

// Clamp inside the square root; makes gradients of coincident embeddings
// exactly zero instead of NaN.
inline constexpr double kDistEps = 1e-12;

// N x N symmetric matrix of pairwise Euclidean distances, zero diagonal.
struct DistanceMatrix {
  std::size_t n = 0;
  Matrix d;

  double at(std::size_t i, std::size_t j) const { return d.at(i, j); }
};

// OpenMP-parallel over rows; every entry is computed independently so the
// result is bit-identical to pairwise_distances_serial.
DistanceMatrix pairwise_distances(const Matrix& features);
DistanceMatrix pairwise_distances(const EmbeddingBatch& emb);

// Serial reference, kept for tests and the benchmark.
DistanceMatrix pairwise_distances_serial(const Matrix& features);

// Single-entry distance with the kDistEps clamp applied.
double distance(const double* a, const double* b, std::size_t n);

// (d ||a-b|| / da, d ||a-b|| / db) = ((a-b)/d~, -(a-b)/d~), d~ = max(d, eps).
std::pair<Vector, Vector> distance_grad(const Vector& a, const Vector& b);

}  // namespace reid
