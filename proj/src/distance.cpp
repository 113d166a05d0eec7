#include "reid/distance.hpp"

#include <cmath>

#include "reid/errors.hpp"

namespace reid {

double distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double diff = a[k] - b[k];
    s += diff * diff;
  }
  return std::sqrt(std::max(s, kDistEps * kDistEps));
}

static void fill_row(const Matrix& f, std::size_t i, Matrix& d) {
  const std::size_t n = f.rows;
  for (std::size_t j = 0; j < n; ++j) {
    d.at(i, j) = (i == j) ? 0.0 : distance(f.row(i), f.row(j), f.cols);
  }
}

DistanceMatrix pairwise_distances(const Matrix& features) {
  const std::size_t n = features.rows;
  if (n < 2) throw EmptyBatch("pairwise_distances: need at least 2 rows");
  DistanceMatrix out;
  out.n = n;
  out.d = Matrix(n, n);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) fill_row(features, i, out.d);
  return out;
}

DistanceMatrix pairwise_distances_serial(const Matrix& features) {
  const std::size_t n = features.rows;
  if (n < 2) throw EmptyBatch("pairwise_distances: need at least 2 rows");
  DistanceMatrix out;
  out.n = n;
  out.d = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) fill_row(features, i, out.d);
  return out;
}

DistanceMatrix pairwise_distances(const EmbeddingBatch& emb) {
  if (!all_finite(emb.features))
    throw NonFiniteFeature("pairwise_distances: non-finite embedding");
  return pairwise_distances(emb.features);
}

std::pair<Vector, Vector> distance_grad(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeMismatch("distance_grad: size mismatch");
  const double d = distance(a.data(), b.data(), a.size());
  Vector ga(a.size()), gb(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double g = (a[k] - b[k]) / d;
    ga[k] = g;
    gb[k] = -g;
  }
  return {ga, gb};
}

}  // namespace reid
