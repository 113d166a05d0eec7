#pragma once

#include <cstddef>
#include <vector>

namespace reid {

// Row-major dense matrix of doubles. All entries are expected to stay finite;
// constructors and file loaders are the validation points.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  const double* row(std::size_t i) const { return data.data() + i * cols; }
  double* row(std::size_t i) { return data.data() + i * cols; }
};

using Vector = std::vector<double>;

// Guard below which a vector counts as zero for normalization purposes.
inline constexpr double kNormEps = 1e-12;

double l2_norm(const Vector& v);
double l2_norm(const double* v, std::size_t n);

// v / ||v||. Throws ZeroNormError when ||v|| <= kNormEps.
Vector l2_normalize(const Vector& v);

// Differential of l2_normalize: (upstream - f (f . upstream)) / ||v||
// with f = v/||v||.
Vector l2_normalize_backward(const Vector& v, const Vector& upstream);
void l2_normalize_backward(const double* v, const double* upstream,
                           std::size_t n, double* out);

Matrix gemm(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& a, double s);

bool all_finite(const Matrix& m);

}  // namespace reid
