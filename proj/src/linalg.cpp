#include "reid/linalg.hpp"

#include <cmath>
#include <cstdio>

#include "reid/errors.hpp"

namespace reid {

double l2_norm(const double* v, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += v[i] * v[i];
  return std::sqrt(s);
}

double l2_norm(const Vector& v) { return l2_norm(v.data(), v.size()); }

Vector l2_normalize(const Vector& v) {
  const double n = l2_norm(v);
  if (n <= kNormEps) throw ZeroNormError("l2_normalize: vector norm below guard");
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

void l2_normalize_backward(const double* v, const double* upstream,
                           std::size_t n, double* out) {
  const double norm = l2_norm(v, n);
  if (norm <= kNormEps)
    throw ZeroNormError("l2_normalize_backward: vector norm below guard");
  double dot = 0.0;
  for (std::size_t i = 0; i < n; ++i) dot += (v[i] / norm) * upstream[i];
  for (std::size_t i = 0; i < n; ++i)
    out[i] = (upstream[i] - (v[i] / norm) * dot) / norm;
}

Vector l2_normalize_backward(const Vector& v, const Vector& upstream) {
  if (v.size() != upstream.size())
    throw ShapeMismatch("l2_normalize_backward: size mismatch");
  Vector out(v.size());
  l2_normalize_backward(v.data(), upstream.data(), v.size(), out.data());
  return out;
}

Matrix gemm(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw ShapeMismatch("gemm: inner dimensions disagree");
  Matrix c(a.rows, b.cols);
#pragma omp parallel for if (a.rows * b.cols * a.cols > 65536)
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.at(i, k);
      for (std::size_t j = 0; j < b.cols; ++j) c.at(i, j) += aik * b.at(k, j);
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols, m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.cols; ++j) t.at(j, i) = m.at(i, j);
  return t;
}

static void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols)
    throw ShapeMismatch(std::string(op) + ": shape mismatch");
}

Matrix add(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "add");
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] + b.data[i];
  return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "sub");
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] - b.data[i];
  return c;
}

Matrix scale(const Matrix& a, double s) {
  Matrix c(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) c.data[i] = a.data[i] * s;
  return c;
}

bool all_finite(const Matrix& m) {
  for (double x : m.data)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace reid
