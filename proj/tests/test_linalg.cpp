#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "reid/errors.hpp"
#include "reid/linalg.hpp"
#include "reid/sampling.hpp"

using namespace reid;

static Vector random_vec(Rng& rng, std::size_t n) {
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

TEST_CASE("l2_norm basics") {
  CHECK(l2_norm(Vector{3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(l2_norm(Vector{0.0, 0.0, 0.0}) == 0.0);

  // independent re-summation
  Rng rng(7);
  Vector v = random_vec(rng, 8);
  double s = 0.0;
  for (double x : v) s += x * x;
  CHECK(std::fabs(l2_norm(v) - std::sqrt(s)) < 1e-12);
}

TEST_CASE("l2_normalize") {
  Vector u = l2_normalize(Vector{3.0, 4.0});
  CHECK(u[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(u[1] == doctest::Approx(0.8).epsilon(1e-12));

  CHECK_THROWS_AS(l2_normalize(Vector{1e-20, 0.0}), ZeroNormError);

  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    Vector v = random_vec(rng, 5);
    Vector n = l2_normalize(v);
    CHECK(std::fabs(l2_norm(n) - 1.0) < 1e-12);
    // idempotent on the unit sphere
    Vector n2 = l2_normalize(n);
    for (std::size_t k = 0; k < n.size(); ++k)
      CHECK(n2[k] == doctest::Approx(n[k]).epsilon(1e-12));
  }
}

TEST_CASE("l2_normalize_backward") {
  Vector g = l2_normalize_backward(Vector{1.0, 0.0}, Vector{0.0, 1.0});
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(1.0));

  g = l2_normalize_backward(Vector{1.0, 0.0}, Vector{1.0, 0.0});
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(0.0));

  // matches central finite differences of l2_normalize
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    Vector v = random_vec(rng, 6);
    Vector up = random_vec(rng, 6);
    Vector analytic = l2_normalize_backward(v, up);
    const double h = 1e-5;
    for (std::size_t k = 0; k < v.size(); ++k) {
      Vector hi = v, lo = v;
      hi[k] += h;
      lo[k] -= h;
      Vector nh = l2_normalize(hi), nl = l2_normalize(lo);
      double fd = 0.0;
      for (std::size_t j = 0; j < v.size(); ++j)
        fd += up[j] * (nh[j] - nl[j]) / (2.0 * h);
      CHECK(std::fabs(analytic[k] - fd) /
                std::max(1.0, std::fabs(fd)) < 1e-6);
    }
  }

  // output is orthogonal to the normalized vector
  for (int trial = 0; trial < 100; ++trial) {
    Vector v = random_vec(rng, 4);
    Vector up = random_vec(rng, 4);
    Vector g2 = l2_normalize_backward(v, up);
    Vector f = l2_normalize(v);
    double dot = 0.0;
    for (std::size_t k = 0; k < 4; ++k) dot += g2[k] * f[k];
    CHECK(std::fabs(dot) < 1e-10);
  }
}

TEST_CASE("gemm and elementwise ops") {
  Matrix id(3, 3);
  for (int i = 0; i < 3; ++i) id.at(i, i) = 1.0;
  Rng rng(17);
  Matrix m(3, 3);
  for (double& x : m.data) x = rng.normal();
  Matrix r = gemm(id, m);
  for (std::size_t i = 0; i < 9; ++i) CHECK(r.data[i] == m.data[i]);

  Matrix a(1, 1), b(1, 1);
  a.at(0, 0) = 2.0;
  b.at(0, 0) = 3.0;
  CHECK(gemm(a, b).at(0, 0) == 6.0);

  // triple-loop oracle
  Matrix x(4, 3), y(3, 5);
  for (double& v : x.data) v = rng.normal();
  for (double& v : y.data) v = rng.normal();
  Matrix z = gemm(x, y);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 3; ++k) s += x.at(i, k) * y.at(k, j);
      CHECK(std::fabs(z.at(i, j) - s) < 1e-12);
    }

  CHECK_THROWS_AS(gemm(x, x), ShapeMismatch);
  CHECK_THROWS_AS(add(x, y), ShapeMismatch);

  // distributivity: (a+b)c = ac + bc
  Matrix p(3, 4), q(3, 4), c(4, 2);
  for (double& v : p.data) v = rng.normal();
  for (double& v : q.data) v = rng.normal();
  for (double& v : c.data) v = rng.normal();
  Matrix lhs = gemm(add(p, q), c);
  Matrix rhs = add(gemm(p, c), gemm(q, c));
  for (std::size_t i = 0; i < lhs.data.size(); ++i)
    CHECK(std::fabs(lhs.data[i] - rhs.data[i]) < 1e-10);

  Matrix s = scale(p, 2.0);
  Matrix s2 = add(p, p);
  for (std::size_t i = 0; i < s.data.size(); ++i)
    CHECK(s.data[i] == s2.data[i]);
  Matrix d = sub(p, p);
  for (double v : d.data) CHECK(v == 0.0);
}
