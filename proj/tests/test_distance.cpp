#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "reid/distance.hpp"
#include "reid/errors.hpp"
#include "reid/sampling.hpp"

using namespace reid;

static Matrix random_features(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (double& x : m.data) x = rng.normal();
  return m;
}

TEST_CASE("pairwise_distances basics") {
  Matrix f(2, 2);
  f.at(1, 0) = 3.0;
  f.at(1, 1) = 4.0;
  auto d = pairwise_distances(f);
  CHECK(d.at(0, 1) == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(d.at(0, 0) == 0.0);
  CHECK(d.at(1, 1) == 0.0);

  // identical rows: reported as (clamped) zero
  Matrix g(2, 3, 1.0);
  CHECK(pairwise_distances(g).at(0, 1) < 1e-11);

  Matrix one(1, 4);
  CHECK_THROWS_AS(pairwise_distances(one), EmptyBatch);
}

TEST_CASE("pairwise_distances matches per-pair norm oracle") {
  Rng rng(3);
  Matrix f = random_features(rng, 8, 4);
  auto d = pairwise_distances(f);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) {
      Vector diff(4);
      for (std::size_t k = 0; k < 4; ++k) diff[k] = f.at(i, k) - f.at(j, k);
      const double expect = i == j ? 0.0 : l2_norm(diff);
      CHECK(std::fabs(d.at(i, j) - expect) < 1e-12);
    }
}

TEST_CASE("parallel and serial kernels are bit-identical") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Matrix f = random_features(rng, 33, 7);
    auto a = pairwise_distances(f);
    auto b = pairwise_distances_serial(f);
    for (std::size_t i = 0; i < a.d.data.size(); ++i)
      CHECK(a.d.data[i] == b.d.data[i]);
  }
}

TEST_CASE("distance matrix invariants") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    Matrix f = random_features(rng, 10, 5);
    auto d = pairwise_distances(f);
    for (std::size_t i = 0; i < d.n; ++i)
      for (std::size_t j = 0; j < d.n; ++j) {
        CHECK(d.at(i, j) == d.at(j, i));  // exact symmetry
        CHECK(d.at(i, j) >= 0.0);
      }
    // triangle inequality on all triples
    for (std::size_t i = 0; i < d.n; ++i)
      for (std::size_t j = 0; j < d.n; ++j)
        for (std::size_t k = 0; k < d.n; ++k)
          CHECK(d.at(i, k) <= d.at(i, j) + d.at(j, k) + 1e-9);
  }
}

TEST_CASE("row permutation permutes the matrix") {
  Rng rng(21);
  Matrix f = random_features(rng, 6, 3);
  auto d = pairwise_distances(f);
  std::vector<std::size_t> perm = {3, 1, 5, 0, 2, 4};
  Matrix fp(6, 3);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t k = 0; k < 3; ++k) fp.at(i, k) = f.at(perm[i], k);
  auto dp = pairwise_distances(fp);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j)
      CHECK(dp.at(i, j) == d.at(perm[i], perm[j]));
}

TEST_CASE("distance_grad") {
  auto [ga, gb] = distance_grad(Vector{0.0, 0.0}, Vector{0.6, 0.8});
  CHECK(ga[0] == doctest::Approx(-0.6).epsilon(1e-12));
  CHECK(ga[1] == doctest::Approx(-0.8).epsilon(1e-12));
  CHECK(gb[0] == doctest::Approx(0.6).epsilon(1e-12));

  // coincident points: zero gradient, not NaN
  auto [gc, gd] = distance_grad(Vector{1.0, 2.0}, Vector{1.0, 2.0});
  CHECK(gc[0] == 0.0);
  CHECK(gc[1] == 0.0);

  // unit norm whenever d > clamp
  Rng rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    Vector a(4), b(4);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    auto [g1, g2] = distance_grad(a, b);
    CHECK(std::fabs(l2_norm(g1) - 1.0) < 1e-10);
    CHECK(std::fabs(l2_norm(g2) - 1.0) < 1e-10);
  }

  // finite differences
  for (int trial = 0; trial < 20; ++trial) {
    Vector a(3), b(3);
    for (double& x : a) x = rng.normal();
    for (double& x : b) x = rng.normal();
    auto [g1, g2] = distance_grad(a, b);
    const double h = 1e-5;
    for (std::size_t k = 0; k < 3; ++k) {
      Vector hi = a, lo = a;
      hi[k] += h;
      lo[k] -= h;
      const double fd = (distance(hi.data(), b.data(), 3) -
                         distance(lo.data(), b.data(), 3)) /
                        (2.0 * h);
      CHECK(std::fabs(g1[k] - fd) / std::max(1.0, std::fabs(fd)) < 1e-6);
    }
  }
}
