#pragma once

#include <functional>
#include <string>
#include <vector>

#include "reid/model.hpp"

namespace reid {

// Central finite differences of a scalar function over every entry of x.
Matrix finite_difference(const std::function<double(const Matrix&)>& f,
                         const Matrix& x, double step = 1e-5);

// ||a - b||_2 / max(||a||_2, ||b||_2, floor)
double grad_rel_err(const Matrix& a, const Matrix& b, double floor = 1e-12);

struct GradCheckEntry {
  std::string name;
  double rel_err = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  bool all_pass() const;
};

// Finite-difference verification of every loss, standalone and composed with
// the embedding network. `corrupt` deliberately skews one analytic gradient
// (negative control for the failure path). Batches are drawn so pairwise
// distances stay above 1e-3 and hinge arguments away from the kink; the
// margin is nudged when one lands too close.
GradCheckReport run_gradcheck(std::uint64_t seed, double tolerance = 1e-4,
                              bool corrupt = false);

}  // namespace reid
