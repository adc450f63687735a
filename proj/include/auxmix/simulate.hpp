#pragma once

#include "auxmix/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>

namespace auxmix {

// Synthetic count regression with a controllable lurking covariate:
// log rate = 0.1 + x1 + c * x2 with x1, x2 independent standard normal.
// Fitting with x2 omitted is well specified at c = 0 and increasingly
// misspecified as c grows.
struct ToyData {
  Eigen::VectorXi y;
  Eigen::VectorXd x1;
  Eigen::VectorXd x2;
  Eigen::Index n() const { return y.size(); }
};

ToyData simulate_toy(int n, double c, uint64_t seed);

// CSV with header "y,x1,x2"; reals carry full precision so write -> read ->
// write reproduces the bytes exactly.
void write_toy_csv(const ToyData& data, std::ostream& os);
ToyData read_toy_csv(std::istream& is);

// Model over the toy data: intercept plus x1, optionally x2 as a third
// column; diffuse independent normal prior on the coefficients.
PoissonLgm toy_regression(const ToyData& data, bool include_x2, double prior_var = 100.0);

}  // namespace auxmix
