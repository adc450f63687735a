#pragma once

#include "auxmix/model.hpp"
#include "auxmix/rng.hpp"
#include "auxmix/sampler.hpp"

#include <Eigen/Dense>

#include <vector>

namespace auxmix {

// Deterministic quadrature reference for intercept-only models: the posterior
// of the single coefficient under a normal prior, tabulated on a grid wide
// enough (>= 12 posterior standard deviations, located by a moment pre-pass)
// that the trapezoid CDF is exact to plotting accuracy.
struct GridPosterior {
  std::vector<double> grid;      // ordered parameter values
  std::vector<double> log_post;  // unnormalized log posterior at the grid
  std::vector<double> cdf;       // normalized, non-decreasing, 0 -> 1
  double mean = 0.0;
  double sd = 0.0;

  double cdf_at(double x) const;       // linear interpolation between nodes
  double quantile(double p) const;     // inverse of cdf_at
};

// `model` must be intercept-only: one fixed-effect column, constant one, and
// no random-effect blocks; the prior is the model's V0.
GridPosterior grid_posterior_1d(const PoissonLgm& model, int resolution = 4097);

struct ReferenceConfig {
  long long iterations = 0;  // total sweeps including burn-in
  long long burn_in = 0;
  long long thinning = 1;
  uint64_t seed = 0;
  uint64_t chain_index = 0;
  void validate() const;
};

// Adaptive random-walk Metropolis on the exact posterior over
// (beta, gamma, log sigma2): proposal covariance estimated during burn-in from
// the chain's own history, then frozen. Draw columns and names match
// run_chain's layout; the acceptance entry is the joint move's rate, and a
// rate outside [0.05, 0.7] after adaptation sets `warning_flag`.
struct ReferenceOutput {
  Eigen::MatrixXd draws;
  std::vector<std::string> names;
  double acceptance_rate = 0.0;
  bool warning_flag = false;
  bool adaptation_frozen = false;  // proposal held constant after burn-in
};

ReferenceOutput rwmh_reference(const PoissonLgm& model, const ReferenceConfig& config);

}  // namespace auxmix
