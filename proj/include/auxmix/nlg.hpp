#pragma once

#include "auxmix/rng.hpp"

namespace auxmix {

// Negative log-gamma distribution: the law of -log G with G ~ Gamma(nu, 1).
// For nu = 1 this is the standard Gumbel. It is the residual law of the
// log-linearized auxiliary variables, so everything downstream (mixture
// approximations, tail thresholds, acceptance ratios) is phrased against it.
struct NlgShape {
  double nu;
  explicit NlgShape(double nu_);
};

// log f(u) = -nu*u - exp(-u) - lgamma(nu). Tends to -inf quadratically beyond
// the double exp range on the left; finite everywhere the arithmetic is.
double nlg_log_density(double u, NlgShape shape);

double nlg_mean(NlgShape shape);      // -digamma(nu)
double nlg_variance(NlgShape shape);  // trigamma(nu)

// P(U <= u) = Q(nu, exp(-u)) (regularized upper incomplete gamma).
double nlg_cdf(double u, NlgShape shape);

// Inverse CDF. quantile(p) resolves the lower tail exactly; upper_quantile(eps)
// returns u with P(U > u) = eps and should be used for tail probabilities
// closer to 1 than ~1e-15, where forming 1-eps in a double loses the tail.
double nlg_quantile(double p, NlgShape shape);
double nlg_upper_quantile(double eps, NlgShape shape);

double nlg_sample(NlgShape shape, RngStream& rng);

}  // namespace auxmix
