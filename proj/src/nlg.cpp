#include "auxmix/nlg.hpp"

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace auxmix {

NlgShape::NlgShape(double nu_) : nu(nu_) {
  if (!(nu > 0.0) || !std::isfinite(nu)) {
    throw std::domain_error("NlgShape: nu must be finite and > 0, got " + std::to_string(nu_));
  }
}

double nlg_log_density(double u, NlgShape shape) {
  if (!std::isfinite(u)) {
    throw std::domain_error("nlg_log_density: u must be finite");
  }
  return -shape.nu * u - std::exp(-u) - std::lgamma(shape.nu);
}

double nlg_mean(NlgShape shape) { return -boost::math::digamma(shape.nu); }

double nlg_variance(NlgShape shape) { return boost::math::trigamma(shape.nu); }

double nlg_cdf(double u, NlgShape shape) {
  if (!std::isfinite(u)) {
    throw std::domain_error("nlg_cdf: u must be finite");
  }
  double x = std::exp(-u);
  if (std::isinf(x)) return 0.0;  // u far in the left tail
  return boost::math::gamma_q(shape.nu, x);
}

double nlg_quantile(double p, NlgShape shape) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("nlg_quantile: p must lie in (0, 1)");
  }
  return -std::log(boost::math::gamma_q_inv(shape.nu, p));
}

double nlg_upper_quantile(double eps, NlgShape shape) {
  if (!(eps > 0.0 && eps < 1.0)) {
    throw std::domain_error("nlg_upper_quantile: eps must lie in (0, 1)");
  }
  return -std::log(boost::math::gamma_p_inv(shape.nu, eps));
}

double nlg_sample(NlgShape shape, RngStream& rng) { return -std::log(rng.gamma(shape.nu)); }

}  // namespace auxmix
