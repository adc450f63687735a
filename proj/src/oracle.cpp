#include "auxmix/oracle.hpp"

#include "auxmix/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace auxmix {

double GridPosterior::cdf_at(double x) const {
  if (x <= grid.front()) return 0.0;
  if (x >= grid.back()) return 1.0;
  const auto it = std::upper_bound(grid.begin(), grid.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - grid.begin());
  const double f = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
  return cdf[i - 1] + f * (cdf[i] - cdf[i - 1]);
}

double GridPosterior::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument("GridPosterior::quantile: probability outside [0, 1]");
  }
  if (p <= 0.0) return grid.front();
  if (p >= 1.0) return grid.back();
  const auto it = std::lower_bound(cdf.begin(), cdf.end(), p);
  const std::size_t i = static_cast<std::size_t>(it - cdf.begin());
  if (i == 0) return grid.front();
  const double span = cdf[i] - cdf[i - 1];
  const double f = span > 0.0 ? (p - cdf[i - 1]) / span : 0.0;
  return grid[i - 1] + f * (grid[i] - grid[i - 1]);
}

GridPosterior grid_posterior_1d(const PoissonLgm& model, int resolution) {
  model.validate();
  if (model.p() != 1 || !model.blocks.empty()) {
    throw std::invalid_argument("grid_posterior_1d: model must be intercept-only");
  }
  for (int i = 0; i < model.n(); ++i) {
    if (model.X(i, 0) != 1.0) {
      throw std::invalid_argument("grid_posterior_1d: design column must be the constant one");
    }
  }
  if (resolution < 16) {
    throw std::invalid_argument("grid_posterior_1d: resolution too coarse");
  }

  const double v0 = model.V0(0, 0);
  double s = 0.0, big_t = 0.0, log_off = 0.0;
  for (int i = 0; i < model.n(); ++i) {
    s += model.y[i];
    big_t += model.t[i];
    log_off += model.y[i] * std::log(model.t[i]);
  }
  const auto log_post_at = [&](double b) {
    return s * b - big_t * std::exp(b) - b * b / (2.0 * v0) + log_off;
  };

  // moment pre-pass: Laplace mode and curvature locate a grid spanning
  // comfortably more than 12 posterior standard deviations
  double mode = big_t > 0.0 ? std::log((s + 0.5) / big_t) : 0.0;
  for (int it = 0; it < 200; ++it) {
    const double g = s - big_t * std::exp(mode) - mode / v0;
    const double h = -big_t * std::exp(mode) - 1.0 / v0;
    const double step = g / h;
    mode -= step;
    if (std::abs(step) < 1e-13) break;
  }
  const double lap_sd = 1.0 / std::sqrt(big_t * std::exp(mode) + 1.0 / v0);

  GridPosterior out;
  out.grid.resize(static_cast<std::size_t>(resolution));
  out.log_post.resize(static_cast<std::size_t>(resolution));
  const double lo = mode - 8.0 * lap_sd, hi = mode + 8.0 * lap_sd;
  double peak = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < resolution; ++i) {
    const double b = lo + (hi - lo) * i / (resolution - 1);
    out.grid[static_cast<std::size_t>(i)] = b;
    const double lp = log_post_at(b);
    if (!std::isfinite(lp)) {
      throw NumericalError("grid_posterior_1d: non-finite log posterior inside the grid");
    }
    out.log_post[static_cast<std::size_t>(i)] = lp;
    peak = std::max(peak, lp);
  }

  std::vector<double> dens(static_cast<std::size_t>(resolution));
  for (int i = 0; i < resolution; ++i) {
    dens[static_cast<std::size_t>(i)] = std::exp(out.log_post[static_cast<std::size_t>(i)] - peak);
  }
  out.cdf.assign(static_cast<std::size_t>(resolution), 0.0);
  for (int i = 1; i < resolution; ++i) {
    out.cdf[static_cast<std::size_t>(i)] =
        out.cdf[static_cast<std::size_t>(i - 1)] +
        0.5 * (dens[static_cast<std::size_t>(i)] + dens[static_cast<std::size_t>(i - 1)]) *
            (out.grid[static_cast<std::size_t>(i)] - out.grid[static_cast<std::size_t>(i - 1)]);
  }
  const double total = out.cdf.back();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericalError("grid_posterior_1d: posterior mass failed to normalize");
  }
  double m1 = 0.0, m2 = 0.0;
  for (int i = 1; i < resolution; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    const double w = 0.5 * (dens[k] + dens[k - 1]) * (out.grid[k] - out.grid[k - 1]) / total;
    const double mid = 0.5 * (out.grid[k] + out.grid[k - 1]);
    out.cdf[k] /= total;
    m1 += w * mid;
    m2 += w * mid * mid;
  }
  out.cdf.back() = 1.0;
  out.mean = m1;
  out.sd = std::sqrt(std::max(0.0, m2 - m1 * m1));
  return out;
}

void ReferenceConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("ReferenceConfig: iterations must be >= 1");
  if (burn_in < 0 || burn_in >= iterations) {
    throw std::invalid_argument("ReferenceConfig: burn_in must lie inside the run");
  }
  if (thinning < 1) throw std::invalid_argument("ReferenceConfig: thinning must be >= 1");
}

namespace {

// joint state x = (beta, gamma_1.., log sigma2_1..); exact log posterior up to
// a constant
struct ExactTarget {
  const PoissonLgm* model;
  int p = 0, d = 0;
  std::vector<int> gamma_offset, gamma_size;
  int sigma_offset = 0;
  Eigen::MatrixXd v0_inv;

  explicit ExactTarget(const PoissonLgm& m) : model(&m) {
    p = m.p();
    int at = p;
    for (const RandomEffectBlock& b : m.blocks) {
      gamma_offset.push_back(at);
      gamma_size.push_back(static_cast<int>(b.Z.cols()));
      at += static_cast<int>(b.Z.cols());
    }
    sigma_offset = at;
    d = at + m.n_blocks();
    v0_inv = m.V0.llt().solve(Eigen::MatrixXd::Identity(p, p));
  }

  double operator()(const Eigen::VectorXd& x) const {
    const Eigen::VectorXd beta = x.head(p);
    std::vector<Eigen::VectorXd> gamma;
    for (std::size_t q = 0; q < model->blocks.size(); ++q) {
      gamma.push_back(x.segment(gamma_offset[q], gamma_size[q]));
    }
    double lp = exact_poisson_loglik(beta, gamma, *model);
    lp += -0.5 * beta.dot(v0_inv * beta);
    for (std::size_t q = 0; q < model->blocks.size(); ++q) {
      const RandomEffectBlock& b = model->blocks[q];
      const double u = x[sigma_offset + static_cast<int>(q)];
      const double s2 = std::exp(u);
      const double quad = gamma[q].dot(b.K * gamma[q]);
      lp += -0.5 * b.rank * u - 0.5 * quad / s2;
      if (b.sigma2_prior.kind == SigmaPrior::Kind::InverseGamma) {
        lp += -(b.sigma2_prior.a + 1.0) * u - b.sigma2_prior.b / s2;
      } else {
        lp += (b.sigma2_prior.a - 1.0) * u - b.sigma2_prior.b * s2;
      }
      lp += u;  // Jacobian of sigma2 = exp(u)
    }
    return lp;
  }
};

}  // namespace

ReferenceOutput rwmh_reference(const PoissonLgm& model, const ReferenceConfig& config) {
  model.validate();
  config.validate();
  const ExactTarget target(model);
  if (target.d > 50) {
    throw std::invalid_argument("rwmh_reference: parameter dimension exceeds the desk-scale cap");
  }
  RngStream rng = RngStream::substream(config.seed, config.chain_index);
  const int d = target.d;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(d);
  double lp = target(x);

  // proposal: x + c L z with L refreshed from the chain's own running
  // covariance during burn-in, frozen afterwards
  Eigen::MatrixXd chol = Eigen::MatrixXd::Identity(d, d) * 0.1;
  double log_scale = 0.0;
  const double accept_target = d == 1 ? 0.44 : (d == 2 ? 0.35 : 0.234);

  Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(d, d);
  long long run_count = 0;

  ReferenceOutput out;
  out.names.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < target.p; ++j) out.names.push_back("beta" + std::to_string(j));
  for (int q = 0; q < model.n_blocks(); ++q) {
    for (int j = 0; j < target.gamma_size[static_cast<std::size_t>(q)]; ++j) {
      out.names.push_back("gamma" + std::to_string(q + 1) + "_" + std::to_string(j + 1));
    }
  }
  for (int q = 0; q < model.n_blocks(); ++q) {
    out.names.push_back("sigma2_" + std::to_string(q + 1));
  }
  const long long kept = (config.iterations - config.burn_in) / config.thinning;
  out.draws.resize(kept, d);

  long long kept_index = 0, post_accepted = 0, post_proposed = 0;
  Eigen::VectorXd z(d), prop(d);
  for (long long b = 1; b <= config.iterations; ++b) {
    for (int j = 0; j < d; ++j) z[j] = rng.normal();
    prop = x + std::exp(log_scale) * (chol * z);
    const double lp_prop = target(prop);
    const bool accept = std::isfinite(lp_prop) && std::log(rng.uniform()) < lp_prop - lp;
    if (accept) {
      x = prop;
      lp = lp_prop;
    }

    if (b <= config.burn_in) {
      log_scale += ((accept ? 1.0 : 0.0) - accept_target) / std::sqrt(static_cast<double>(b));
      ++run_count;
      const Eigen::VectorXd delta = x - run_mean;
      run_mean += delta / static_cast<double>(run_count);
      run_m2 += delta * (x - run_mean).transpose();
      if (run_count > 2 * d + 10 && b % 100 == 0) {
        Eigen::MatrixXd cov = run_m2 / static_cast<double>(run_count - 1);
        cov.diagonal().array() += 1e-9;
        const Eigen::LLT<Eigen::MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
          chol = llt.matrixL();
          chol *= 2.38 / std::sqrt(static_cast<double>(d));
        }
      }
      if (b == config.burn_in) out.adaptation_frozen = true;
    } else {
      ++post_proposed;
      post_accepted += accept;
      if ((b - config.burn_in) % config.thinning == 0) {
        for (int j = 0; j < target.sigma_offset; ++j) out.draws(kept_index, j) = x[j];
        for (int q = 0; q < model.n_blocks(); ++q) {
          out.draws(kept_index, target.sigma_offset + q) = std::exp(x[target.sigma_offset + q]);
        }
        ++kept_index;
      }
    }
  }
  if (config.burn_in == 0) out.adaptation_frozen = true;

  out.acceptance_rate =
      post_proposed > 0 ? static_cast<double>(post_accepted) / post_proposed : 0.0;
  out.warning_flag = out.acceptance_rate < 0.05 || out.acceptance_rate > 0.7;
  return out;
}

}  // namespace auxmix
