#include "auxmix/model.hpp"

#include "auxmix/errors.hpp"
#include "auxmix/nlg.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace auxmix {

namespace {

bool approx_symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

}  // namespace

void PoissonLgm::validate() const {
  const int nn = n();
  if (t.size() != nn || X.rows() != nn) {
    throw std::invalid_argument("PoissonLgm: y, t and X must agree on the number of observations");
  }
  for (int i = 0; i < nn; ++i) {
    if (y[i] < 0) throw std::invalid_argument("PoissonLgm: counts must be non-negative");
    if (!(t[i] > 0.0) || !std::isfinite(t[i])) {
      throw std::invalid_argument("PoissonLgm: offsets must be positive and finite");
    }
  }
  if (V0.rows() != p() || V0.cols() != p() || !approx_symmetric(V0)) {
    throw std::invalid_argument("PoissonLgm: V0 must be symmetric of order cols(X)");
  }
  if (Eigen::LLT<Eigen::MatrixXd>(V0).info() != Eigen::Success) {
    throw std::invalid_argument("PoissonLgm: V0 must be positive definite");
  }
  for (std::size_t q = 0; q < blocks.size(); ++q) {
    const RandomEffectBlock& b = blocks[q];
    if (b.Z.rows() != nn) {
      throw std::invalid_argument("PoissonLgm: each Z block needs one row per observation");
    }
    if (b.K.rows() != b.Z.cols() || !approx_symmetric(b.K)) {
      throw std::invalid_argument("PoissonLgm: K must be symmetric of order cols(Z)");
    }
    if (b.rank < 0 || b.rank > b.K.rows()) {
      throw std::invalid_argument("PoissonLgm: block rank out of range");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.K, Eigen::EigenvaluesOnly);
    const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < -1e-10 * scale) {
      throw std::invalid_argument("PoissonLgm: K must be non-negative definite");
    }
    if (!(b.sigma2_prior.a > 0.0) || !(b.sigma2_prior.b > 0.0)) {
      throw std::invalid_argument("PoissonLgm: sigma2 prior parameters must be positive");
    }
  }
}

Eigen::VectorXd augmented_eta(const Eigen::VectorXd& beta,
                              const std::vector<Eigen::VectorXd>& gamma,
                              const AugmentedDesign& aux) {
  if (beta.size() != aux.Xstar.cols() || gamma.size() != aux.Zstar.size()) {
    throw std::invalid_argument("augmented_eta: coefficient dimensions do not match the design");
  }
  Eigen::VectorXd eta = aux.log_offset;
  eta.noalias() += aux.Xstar * beta;
  for (std::size_t q = 0; q < gamma.size(); ++q) {
    if (gamma[q].size() != aux.Zstar[q].cols()) {
      throw std::invalid_argument("augmented_eta: gamma block length mismatch");
    }
    eta.noalias() += aux.Zstar[q] * gamma[q];
  }
  return eta;
}

std::vector<int> sample_labels(const Eigen::VectorXd& residuals,
                               const std::vector<const GaussianMixture*>& mixtures,
                               RngStream& rng, long long* underflows) {
  const std::size_t n = static_cast<std::size_t>(residuals.size());
  if (mixtures.size() != n) {
    throw std::invalid_argument("sample_labels: one mixture per residual required");
  }
  std::vector<int> labels(n);
  if (underflows) *underflows = 0;
  std::vector<double> logp;
  for (std::size_t i = 0; i < n; ++i) {
    const GaussianMixture& m = *mixtures[i];
    if (!m.finalized()) throw std::logic_error("sample_labels: mixture not finalized");
    const std::size_t k = m.comps.size();
    logp.resize(k);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const double d = residuals[i] - m.comps[j].mean;
      logp[j] = m.log_w[j] + m.log_norm[j] - d * d * m.half_prec[j];
      if (logp[j] > best) best = logp[j];
    }
    if (!std::isfinite(best)) {
      // every component's density vanished: pick the nearest mean
      std::size_t arg = 0;
      for (std::size_t j = 1; j < k; ++j) {
        if (std::abs(residuals[i] - m.comps[j].mean) <
            std::abs(residuals[i] - m.comps[arg].mean)) {
          arg = j;
        }
      }
      labels[i] = static_cast<int>(arg);
      if (underflows) ++*underflows;
      continue;
    }
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      logp[j] = std::exp(logp[j] - best);
      total += logp[j];
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    std::size_t pick = k - 1;
    for (std::size_t j = 0; j < k; ++j) {
      acc += logp[j];
      if (u <= acc) {
        pick = j;
        break;
      }
    }
    labels[i] = static_cast<int>(pick);
  }
  return labels;
}

void label_moments(const std::vector<int>& labels,
                   const std::vector<const GaussianMixture*>& mixtures,
                   Eigen::VectorXd& mean, Eigen::VectorXd& var) {
  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  if (mixtures.size() != labels.size()) {
    throw std::invalid_argument("label_moments: one mixture per label required");
  }
  mean.resize(n);
  var.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const GaussianMixture& m = *mixtures[static_cast<std::size_t>(i)];
    const int r = labels[static_cast<std::size_t>(i)];
    if (r < 0 || r >= static_cast<int>(m.comps.size())) {
      throw std::invalid_argument("label_moments: label outside the mixture");
    }
    mean[i] = m.comps[static_cast<std::size_t>(r)].mean;
    var[i] = m.comps[static_cast<std::size_t>(r)].var;
  }
}

namespace {

// Factor a symmetric positive definite precision matrix, retrying with
// relative diagonal jitter before giving up; near-singular systems arise from
// very small mixture-component variances.
Eigen::LLT<Eigen::MatrixXd> factor_precision(Eigen::MatrixXd precision, const char* what) {
  const double scale = std::max(1.0, precision.diagonal().cwiseAbs().maxCoeff());
  if (!precision.allFinite()) {
    throw NumericalError(std::string(what) + ": precision matrix has non-finite entries");
  }
  for (double jitter : {0.0, 1e-10, 1e-8}) {
    Eigen::MatrixXd p = precision;
    p.diagonal().array() += jitter * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(p);
    if (llt.info() == Eigen::Success) return llt;
  }
  std::ostringstream os;
  os << what << ": precision factorization failed (diag range [" << precision.diagonal().minCoeff()
     << ", " << precision.diagonal().maxCoeff() << "])";
  throw NumericalError(os.str());
}

}  // namespace

FullConditional gaussian_full_conditional(int block, const LatentState& state,
                                          const PoissonLgm& model) {
  const Eigen::Index rows = state.aux.rows();
  if (state.label_mean.size() != rows || state.label_var.size() != rows) {
    throw std::invalid_argument("gaussian_full_conditional: label moments out of date");
  }
  const int q_count = model.n_blocks();
  if (block < -1 || block >= q_count) {
    throw std::invalid_argument("gaussian_full_conditional: no such block");
  }

  // residual the block must explain: y* minus offset, other blocks and the
  // mixture-component means at the current labels
  Eigen::VectorXd w = state.aux.y_star - state.aux.log_offset - state.label_mean;
  if (block != -1) w.noalias() -= state.aux.Xstar * state.beta;
  for (int q = 0; q < q_count; ++q) {
    if (q != block) w.noalias() -= state.aux.Zstar[static_cast<std::size_t>(q)] * state.gamma[static_cast<std::size_t>(q)];
  }

  const Eigen::MatrixXd& A =
      block == -1 ? state.aux.Xstar : state.aux.Zstar[static_cast<std::size_t>(block)];
  const Eigen::VectorXd d = state.label_var.cwiseInverse();

  Eigen::MatrixXd precision;
  if (block == -1) {
    precision = model.V0.llt().solve(Eigen::MatrixXd::Identity(model.p(), model.p()));
  } else {
    const RandomEffectBlock& b = model.blocks[static_cast<std::size_t>(block)];
    precision = b.K / state.sigma2[static_cast<std::size_t>(block)];
  }
  precision.noalias() += A.transpose() * d.asDiagonal() * A;

  const Eigen::VectorXd rhs = A.transpose() * d.cwiseProduct(w).matrix();
  Eigen::LLT<Eigen::MatrixXd> llt = factor_precision(precision, "gaussian_full_conditional");

  FullConditional fc;
  fc.mean = llt.solve(rhs);
  const Eigen::MatrixXd cov =
      llt.solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
  Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
  if (cov_llt.info() != Eigen::Success) {
    Eigen::MatrixXd c = cov;
    c.diagonal().array() += 1e-14 * std::max(1.0, cov.diagonal().maxCoeff());
    cov_llt.compute(c);
    if (cov_llt.info() != Eigen::Success) {
      throw NumericalError("gaussian_full_conditional: covariance factorization failed");
    }
  }
  fc.chol_lower = cov_llt.matrixL();
  return fc;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           RngStream& rng) {
  if (chol_lower.rows() != mean.size() || chol_lower.cols() != mean.size()) {
    throw std::invalid_argument("sample_mvn: factor shape mismatch");
  }
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + chol_lower * z;
}

double sigma2_update(const RandomEffectBlock& block, const Eigen::VectorXd& gamma_q,
                     double current, MhStepState& step, bool adapt, RngStream& rng) {
  if (gamma_q.size() != block.K.rows()) {
    throw std::invalid_argument("sigma2_update: gamma length does not match K");
  }
  const double quad = gamma_q.dot(block.K * gamma_q);
  if (quad < -1e-12 * std::max(1.0, gamma_q.squaredNorm())) {
    throw NumericalError("sigma2_update: negative prior quadratic form");
  }
  const double q2 = std::max(quad, 0.0);
  const SigmaPrior& prior = block.sigma2_prior;

  if (prior.kind == SigmaPrior::Kind::InverseGamma) {
    const double shape = prior.a + 0.5 * block.rank;
    const double rate = prior.b + 0.5 * q2;
    return rate / rng.gamma(shape);
  }

  // Gamma(a, b) prior: random-walk Metropolis on x = log sigma2 against the
  // exact conditional, log pi*(x) = a x - b e^x - (rank/2) x - (q2/2) e^{-x}
  // (prior density times the Gaussian quadratic form, Jacobian included).
  if (!(current > 0.0)) throw std::invalid_argument("sigma2_update: current sigma2 must be > 0");
  auto log_target = [&](double x) {
    return prior.a * x - prior.b * std::exp(x) - 0.5 * block.rank * x -
           0.5 * q2 * std::exp(-x);
  };
  const double x = std::log(current);
  const double prop = x + std::exp(step.log_step) * rng.normal();
  const double log_alpha = log_target(prop) - log_target(x);
  ++step.proposed;
  const bool accept = std::log(rng.uniform()) < log_alpha;
  if (accept) ++step.accepted;
  if (adapt) {
    step.log_step += ((accept ? 1.0 : 0.0) - 0.44) / std::sqrt(static_cast<double>(step.proposed));
  }
  return accept ? std::exp(prop) : current;
}

double exact_poisson_loglik(const Eigen::VectorXd& beta,
                            const std::vector<Eigen::VectorXd>& gamma, const PoissonLgm& model) {
  const int n = model.n();
  if (beta.size() != model.p() || static_cast<int>(gamma.size()) != model.n_blocks()) {
    throw std::invalid_argument("exact_poisson_loglik: coefficient dimensions mismatch");
  }
  Eigen::VectorXd eta = model.X * beta;
  for (std::size_t q = 0; q < gamma.size(); ++q) {
    eta.noalias() += model.blocks[q].Z * gamma[q];
  }
  double ll = 0.0;
  for (int i = 0; i < n; ++i) {
    const double eta_t = eta[i] + std::log(model.t[i]);
    if (eta_t > 700.0) return -std::numeric_limits<double>::infinity();
    ll += model.y[i] * eta_t - std::exp(eta_t) - std::lgamma(model.y[i] + 1.0);
  }
  return ll;
}

double augmented_loglik(const Eigen::VectorXd& beta, const std::vector<Eigen::VectorXd>& gamma,
                        const AugmentedDesign& aux, ResidualLaw law, MixtureStore& store,
                        const std::vector<char>* adjusted_rows) {
  const Eigen::Index rows = aux.rows();
  if (rows == 0) return 0.0;
  if (adjusted_rows && static_cast<Eigen::Index>(adjusted_rows->size()) != rows) {
    throw std::invalid_argument("augmented_loglik: adjusted-row flags length mismatch");
  }
  const Eigen::VectorXd eps = aux.y_star - augmented_eta(beta, gamma, aux);
  double ll = 0.0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double nu = aux.vars[static_cast<std::size_t>(r)].nu;
    switch (law) {
      case ResidualLaw::ExactNlg:
        ll += nlg_log_density(eps[r], NlgShape(nu));
        break;
      case ResidualLaw::BaseMixture:
        ll += mixture_log_density(store.base(nu), eps[r]);
        break;
      case ResidualLaw::AdjustedMixture: {
        const bool flagged = !adjusted_rows || (*adjusted_rows)[static_cast<std::size_t>(r)] != 0;
        const GaussianMixture& m = flagged ? store.adjusted(nu) : store.base(nu);
        ll += mixture_log_density(m, eps[r]);
        break;
      }
    }
  }
  return ll;
}

}  // namespace auxmix
