#pragma once

#include "auxmix/augmentation.hpp"
#include "auxmix/mixture.hpp"
#include "auxmix/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace auxmix {

// Prior for a block variance sigma2_q. InverseGamma(a, b) is conjugate and
// sampled in closed form; Gamma(a, b) (shape, rate) requires a random-walk
// Metropolis step on log sigma2.
struct SigmaPrior {
  enum class Kind { InverseGamma, Gamma };
  Kind kind = Kind::InverseGamma;
  double a = 1.0;
  double b = 0.001;
};

// One additive random-effect component: design Z (n x m), prior precision K
// (m x m, symmetric non-negative definite, scaled by 1/sigma2), and the rank
// of K (degrees of freedom entering the variance update).
struct RandomEffectBlock {
  Eigen::MatrixXd Z;
  Eigen::MatrixXd K;
  int rank = 0;
  SigmaPrior sigma2_prior;
};

// Poisson observation model with a latent Gaussian linear predictor:
// y_i ~ Poisson(t_i * exp(x_i beta + sum_q z_qi gamma_q)).
struct PoissonLgm {
  Eigen::VectorXi y;
  Eigen::VectorXd t;                      // positive offsets, length n
  Eigen::MatrixXd X;                      // n x (P+1), includes the intercept column
  std::vector<RandomEffectBlock> blocks;
  Eigen::MatrixXd V0;                     // (P+1) x (P+1) prior covariance of beta

  int n() const { return static_cast<int>(y.size()); }
  int p() const { return static_cast<int>(X.cols()); }
  int n_blocks() const { return static_cast<int>(blocks.size()); }

  // Throws std::invalid_argument on dimension mismatch, non-positive offsets,
  // asymmetric V0 / K_q, or negative counts.
  void validate() const;
};

// Everything that changes from one sweep to the next.
struct LatentState {
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> gamma;
  std::vector<double> sigma2;
  AugmentedDesign aux;
  std::vector<int> labels;        // per aux row, index into that row's mixture
  Eigen::VectorXd label_mean;     // mixture component mean at the label
  Eigen::VectorXd label_var;      // mixture component variance at the label
};

// Linear predictor of every augmented row: X* beta + sum_q Z*_q gamma_q plus
// the per-row log offset.
Eigen::VectorXd augmented_eta(const Eigen::VectorXd& beta,
                              const std::vector<Eigen::VectorXd>& gamma,
                              const AugmentedDesign& aux);

// Draws one mixture label per auxiliary row with probability proportional to
// w_k phi(eps; m_k, s2_k). `mixtures` holds the active mixture per row (base
// or tail-adjusted). If every component's density underflows for some row the
// label falls back to the component with the nearest mean; `underflows`, when
// given, counts such rows.
std::vector<int> sample_labels(const Eigen::VectorXd& residuals,
                               const std::vector<const GaussianMixture*>& mixtures,
                               RngStream& rng, long long* underflows = nullptr);

// Component moments at the given labels, ready for the linear-model updates.
void label_moments(const std::vector<int>& labels,
                   const std::vector<const GaussianMixture*>& mixtures,
                   Eigen::VectorXd& mean, Eigen::VectorXd& var);

// Gaussian full conditional of one coefficient block under the current labels:
// block -1 is beta (prior N(0, V0)), block q >= 0 is gamma_q (prior precision
// K_q / sigma2_q). Returns the mean and a lower-triangular factor L of the
// covariance (Sigma = L L^T).
struct FullConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd chol_lower;
};
FullConditional gaussian_full_conditional(int block, const LatentState& state,
                                          const PoissonLgm& model);

// mean + L z with z iid standard normal.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean, const Eigen::MatrixXd& chol_lower,
                           RngStream& rng);

// Step-size state of an adaptive scalar random-walk Metropolis kernel.
struct MhStepState {
  double log_step = 0.0;
  long long proposed = 0;
  long long accepted = 0;
};

// One update of sigma2_q given gamma_q. InverseGamma priors use the conjugate
// closed form InvGamma(a + rank/2, b + gamma' K gamma / 2). Gamma priors take
// a random-walk Metropolis step on log sigma2 against the exact conditional;
// when `adapt` is set the step size drifts toward 0.44 acceptance.
double sigma2_update(const RandomEffectBlock& block, const Eigen::VectorXd& gamma_q,
                     double current, MhStepState& step, bool adapt, RngStream& rng);

// Exact Poisson log likelihood including the normalization constant:
// sum_i [y_i eta'_i - t_i exp(eta_i) - log y_i!] with eta' = eta + log t.
// Overflow of the rate returns -infinity.
double exact_poisson_loglik(const Eigen::VectorXd& beta,
                            const std::vector<Eigen::VectorXd>& gamma, const PoissonLgm& model);

// Which residual law the augmented likelihood integrates over.
enum class ResidualLaw {
  ExactNlg,         // negative log-gamma density, shape per row
  BaseMixture,      // fitted mixture for the row's shape
  AdjustedMixture,  // tail-adjusted mixture on flagged rows, base elsewhere
};

// Sum over augmented rows of the chosen log density of eps = y* - eta.
// `adjusted_rows` marks which rows use the tail-adjusted mixture when the law
// is AdjustedMixture (null means every row).
double augmented_loglik(const Eigen::VectorXd& beta, const std::vector<Eigen::VectorXd>& gamma,
                        const AugmentedDesign& aux, ResidualLaw law, MixtureStore& store,
                        const std::vector<char>* adjusted_rows = nullptr);

}  // namespace auxmix
