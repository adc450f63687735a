#pragma once

#include "auxmix/rng.hpp"

#include <Eigen/Dense>

#include <optional>
#include <utility>
#include <vector>

namespace auxmix {

struct PoissonLgm;

// One auxiliary variable produced by a Step-1 augmentation. `slot` numbers the
// variables within an observation (full scheme: 1..y+1; parsimonious scheme:
// 1 always, 2 only when y > 0). `nu` is the shape of the variable's residual
// law: 1 everywhere except the parsimonious slot 2, whose residual follows the
// negative log-gamma law with shape y.
struct AuxiliaryVariable {
  int obs_index = 0;
  int slot = 0;
  double y_star = 0.0;
  double nu = 1.0;
};

// Row-expanded regression view of an augmented dataset: one row per auxiliary
// variable, repeating the owning observation's covariates. Offsets t_i enter
// as log t_i added to the linear predictor of every row of observation i, so
// residuals are y_star - (x row) beta - sum_q (z_q row) gamma_q - log_offset.
struct AugmentedDesign {
  std::vector<AuxiliaryVariable> vars;
  Eigen::MatrixXd Xstar;               // n_star x (P+1)
  std::vector<Eigen::MatrixXd> Zstar;  // per block, n_star x m_q
  Eigen::VectorXd y_star;              // n_star
  Eigen::VectorXd log_offset;          // n_star

  Eigen::Index rows() const { return Xstar.rows(); }
};

// Full-scheme kernel: inter-arrival times of a unit-window arrival process.
// Takes the raw draws as arguments so the mapping is a pure function: the
// first y gaps are consecutive differences of the sorted uniforms, and the
// closing gap is 1 - u_(y) + zeta / lambda. Returns -log of each gap (y + 1
// values). y = 0 needs no uniforms and yields the single value
// -log(1 + zeta / lambda).
std::vector<double> ams_augment_det(long long y, double lambda,
                                    const std::vector<double>& uniforms, double zeta);

// Parsimonious-scheme kernel: at most two variables per observation.
// y = 0: tau_1 = 1 + zeta / lambda, no second variable (beta_draw must be
// absent). y > 0: tau_2 = beta_draw (a Beta(y, 1) variate), tau_1 =
// 1 - tau_2 + zeta / lambda. Returns -log of each.
std::pair<double, std::optional<double>> iams_augment_det(long long y, double lambda,
                                                          std::optional<double> beta_draw,
                                                          double zeta);

// Random wrappers: draw the uniforms / Beta variate / closing Exp(1) from the
// stream and delegate to the deterministic kernels.
std::vector<double> ams_augment(long long y, double lambda, RngStream& rng);
std::pair<double, std::optional<double>> iams_augment(long long y, double lambda, RngStream& rng);

// Number of auxiliary variables each scheme produces for a count vector:
// full scheme n + sum y_i, parsimonious 2n - #{y_i = 0}.
long long ams_total_aux(const Eigen::VectorXi& y);
long long iams_total_aux(const Eigen::VectorXi& y);

// Whole-dataset wrappers: one inner list per observation, slots in order.
// `rate` is the total Poisson rate per observation (offset included), i.e.
// exp of the full linear predictor.
std::vector<std::vector<AuxiliaryVariable>> ams_augment_model(const Eigen::VectorXi& y,
                                                              const Eigen::VectorXd& rate,
                                                              RngStream& rng);
std::vector<std::vector<AuxiliaryVariable>> iams_augment_model(const Eigen::VectorXi& y,
                                                               const Eigen::VectorXd& rate,
                                                               RngStream& rng);

// Row-expands the model's design matrices to match the per-observation
// auxiliary lists (outer index = observation, inner = slot order).
AugmentedDesign flatten_augmented(const PoissonLgm& model,
                                  const std::vector<std::vector<AuxiliaryVariable>>& aux);

}  // namespace auxmix
