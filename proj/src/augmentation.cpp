#include "auxmix/augmentation.hpp"

#include "auxmix/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace auxmix {

namespace {

void check_rate(double lambda, double zeta) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("augment: lambda must be positive and finite");
  }
  if (!(zeta > 0.0) || !std::isfinite(zeta)) {
    throw std::invalid_argument("augment: zeta must be positive and finite");
  }
}

}  // namespace

std::vector<double> ams_augment_det(long long y, double lambda,
                                    const std::vector<double>& uniforms, double zeta) {
  if (y < 0) throw std::invalid_argument("ams_augment_det: negative count");
  check_rate(lambda, zeta);
  if (static_cast<long long>(uniforms.size()) != y) {
    throw std::invalid_argument("ams_augment_det: need exactly y uniforms");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(y) + 1);
  double prev = 0.0;
  for (double u : uniforms) {
    if (!(u > prev) || !(u < 1.0)) {
      throw std::invalid_argument("ams_augment_det: uniforms must be strictly increasing in (0,1)");
    }
    out.push_back(-std::log(u - prev));
    prev = u;
  }
  out.push_back(-std::log(1.0 - prev + zeta / lambda));
  return out;
}

std::pair<double, std::optional<double>> iams_augment_det(long long y, double lambda,
                                                          std::optional<double> beta_draw,
                                                          double zeta) {
  if (y < 0) throw std::invalid_argument("iams_augment_det: negative count");
  check_rate(lambda, zeta);
  if (y == 0) {
    if (beta_draw) {
      throw std::invalid_argument("iams_augment_det: y = 0 takes no Beta draw");
    }
    return {-std::log1p(zeta / lambda), std::nullopt};
  }
  if (!beta_draw) {
    throw std::invalid_argument("iams_augment_det: y > 0 requires a Beta draw");
  }
  const double tau2 = *beta_draw;
  if (!(tau2 > 0.0) || !(tau2 < 1.0)) {
    throw std::invalid_argument("iams_augment_det: Beta draw must lie in (0,1)");
  }
  const double tau1 = 1.0 - tau2 + zeta / lambda;
  return {-std::log(tau1), -std::log(tau2)};
}

std::vector<double> ams_augment(long long y, double lambda, RngStream& rng) {
  std::vector<double> uniforms(static_cast<std::size_t>(std::max<long long>(y, 0)));
  for (double& u : uniforms) u = rng.uniform();
  std::sort(uniforms.begin(), uniforms.end());
  return ams_augment_det(y, lambda, uniforms, rng.exponential());
}

std::pair<double, std::optional<double>> iams_augment(long long y, double lambda, RngStream& rng) {
  std::optional<double> beta_draw;
  if (y > 0) beta_draw = rng.beta_y1(static_cast<double>(y));
  return iams_augment_det(y, lambda, beta_draw, rng.exponential());
}

long long ams_total_aux(const Eigen::VectorXi& y) {
  long long total = y.size();
  for (Eigen::Index i = 0; i < y.size(); ++i) total += y[i];
  return total;
}

long long iams_total_aux(const Eigen::VectorXi& y) {
  long long total = 2 * y.size();
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y[i] == 0) --total;
  }
  return total;
}

std::vector<std::vector<AuxiliaryVariable>> ams_augment_model(const Eigen::VectorXi& y,
                                                              const Eigen::VectorXd& rate,
                                                              RngStream& rng) {
  if (y.size() != rate.size()) throw std::invalid_argument("ams_augment_model: size mismatch");
  std::vector<std::vector<AuxiliaryVariable>> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const std::vector<double> ystar = ams_augment(y[i], rate[i], rng);
    auto& obs = out[static_cast<std::size_t>(i)];
    obs.reserve(ystar.size());
    for (std::size_t j = 0; j < ystar.size(); ++j) {
      obs.push_back({static_cast<int>(i), static_cast<int>(j) + 1, ystar[j], 1.0});
    }
  }
  return out;
}

std::vector<std::vector<AuxiliaryVariable>> iams_augment_model(const Eigen::VectorXi& y,
                                                               const Eigen::VectorXd& rate,
                                                               RngStream& rng) {
  if (y.size() != rate.size()) throw std::invalid_argument("iams_augment_model: size mismatch");
  std::vector<std::vector<AuxiliaryVariable>> out(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto [ystar1, ystar2] = iams_augment(y[i], rate[i], rng);
    auto& obs = out[static_cast<std::size_t>(i)];
    obs.push_back({static_cast<int>(i), 1, ystar1, 1.0});
    if (ystar2) {
      obs.push_back({static_cast<int>(i), 2, *ystar2, static_cast<double>(y[i])});
    }
  }
  return out;
}

AugmentedDesign flatten_augmented(const PoissonLgm& model,
                                  const std::vector<std::vector<AuxiliaryVariable>>& aux) {
  const int n = model.n();
  if (static_cast<int>(aux.size()) != n) {
    throw std::invalid_argument("flatten_augmented: one auxiliary list per observation required");
  }
  Eigen::Index total = 0;
  for (const auto& obs : aux) total += static_cast<Eigen::Index>(obs.size());

  AugmentedDesign d;
  d.vars.reserve(static_cast<std::size_t>(total));
  d.Xstar.resize(total, model.X.cols());
  d.Zstar.reserve(model.blocks.size());
  for (const RandomEffectBlock& b : model.blocks) {
    d.Zstar.emplace_back(total, b.Z.cols());
  }
  d.y_star.resize(total);
  d.log_offset.resize(total);

  Eigen::Index row = 0;
  for (int i = 0; i < n; ++i) {
    for (const AuxiliaryVariable& v : aux[static_cast<std::size_t>(i)]) {
      if (v.obs_index != i) {
        throw std::invalid_argument("flatten_augmented: auxiliary list misassigned to observation");
      }
      d.vars.push_back(v);
      d.Xstar.row(row) = model.X.row(i);
      for (std::size_t q = 0; q < d.Zstar.size(); ++q) {
        d.Zstar[q].row(row) = model.blocks[q].Z.row(i);
      }
      d.y_star[row] = v.y_star;
      d.log_offset[row] = std::log(model.t[i]);
      ++row;
    }
  }
  return d;
}

}  // namespace auxmix
