#include "doctest.h"

#include "auxmix/errors.hpp"
#include "auxmix/mixture.hpp"
#include "auxmix/model.hpp"
#include "auxmix/nlg.hpp"
#include "auxmix/rng.hpp"
#include "test_util.hpp"

#include <cmath>
#include <vector>

using namespace auxmix;

namespace {

GaussianMixture make_mixture(std::vector<MixtureComponent> comps, double nu = 1.0) {
  GaussianMixture m;
  m.nu = nu;
  m.comps = std::move(comps);
  m.finalize();
  return m;
}

// Hand-built augmented design with trivial metadata, for linear-algebra tests.
AugmentedDesign make_design(const Eigen::MatrixXd& Xstar,
                            const std::vector<Eigen::MatrixXd>& Zstar,
                            const Eigen::VectorXd& y_star, const Eigen::VectorXd& log_offset) {
  AugmentedDesign d;
  d.Xstar = Xstar;
  d.Zstar = Zstar;
  d.y_star = y_star;
  d.log_offset = log_offset;
  for (Eigen::Index r = 0; r < y_star.size(); ++r) {
    d.vars.push_back({static_cast<int>(r), 1, y_star[r], 1.0});
  }
  return d;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("model validation rejects inconsistent inputs") {
  PoissonLgm ok;
  ok.y = Eigen::VectorXi::Zero(3);
  ok.t = Eigen::VectorXd::Ones(3);
  ok.X = Eigen::MatrixXd::Ones(3, 2);
  ok.V0 = Eigen::MatrixXd::Identity(2, 2);
  RandomEffectBlock blk;
  blk.Z = Eigen::MatrixXd::Identity(3, 3);
  blk.K = Eigen::MatrixXd::Identity(3, 3);
  blk.rank = 3;
  ok.blocks.push_back(blk);
  CHECK_NOTHROW(ok.validate());

  PoissonLgm bad = ok;
  bad.t[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.y[0] = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.X = Eigen::MatrixXd::Ones(2, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.V0 << 1.0, 0.5, -0.5, 1.0;  // asymmetric
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.V0 = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.blocks[0].K = -Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

  bad = ok;
  bad.blocks[0].rank = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("label sampling: degenerate and symmetric cases") {
  RngStream rng(11);

  // single component: the only label
  GaussianMixture one = make_mixture({{1.0, 0.0, 1.0}});
  Eigen::VectorXd eps1 = Eigen::VectorXd::Constant(50, 0.37);
  std::vector<const GaussianMixture*> mix1(50, &one);
  for (int lab : sample_labels(eps1, mix1, rng)) CHECK(lab == 0);

  // two equally weighted components at +-1, residual at 0: exact coin flip
  GaussianMixture two = make_mixture({{0.5, -1.0, 1.0}, {0.5, 1.0, 1.0}});
  const int n = 100000;
  Eigen::VectorXd eps2 = Eigen::VectorXd::Zero(n);
  std::vector<const GaussianMixture*> mix2(n, &two);
  const std::vector<int> labs = sample_labels(eps2, mix2, rng);
  double freq = 0.0;
  for (int lab : labs) freq += lab;
  freq /= n;
  CHECK(std::abs(freq - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));

  // identical components: labels uniform regardless of the residual
  GaussianMixture flat = make_mixture({{0.5, 0.0, 5.0}, {0.5, 0.0, 5.0}});
  Eigen::VectorXd eps3 = Eigen::VectorXd::Constant(n, 1.7);
  std::vector<const GaussianMixture*> mix3(n, &flat);
  double freq3 = 0.0;
  for (int lab : sample_labels(eps3, mix3, rng)) freq3 += lab;
  freq3 /= n;
  CHECK(std::abs(freq3 - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("label sampling concentrates in the residual's basin") {
  GaussianMixture three =
      make_mixture({{1.0 / 3, -4.0, 1.0}, {1.0 / 3, 0.0, 1.0}, {1.0 / 3, 4.0, 1.0}});
  // direct posterior probability of the right-most component at eps = 4
  const double p_far = 1.0 / (1.0 + std::exp(-8.0) + std::exp(-32.0));
  CHECK(p_far > 0.999);

  RngStream rng(12);
  const int n = 10000;
  Eigen::VectorXd eps = Eigen::VectorXd::Constant(n, 4.0);
  std::vector<const GaussianMixture*> mix(n, &three);
  int hits = 0;
  for (int lab : sample_labels(eps, mix, rng)) hits += (lab == 2);
  const double se = std::sqrt(p_far * (1.0 - p_far) / n);
  CHECK(static_cast<double>(hits) / n > p_far - 4.0 * se);
}

TEST_CASE("label sampling falls back to the nearest mean when all densities vanish") {
  GaussianMixture m = make_mixture({{0.5, -1e200, 1.0}, {0.5, 0.0, 1.0}});
  RngStream rng(13);
  Eigen::VectorXd eps = Eigen::VectorXd::Constant(3, 1e200);
  std::vector<const GaussianMixture*> mix(3, &m);
  long long underflows = 0;
  const std::vector<int> labs = sample_labels(eps, mix, rng, &underflows);
  CHECK(underflows == 3);
  for (int lab : labs) CHECK(lab == 1);
}

TEST_CASE("label moments read the component parameters at the labels") {
  GaussianMixture m = make_mixture({{0.3, -2.0, 0.25}, {0.7, 1.5, 4.0}});
  std::vector<const GaussianMixture*> mix(3, &m);
  Eigen::VectorXd mean, var;
  label_moments({1, 0, 1}, mix, mean, var);
  CHECK(mean[0] == 1.5);
  CHECK(var[0] == 4.0);
  CHECK(mean[1] == -2.0);
  CHECK(var[1] == 0.25);
  CHECK(mean[2] == 1.5);
  Eigen::VectorXd m2, v2;
  CHECK_THROWS_AS(label_moments({2, 0, 0}, mix, m2, v2), std::invalid_argument);
}

TEST_CASE("full conditional with no data returns the prior") {
  PoissonLgm model;
  model.y = Eigen::VectorXi(0);
  model.t = Eigen::VectorXd(0);
  model.X = Eigen::MatrixXd(0, 2);
  model.V0 = Eigen::MatrixXd(2, 2);
  model.V0 << 2.0, 0.3, 0.3, 1.0;

  LatentState state;
  state.beta = Eigen::VectorXd::Zero(2);
  state.aux = make_design(Eigen::MatrixXd(0, 2), {}, Eigen::VectorXd(0), Eigen::VectorXd(0));
  state.label_mean = Eigen::VectorXd(0);
  state.label_var = Eigen::VectorXd(0);

  const FullConditional fc = gaussian_full_conditional(-1, state, model);
  CHECK(fc.mean.cwiseAbs().maxCoeff() == 0.0);
  const Eigen::MatrixXd cov = fc.chol_lower * fc.chol_lower.transpose();
  CHECK((cov - model.V0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("full conditional matches the scalar precision-addition identity") {
  PoissonLgm model;
  model.y = Eigen::VectorXi::Zero(1);
  model.t = Eigen::VectorXd::Ones(1);
  model.X = Eigen::MatrixXd::Ones(1, 1);
  model.V0 = Eigen::MatrixXd::Identity(1, 1);

  LatentState state;
  state.beta = Eigen::VectorXd::Zero(1);
  state.aux = make_design(Eigen::MatrixXd::Ones(1, 1), {}, Eigen::VectorXd::Constant(1, 2.0),
                          Eigen::VectorXd::Zero(1));
  state.label_mean = Eigen::VectorXd::Zero(1);
  state.label_var = Eigen::VectorXd::Ones(1);

  const FullConditional fc = gaussian_full_conditional(-1, state, model);
  // precision 1 (prior) + 1 (one unit-variance row) = 2; mean = (1/2) * 2
  CHECK(fc.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fc.chol_lower(0, 0) * fc.chol_lower(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("full conditionals equal a dense brute-force solve") {
  RngStream rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const int rows = 3 + static_cast<int>(rng.raw() % 5);
    const int p = 2;
    const int m = 3;

    PoissonLgm model;
    model.y = Eigen::VectorXi::Zero(rows);
    model.t = Eigen::VectorXd::Ones(rows);
    model.X = Eigen::MatrixXd(rows, p);
    model.V0 = Eigen::MatrixXd::Identity(p, p) * (1.0 + rng.uniform());
    RandomEffectBlock blk;
    blk.Z = Eigen::MatrixXd(rows, m);
    blk.K = Eigen::MatrixXd::Identity(m, m);
    blk.rank = m;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < p; ++c) model.X(r, c) = rng.normal();
      for (int c = 0; c < m; ++c) blk.Z(r, c) = rng.normal();
    }
    model.blocks.push_back(blk);

    LatentState state;
    state.beta = Eigen::VectorXd(p);
    for (int c = 0; c < p; ++c) state.beta[c] = rng.normal();
    state.gamma.push_back(Eigen::VectorXd(m));
    for (int c = 0; c < m; ++c) state.gamma[0][c] = rng.normal();
    state.sigma2 = {0.5 + rng.uniform()};
    Eigen::VectorXd y_star(rows), log_off(rows), lmean(rows), lvar(rows);
    for (int r = 0; r < rows; ++r) {
      y_star[r] = rng.normal();
      log_off[r] = 0.2 * rng.normal();
      lmean[r] = 0.5 * rng.normal();
      lvar[r] = 0.3 + rng.uniform();
    }
    state.aux = make_design(model.X, {blk.Z}, y_star, log_off);
    state.label_mean = lmean;
    state.label_var = lvar;

    const Eigen::MatrixXd Dinv = lvar.cwiseInverse().asDiagonal();

    // beta block: precision = X' D^-1 X + V0^-1, mean solves the normal eqns
    {
      const FullConditional fc = gaussian_full_conditional(-1, state, model);
      const Eigen::MatrixXd prec =
          model.X.transpose() * Dinv * model.X + model.V0.inverse();
      const Eigen::VectorXd w = y_star - log_off - lmean - blk.Z * state.gamma[0];
      const Eigen::VectorXd mu = prec.inverse() * (model.X.transpose() * Dinv * w);
      CHECK((fc.mean - mu).cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::MatrixXd cov = fc.chol_lower * fc.chol_lower.transpose();
      CHECK((cov - prec.inverse()).cwiseAbs().maxCoeff() < 1e-10);
      // posterior precision = prior precision + data precision
      CHECK((cov.inverse() - prec).cwiseAbs().maxCoeff() < 1e-6);
    }

    // gamma block: precision = Z' D^-1 Z + K / sigma2
    {
      const FullConditional fc = gaussian_full_conditional(0, state, model);
      const Eigen::MatrixXd prec =
          blk.Z.transpose() * Dinv * blk.Z + blk.K / state.sigma2[0];
      const Eigen::VectorXd w = y_star - log_off - lmean - model.X * state.beta;
      const Eigen::VectorXd mu = prec.inverse() * (blk.Z.transpose() * Dinv * w);
      CHECK((fc.mean - mu).cwiseAbs().maxCoeff() < 1e-10);
      const Eigen::MatrixXd cov = fc.chol_lower * fc.chol_lower.transpose();
      CHECK((cov - prec.inverse()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("full conditional failure reports a numerical error") {
  PoissonLgm model;
  model.y = Eigen::VectorXi::Zero(1);
  model.t = Eigen::VectorXd::Ones(1);
  model.X = Eigen::MatrixXd::Ones(1, 1);
  model.V0 = Eigen::MatrixXd::Identity(1, 1);

  LatentState state;
  state.beta = Eigen::VectorXd::Zero(1);
  state.aux = make_design(Eigen::MatrixXd::Ones(1, 1), {}, Eigen::VectorXd::Ones(1),
                          Eigen::VectorXd::Zero(1));
  state.label_mean = Eigen::VectorXd::Zero(1);
  state.label_var = Eigen::VectorXd::Constant(1, 0.0);  // infinite data precision
  CHECK_THROWS_AS(gaussian_full_conditional(-1, state, model), NumericalError);

  CHECK_THROWS_AS(gaussian_full_conditional(1, state, model), std::invalid_argument);
}

TEST_CASE("multivariate normal sampling from the factor") {
  RngStream rng(31);
  // zero factor: returns the mean exactly
  Eigen::VectorXd mu(2);
  mu << 3.0, -1.0;
  CHECK((sample_mvn(mu, Eigen::MatrixXd::Zero(2, 2), rng) - mu).cwiseAbs().maxCoeff() == 0.0);

  // identity factor: componentwise unit variance
  const int n = 100000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2), sumsq = Eigen::VectorXd::Zero(2);
  double cross = 0.0;
  Eigen::MatrixXd L(2, 2);
  L << 1.0, 0.0, 0.8, 0.6;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd x = sample_mvn(Eigen::VectorXd::Zero(2), L, rng);
    sum += x;
    sumsq += x.cwiseProduct(x);
    cross += x[0] * x[1];
  }
  const Eigen::VectorXd mean = sum / n;
  const Eigen::VectorXd var = sumsq / n - mean.cwiseProduct(mean);
  // implied covariance L L^T = [[1, .8], [.8, 1]]
  const double se_var = std::sqrt(2.0 / n);
  CHECK(std::abs(var[0] - 1.0) < 4.0 * se_var);
  CHECK(std::abs(var[1] - 1.0) < 4.0 * se_var);
  const double corr = (cross / n - mean[0] * mean[1]) / std::sqrt(var[0] * var[1]);
  CHECK(std::abs(corr - 0.8) < 4.0 * (1.0 - 0.64) / std::sqrt(static_cast<double>(n)));

  CHECK_THROWS_AS(sample_mvn(mu, Eigen::MatrixXd::Zero(3, 3), rng), std::invalid_argument);
}

TEST_CASE("variance update: conjugate inverse-gamma draws") {
  RandomEffectBlock blk;
  blk.K = Eigen::MatrixXd::Identity(2, 2);
  blk.rank = 2;
  blk.sigma2_prior = {SigmaPrior::Kind::InverseGamma, 3.0, 2.0};

  RngStream rng(41);
  MhStepState step;
  // gamma = 0: the quadratic form vanishes and the draw is InvGamma(a + m/2, b)
  const double a_post = 3.0 + 1.0, b_post = 2.0;
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    sum += sigma2_update(blk, Eigen::VectorXd::Zero(2), 1.0, step, false, rng);
  }
  const double mean = sum / n;
  const double expect = b_post / (a_post - 1.0);
  const double sd = b_post / ((a_post - 1.0) * std::sqrt(a_post - 2.0));
  CHECK(std::abs(mean - expect) < 4.0 * sd / std::sqrt(static_cast<double>(n)));

  // nonzero gamma shifts the rate by the quadratic form
  Eigen::VectorXd g(2);
  g << 1.0, 2.0;  // gamma' K gamma = 5
  double sum2 = 0.0;
  for (int i = 0; i < n; ++i) sum2 += sigma2_update(blk, g, 1.0, step, false, rng);
  const double b2 = 2.0 + 2.5;
  CHECK(std::abs(sum2 / n - b2 / (a_post - 1.0)) <
        4.0 * (b2 / ((a_post - 1.0) * std::sqrt(a_post - 2.0))) / std::sqrt(static_cast<double>(n)));

  // negative quadratic form is rejected
  RandomEffectBlock bad = blk;
  bad.K = -Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(sigma2_update(bad, g, 1.0, step, false, rng), NumericalError);
}

TEST_CASE("variance update: random-walk step targets the exact conditional") {
  RandomEffectBlock blk;
  blk.K = Eigen::MatrixXd::Identity(1, 1);
  blk.rank = 1;
  blk.sigma2_prior = {SigmaPrior::Kind::Gamma, 1.0, 0.001};
  Eigen::VectorXd g(1);
  g << 1.3;
  const double q2 = 1.69;

  // quadrature of the conditional density s^{a-1-rank/2} exp(-b s - q2/(2s))
  // on a log grid, turned into an interpolable CDF
  const int gn = 16001;
  const double x_lo = -9.0, x_hi = 13.0;
  std::vector<double> xs(gn), cdf(gn);
  double total = 0.0;
  double prev = 0.0;
  for (int i = 0; i < gn; ++i) {
    xs[i] = x_lo + (x_hi - x_lo) * i / (gn - 1);
    // density in x = log s, Jacobian included
    const double lp = 1.0 * xs[i] - 0.001 * std::exp(xs[i]) - 0.5 * xs[i] -
                      0.5 * q2 * std::exp(-xs[i]);
    const double f = std::exp(lp);
    if (i > 0) total += 0.5 * (f + prev) * (xs[i] - xs[i - 1]);
    cdf[i] = total;
    prev = f;
  }
  for (double& c : cdf) c /= total;
  auto cdf_at = [&](double s) {
    const double x = std::log(s);
    if (x <= x_lo) return 0.0;
    if (x >= x_hi) return 1.0;
    const double pos = (x - x_lo) / (x_hi - x_lo) * (gn - 1);
    const int i = static_cast<int>(pos);
    const double frac = pos - i;
    return cdf[i] * (1.0 - frac) + cdf[i + 1] * frac;
  };

  RngStream rng(43);
  MhStepState step;
  double s = 1.0;
  for (int i = 0; i < 5000; ++i) s = sigma2_update(blk, g, s, step, true, rng);  // adapt
  const double acc_tune = static_cast<double>(step.accepted) / step.proposed;
  std::vector<double> draws(50000);
  MhStepState frozen = step;
  frozen.proposed = frozen.accepted = 0;
  for (double& d : draws) {
    s = sigma2_update(blk, g, s, frozen, false, rng);
    d = s;
  }
  const double acc = static_cast<double>(frozen.accepted) / frozen.proposed;
  CHECK(acc > 0.2);
  CHECK(acc < 0.7);
  CHECK(acc_tune > 0.1);
  CHECK(testutil::ks_statistic(draws, cdf_at) <= 0.02);
}

TEST_CASE("exact count log likelihood on worked cases") {
  PoissonLgm model;
  model.y = Eigen::VectorXi::Zero(1);
  model.t = Eigen::VectorXd::Ones(1);
  model.X = Eigen::MatrixXd::Ones(1, 1);
  model.V0 = Eigen::MatrixXd::Identity(1, 1);
  const Eigen::VectorXd beta0 = Eigen::VectorXd::Zero(1);

  CHECK(exact_poisson_loglik(beta0, {}, model) == doctest::Approx(-1.0).epsilon(1e-12));

  model.y[0] = 2;
  CHECK(exact_poisson_loglik(beta0, {}, model) ==
        doctest::Approx(-1.0 - std::log(2.0)).epsilon(1e-12));

  // overflow of the rate
  Eigen::VectorXd big(1);
  big << 800.0;
  CHECK(exact_poisson_loglik(big, {}, model) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("exact count log likelihood: gradient and concavity in eta") {
  RngStream rng(51);
  PoissonLgm model;
  const int n = 6, p = 2;
  model.y = Eigen::VectorXi(n);
  model.t = Eigen::VectorXd(n);
  model.X = Eigen::MatrixXd(n, p);
  model.V0 = Eigen::MatrixXd::Identity(p, p);
  for (int i = 0; i < n; ++i) {
    model.y[i] = static_cast<int>(rng.poisson(3.0));
    model.t[i] = 0.5 + rng.uniform();
    for (int c = 0; c < p; ++c) model.X(i, c) = 0.5 * rng.normal();
  }
  Eigen::VectorXd beta(p), dir(p);
  beta << 0.3, -0.2;
  dir << 0.7, 0.4;

  // directional derivative: sum (y_i - t_i e^{eta_i}) x_i . dir
  const Eigen::VectorXd eta = model.X * beta;
  double analytic = 0.0;
  for (int i = 0; i < n; ++i) {
    analytic += (model.y[i] - model.t[i] * std::exp(eta[i])) * model.X.row(i).dot(dir);
  }
  const double h = 1e-5;
  const double fd = (exact_poisson_loglik(beta + h * dir, {}, model) -
                     exact_poisson_loglik(beta - h * dir, {}, model)) /
                    (2.0 * h);
  CHECK(fd == doctest::Approx(analytic).epsilon(1e-6));

  // concavity along random lines: second difference non-positive
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd v(p);
    v << rng.normal(), rng.normal();
    const double step_len = 0.3;
    const double f0 = exact_poisson_loglik(beta - step_len * v, {}, model);
    const double f1 = exact_poisson_loglik(beta, {}, model);
    const double f2 = exact_poisson_loglik(beta + step_len * v, {}, model);
    CHECK(f0 + f2 - 2.0 * f1 <= 1e-9);
  }
}

TEST_CASE("augmented log likelihood sums per-residual log densities") {
  MixtureStore store;

  // empty design: empty sum
  AugmentedDesign empty = make_design(Eigen::MatrixXd(0, 1), {}, Eigen::VectorXd(0),
                                      Eigen::VectorXd(0));
  CHECK(augmented_loglik(Eigen::VectorXd::Zero(1), {}, empty, ResidualLaw::ExactNlg, store) ==
        0.0);

  // single shape-1 residual at zero under the exact law: log f(0) = -1
  AugmentedDesign one = make_design(Eigen::MatrixXd::Zero(1, 1), {}, Eigen::VectorXd::Zero(1),
                                    Eigen::VectorXd::Zero(1));
  CHECK(augmented_loglik(Eigen::VectorXd::Zero(1), {}, one, ResidualLaw::ExactNlg, store) ==
        doctest::Approx(-1.0).epsilon(1e-12));

  // simulated small design: exact-vs-mixture difference decomposes per row
  RngStream rng(61);
  const int rows = 5;
  Eigen::MatrixXd X(rows, 1);
  Eigen::VectorXd y_star(rows), log_off(rows);
  AugmentedDesign d = make_design(Eigen::MatrixXd::Zero(rows, 1), {}, Eigen::VectorXd::Zero(rows),
                                  Eigen::VectorXd::Zero(rows));
  for (int r = 0; r < rows; ++r) {
    d.Xstar(r, 0) = rng.normal();
    d.y_star[r] = rng.normal();
    d.log_offset[r] = 0.1 * rng.normal();
    d.vars[static_cast<std::size_t>(r)].y_star = d.y_star[r];
    d.vars[static_cast<std::size_t>(r)].nu = (r % 2 == 0) ? 1.0 : 3.0;
  }
  Eigen::VectorXd beta(1);
  beta << 0.4;

  const double exact = augmented_loglik(beta, {}, d, ResidualLaw::ExactNlg, store);
  const double approx = augmented_loglik(beta, {}, d, ResidualLaw::BaseMixture, store);
  double per_row_gap = 0.0;
  for (int r = 0; r < rows; ++r) {
    const double eps = d.y_star[r] - d.Xstar(r, 0) * beta[0] - d.log_offset[r];
    const double nu = d.vars[static_cast<std::size_t>(r)].nu;
    per_row_gap += nlg_log_density(eps, NlgShape(nu)) -
                   mixture_log_density(store.base(nu), eps);
  }
  CHECK(exact - approx == doctest::Approx(per_row_gap).epsilon(1e-10));

  // adjusted law with no flagged rows falls back to the base mixture
  std::vector<char> none(rows, 0);
  CHECK(augmented_loglik(beta, {}, d, ResidualLaw::AdjustedMixture, store, &none) ==
        doctest::Approx(approx).epsilon(1e-12));
  // flag length must match
  std::vector<char> bad(rows - 1, 1);
  CHECK_THROWS_AS(augmented_loglik(beta, {}, d, ResidualLaw::AdjustedMixture, store, &bad),
                  std::invalid_argument);
}

}  // TEST_SUITE
