#include "doctest.h"

#include "auxmix.h"

#include "auxmix/diagnostics.hpp"
#include "auxmix/oracle.hpp"
#include "auxmix/rng.hpp"
#include "auxmix/simulate.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct ModelGuard {
  axm_model* m = nullptr;
  ~ModelGuard() { axm_model_free(m); }
};

struct StoreGuard {
  axm_store* s = nullptr;
  StoreGuard() : s(axm_store_create()) {}
  ~StoreGuard() { axm_store_free(s); }
};

struct ChainGuard {
  axm_chain* c = nullptr;
  ~ChainGuard() { axm_chain_free(c); }
};

axm_model* make_intercept(const std::vector<int32_t>& y, double prior_var) {
  const int32_t n = static_cast<int32_t>(y.size());
  std::vector<double> x(static_cast<std::size_t>(n), 1.0);
  const double v0 = prior_var;
  return axm_model_create(n, 1, y.data(), nullptr, x.data(), &v0);
}

std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("version and error channel") {
  REQUIRE(axm_version() != nullptr);
  CHECK(std::string(axm_version()).rfind("auxmix", 0) == 0);
  REQUIRE(axm_last_error() != nullptr);

  // the thread-local status mirrors the most recent call so callers of
  // pointer-returning functions can classify failures
  CHECK(axm_model_create(-3, 1, nullptr, nullptr, nullptr, nullptr) == nullptr);
  CHECK(axm_last_status() == AXM_ERR_INVALID);
  axm_store* s = axm_store_create();
  REQUIRE(s != nullptr);
  CHECK(axm_last_status() == AXM_OK);
  axm_store_free(s);
}

TEST_CASE("model construction and validation") {
  ModelGuard ok;
  ok.m = make_intercept({1, 2, 0, 3}, 100.0);
  REQUIRE(ok.m != nullptr);
  CHECK(axm_model_dim(ok.m) == 1);

  // a negative count must be rejected with a readable message
  const std::vector<int32_t> bad_y{1, -2};
  const std::vector<double> x{1.0, 1.0};
  const double v0 = 100.0;
  CHECK(axm_model_create(2, 1, bad_y.data(), nullptr, x.data(), &v0) == nullptr);
  CHECK(std::string(axm_last_error()).find("non-negative") != std::string::npos);

  CHECK(axm_model_create(2, 1, nullptr, nullptr, x.data(), &v0) == nullptr);
  CHECK(axm_model_dim(nullptr) < 0);
}

TEST_CASE("block rollback on invalid input") {
  ModelGuard g;
  g.m = make_intercept({1, 2, 0, 3}, 100.0);
  REQUIRE(g.m != nullptr);

  std::vector<double> z(4 * 2, 0.0);
  for (int i = 0; i < 4; ++i) z[static_cast<std::size_t>(i * 2 + i % 2)] = 1.0;
  std::vector<double> k_bad{1.0, 0.5, -0.5, 1.0};  // asymmetric
  CHECK(axm_model_add_block(g.m, 2, z.data(), k_bad.data(), 2, 0, 1.0, 0.001) ==
        AXM_ERR_INVALID);
  CHECK(axm_model_dim(g.m) == 1);  // rejected block left no trace

  std::vector<double> k_ok{1.0, 0.0, 0.0, 1.0};
  CHECK(axm_model_add_block(g.m, 2, z.data(), k_ok.data(), 2, 0, 1.0, 0.001) == AXM_OK);
  CHECK(axm_model_dim(g.m) == 4);  // intercept + two effects + one variance
  CHECK(axm_model_add_block(g.m, 2, z.data(), k_ok.data(), 2, 9, 1.0, 0.001) ==
        AXM_ERR_INVALID);
}

TEST_CASE("chain round trip with accessors") {
  ModelGuard g;
  g.m = make_intercept({2, 1, 3, 0, 2, 1, 4, 2, 1, 2}, 100.0);
  REQUIRE(g.m != nullptr);
  StoreGuard store;
  REQUIRE(store.s != nullptr);

  axm_sampler_config cfg;
  axm_sampler_config_init(&cfg);
  CHECK(cfg.algorithm == AXM_ALG_AUTO);
  CHECK(cfg.t1 == 500);
  cfg.algorithm = AXM_ALG_IAMS;
  cfg.iterations = 200;
  cfg.burn_in = 50;
  cfg.seed = 31;

  ChainGuard chain;
  chain.c = axm_run_chain(g.m, &cfg, store.s);
  REQUIRE(chain.c != nullptr);
  CHECK(axm_chain_rows(chain.c) == 150);
  CHECK(axm_chain_cols(chain.c) == 1);
  CHECK(std::string(axm_chain_name(chain.c, 0)) == "beta0");
  CHECK(axm_chain_name(chain.c, 1) == nullptr);
  CHECK(axm_chain_algorithm(chain.c) == AXM_ALG_IAMS);

  std::vector<double> flat(150);
  std::vector<double> col(150);
  CHECK(axm_chain_copy_draws(chain.c, flat.data()) == AXM_OK);
  CHECK(axm_chain_copy_column(chain.c, 0, col.data()) == AXM_OK);
  CHECK(std::memcmp(flat.data(), col.data(), sizeof(double) * 150) == 0);
  CHECK(axm_chain_copy_column(chain.c, 5, col.data()) == AXM_ERR_INVALID);

  CHECK(axm_chain_block_count(chain.c) == 1);
  CHECK(std::string(axm_chain_block_name(chain.c, 0)) == "beta");
  int64_t acc = 0, prop = 0;
  CHECK(axm_chain_block_counts(chain.c, 0, &acc, &prop) == AXM_OK);
  CHECK(prop == 200);
  CHECK(acc == 200);

  CHECK(axm_chain_aux_rows(chain.c) > 0);
  std::vector<int32_t> obs(static_cast<std::size_t>(axm_chain_aux_rows(chain.c)));
  std::vector<double> nus(obs.size());
  CHECK(axm_chain_aux_identity(chain.c, obs.data(), nullptr, nus.data()) == AXM_OK);
  CHECK(obs.front() == 0);
  CHECK(nus.front() >= 1.0);

  // the plain sampler never monitors excursions
  std::vector<double> kappa(obs.size());
  CHECK(axm_chain_copy_kappa(chain.c, kappa.data(), nullptr) == AXM_ERR_INVALID);

  axm_timings tm;
  CHECK(axm_chain_timings(chain.c, &tm) == AXM_OK);
  CHECK(tm.total_seconds > 0.0);
  CHECK(tm.sampling_seconds > 0.0);

  int32_t degenerate = -1;
  const double ess = axm_chain_ess(chain.c, 0, &degenerate);
  CHECK(ess > 0.0);
  CHECK(ess <= 150.0);
  CHECK(degenerate == 0);
  CHECK(axm_chain_ess(chain.c, 7, nullptr) < 0.0);
  CHECK(axm_last_error()[0] != '\0');
}

TEST_CASE("deterministic reruns through the C surface") {
  ModelGuard g;
  g.m = make_intercept({2, 1, 3, 0, 2}, 100.0);
  StoreGuard store;
  axm_sampler_config cfg;
  axm_sampler_config_init(&cfg);
  cfg.algorithm = AXM_ALG_MH_IAMS;
  cfg.iterations = 150;
  cfg.burn_in = 50;
  cfg.t1 = 25;
  cfg.seed = 77;

  ChainGuard a, b;
  a.c = axm_run_chain(g.m, &cfg, store.s);
  b.c = axm_run_chain(g.m, &cfg, store.s);
  REQUIRE(a.c != nullptr);
  REQUIRE(b.c != nullptr);
  std::vector<double> da(100), db(100);
  CHECK(axm_chain_copy_draws(a.c, da.data()) == AXM_OK);
  CHECK(axm_chain_copy_draws(b.c, db.data()) == AXM_OK);
  CHECK(std::memcmp(da.data(), db.data(), sizeof(double) * da.size()) == 0);
}

TEST_CASE("invalid configuration surfaces as a null chain") {
  ModelGuard g;
  g.m = make_intercept({1, 2}, 100.0);
  StoreGuard store;
  axm_sampler_config cfg;
  axm_sampler_config_init(&cfg);
  cfg.algorithm = AXM_ALG_IAMS;
  cfg.iterations = 10;
  cfg.burn_in = 10;  // burn-in swallows the whole run
  CHECK(axm_run_chain(g.m, &cfg, store.s) == nullptr);
  CHECK(std::string(axm_last_error()).find("burn_in") != std::string::npos);
  CHECK(axm_run_chain(nullptr, &cfg, store.s) == nullptr);
}

TEST_CASE("tail monitoring is visible through the C surface") {
  // lurking covariate: upper excursions drive flags
  const auxmix::ToyData data = auxmix::simulate_toy(60, 1.2, 4321);
  const auxmix::PoissonLgm cpp_model = auxmix::toy_regression(data, false);
  std::vector<int32_t> y(static_cast<std::size_t>(cpp_model.n()));
  std::vector<double> x(static_cast<std::size_t>(cpp_model.n()) * 2);
  for (int i = 0; i < cpp_model.n(); ++i) {
    y[static_cast<std::size_t>(i)] = cpp_model.y[i];
    x[static_cast<std::size_t>(i) * 2] = 1.0;
    x[static_cast<std::size_t>(i) * 2 + 1] = cpp_model.X(i, 1);
  }
  std::vector<double> v0{100.0, 0.0, 0.0, 100.0};
  ModelGuard g;
  g.m = axm_model_create(cpp_model.n(), 2, y.data(), nullptr, x.data(), v0.data());
  REQUIRE(g.m != nullptr);

  StoreGuard store;
  axm_sampler_config cfg;
  axm_sampler_config_init(&cfg);
  cfg.algorithm = AXM_ALG_RIAMS;
  cfg.t1 = 100;
  cfg.t2 = 100;
  cfg.iterations = 400;
  cfg.burn_in = 250;
  cfg.seed = 5;
  ChainGuard chain;
  chain.c = axm_run_chain(g.m, &cfg, store.s);
  REQUIRE(chain.c != nullptr);
  CHECK(axm_chain_algorithm(chain.c) == AXM_ALG_RIAMS);

  const int64_t rows = axm_chain_aux_rows(chain.c);
  REQUIRE(rows > 0);
  std::vector<double> upper(static_cast<std::size_t>(rows));
  std::vector<double> lower(static_cast<std::size_t>(rows));
  std::vector<int32_t> flags(static_cast<std::size_t>(rows));
  CHECK(axm_chain_copy_kappa(chain.c, upper.data(), nullptr) == AXM_OK);
  // the dedicated robust run tracks only the upper tail
  CHECK(axm_chain_copy_kappa(chain.c, nullptr, lower.data()) == AXM_ERR_INVALID);
  CHECK(axm_chain_copy_flags(chain.c, flags.data()) == AXM_OK);
  double max_upper = 0.0;
  int64_t flagged = 0;
  for (std::size_t r = 0; r < upper.size(); ++r) {
    max_upper = std::max(max_upper, upper[r]);
    flagged += flags[r];
    if (flags[r]) CHECK(upper[r] > cfg.p_upper);
  }
  CHECK(max_upper > 0.0);
  CHECK(flagged > 0);
}

TEST_CASE("discrepancy through the C surface") {
  ModelGuard g;
  g.m = make_intercept({2, 1, 3, 0, 2, 1}, 100.0);
  StoreGuard store;
  axm_sampler_config cfg;
  axm_sampler_config_init(&cfg);
  cfg.algorithm = AXM_ALG_IAMS;
  cfg.iterations = 120;
  cfg.burn_in = 40;
  cfg.seed = 10;
  cfg.store_residual_traces = 1;

  ChainGuard chain;
  chain.c = axm_run_chain(g.m, &cfg, store.s);
  REQUIRE(chain.c != nullptr);
  const int64_t rows = axm_chain_aux_rows(chain.c);
  std::vector<double> delta(static_cast<std::size_t>(rows));
  std::vector<int64_t> finite(static_cast<std::size_t>(rows));
  int64_t nonfinite = -1;

  CHECK(axm_chain_delta(chain.c, store.s, AXM_LAW_EXACT, delta.data(), finite.data(),
                        &nonfinite) == AXM_OK);
  CHECK(nonfinite == 0);
  for (std::size_t r = 0; r < delta.size(); ++r) {
    CHECK(delta[r] == 0.0);
    CHECK(finite[r] == 80);
  }

  CHECK(axm_chain_delta(chain.c, store.s, AXM_LAW_MIXTURE, delta.data(), nullptr, nullptr) ==
        AXM_OK);
  double max_abs = 0.0;
  for (double d : delta) max_abs = std::max(max_abs, std::abs(d));
  CHECK(max_abs > 0.0);
  CHECK(max_abs < 0.5);  // well-specified model: small gaps

  CHECK(axm_chain_delta(chain.c, store.s, 9, delta.data(), nullptr, nullptr) ==
        AXM_ERR_INVALID);

  // without stored traces the call is a usage error
  cfg.store_residual_traces = 0;
  ChainGuard bare;
  bare.c = axm_run_chain(g.m, &cfg, store.s);
  REQUIRE(bare.c != nullptr);
  CHECK(axm_chain_delta(bare.c, store.s, AXM_LAW_MIXTURE, delta.data(), nullptr, nullptr) ==
        AXM_ERR_INVALID);
}

TEST_CASE("grid posterior through the C surface") {
  ModelGuard g;
  g.m = make_intercept({3}, 1e6);
  double mean = 0.0, sd = 0.0;
  const std::vector<double> probs{0.1, 0.5, 0.9};
  std::vector<double> quantiles(3);
  CHECK(axm_grid_posterior(g.m, 0, &mean, &sd, probs.data(), 3, quantiles.data()) == AXM_OK);
  CHECK(quantiles[0] < quantiles[1]);
  CHECK(quantiles[1] < quantiles[2]);

  const auxmix::GridPosterior direct = auxmix::grid_posterior_1d(
      [] {
        auxmix::PoissonLgm m;
        m.y = Eigen::VectorXi::Constant(1, 3);
        m.t = Eigen::VectorXd::Ones(1);
        m.X = Eigen::MatrixXd::Ones(1, 1);
        m.V0 = Eigen::MatrixXd::Constant(1, 1, 1e6);
        return m;
      }());
  CHECK(mean == direct.mean);
  CHECK(sd == direct.sd);
  CHECK(quantiles[1] == direct.quantile(0.5));

  // two-column model: not an intercept-only posterior
  std::vector<int32_t> y{1, 2};
  std::vector<double> x{1.0, 0.5, 1.0, -0.5};
  std::vector<double> v0{100.0, 0.0, 0.0, 100.0};
  ModelGuard two;
  two.m = axm_model_create(2, 2, y.data(), nullptr, x.data(), v0.data());
  REQUIRE(two.m != nullptr);
  CHECK(axm_grid_posterior(two.m, 0, &mean, &sd, nullptr, 0, nullptr) == AXM_ERR_INVALID);
}

TEST_CASE("reference chain through the C surface") {
  ModelGuard g;
  g.m = make_intercept({2, 1, 3, 0, 2, 1, 4, 2}, 100.0);
  const int64_t iterations = 3000, burn = 1000;
  const int64_t kept = iterations - burn;
  std::vector<double> draws(static_cast<std::size_t>(kept));
  double acc = 0.0;
  int32_t warning = -1;
  CHECK(axm_reference_run(g.m, iterations, burn, 1, 99, 0, draws.data(), &acc, &warning) ==
        AXM_OK);
  CHECK(acc > 0.0);
  CHECK(acc < 1.0);
  CHECK(warning == 0);

  auxmix::ReferenceConfig rc;
  rc.iterations = iterations;
  rc.burn_in = burn;
  rc.seed = 99;
  auxmix::PoissonLgm cpp;
  cpp.y.resize(8);
  const int vals[8] = {2, 1, 3, 0, 2, 1, 4, 2};
  for (int i = 0; i < 8; ++i) cpp.y[i] = vals[i];
  cpp.t = Eigen::VectorXd::Ones(8);
  cpp.X = Eigen::MatrixXd::Ones(8, 1);
  cpp.V0 = Eigen::MatrixXd::Constant(1, 1, 100.0);
  const auxmix::ReferenceOutput direct = auxmix::rwmh_reference(cpp, rc);
  for (int64_t r = 0; r < kept; ++r) {
    CHECK(draws[static_cast<std::size_t>(r)] == direct.draws(r, 0));
  }
}

TEST_CASE("toy dataset file round trip") {
  const std::string path = "/tmp/axm_capi_toy.csv";
  CHECK(axm_simulate_toy(path.c_str(), 25, 0.8, 2024) == AXM_OK);
  const std::string first = slurp(path);
  CHECK(first.rfind("y,x1,x2\n", 0) == 0);

  // identical seed: identical bytes
  CHECK(axm_simulate_toy(path.c_str(), 25, 0.8, 2024) == AXM_OK);
  CHECK(slurp(path) == first);

  // parse back and re-serialize: bytes survive the round trip
  std::istringstream is(first);
  const auxmix::ToyData parsed = auxmix::read_toy_csv(is);
  std::ostringstream os;
  auxmix::write_toy_csv(parsed, os);
  CHECK(os.str() == first);
  std::remove(path.c_str());

  CHECK(axm_simulate_toy("/nonexistent-dir/toy.csv", 5, 0.0, 1) == AXM_ERR_IO);
  CHECK(axm_simulate_toy(path.c_str(), 0, 0.0, 1) == AXM_ERR_INVALID);
}

TEST_CASE("approximation cache file round trip") {
  StoreGuard store;
  ModelGuard g;
  g.m = make_intercept({1, 0, 2}, 100.0);
  axm_sampler_config cfg;
  axm_sampler_config_init(&cfg);
  cfg.algorithm = AXM_ALG_IAMS;
  cfg.iterations = 30;
  cfg.burn_in = 10;
  ChainGuard warm;
  warm.c = axm_run_chain(g.m, &cfg, store.s);  // populates the cache
  REQUIRE(warm.c != nullptr);

  const std::string path = "/tmp/axm_capi_cache.bin";
  CHECK(axm_store_save(store.s, path.c_str()) == AXM_OK);
  StoreGuard fresh;
  CHECK(axm_store_load(fresh.s, path.c_str()) == AXM_OK);
  std::remove(path.c_str());
  CHECK(axm_store_load(fresh.s, "/tmp/axm_missing_cache.bin") == AXM_ERR_IO);
}

}  // TEST_SUITE
