#include "auxmix.h"

#include "auxmix/diagnostics.hpp"
#include "auxmix/errors.hpp"
#include "auxmix/mixture.hpp"
#include "auxmix/model.hpp"
#include "auxmix/oracle.hpp"
#include "auxmix/sampler.hpp"
#include "auxmix/simulate.hpp"

#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

namespace {

thread_local std::string g_last_error;
thread_local axm_status g_last_status = AXM_OK;

void set_error(const std::string& msg) { g_last_error = msg; }

// Runs `fn`, translating exceptions into status codes and the thread-local
// message. `fn` returns the success status.
template <typename Fn>
axm_status guarded_impl(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return AXM_ERR_INVALID;
  } catch (const std::domain_error& e) {
    set_error(e.what());
    return AXM_ERR_INVALID;
  } catch (const auxmix::IoError& e) {
    set_error(e.what());
    return AXM_ERR_IO;
  } catch (const auxmix::MixtureFitError& e) {
    set_error(e.what());
    return AXM_ERR_NUMERIC;
  } catch (const auxmix::NumericalError& e) {
    set_error(e.what());
    return AXM_ERR_NUMERIC;
  } catch (const std::bad_alloc&) {
    set_error("out of memory");
    return AXM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set_error(e.what());
    return AXM_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown failure");
    return AXM_ERR_INTERNAL;
  }
}

template <typename Fn>
axm_status guarded(Fn&& fn) {
  g_last_status = guarded_impl(static_cast<Fn&&>(fn));
  return g_last_status;
}

axm_status require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
  return AXM_OK;
}

}  // namespace

struct axm_model {
  auxmix::PoissonLgm model;
};

struct axm_store {
  auxmix::MixtureStore store;
};

struct axm_chain {
  auxmix::ChainOutput out;
};

extern "C" {

const char* axm_last_error(void) { return g_last_error.c_str(); }

axm_status axm_last_status(void) { return g_last_status; }

const char* axm_version(void) { return "auxmix 1.0.0"; }

axm_model* axm_model_create(int32_t n, int32_t p, const int32_t* y, const double* offsets,
                            const double* x, const double* v0) {
  axm_model* handle = nullptr;
  const axm_status st = guarded([&] {
    require(n >= 0 && p >= 1, "model: need n >= 0 observations and p >= 1 covariates");
    require(y != nullptr || n == 0, "model: counts pointer is null");
    require(x != nullptr || n == 0, "model: design pointer is null");
    require(v0 != nullptr, "model: prior covariance pointer is null");
    auto m = std::make_unique<axm_model>();
    m->model.y.resize(n);
    m->model.t.resize(n);
    m->model.X.resize(n, p);
    for (int32_t i = 0; i < n; ++i) {
      m->model.y[i] = y[i];
      m->model.t[i] = offsets ? offsets[i] : 1.0;
      for (int32_t j = 0; j < p; ++j) m->model.X(i, j) = x[i * p + j];
    }
    m->model.V0.resize(p, p);
    for (int32_t i = 0; i < p; ++i) {
      for (int32_t j = 0; j < p; ++j) m->model.V0(i, j) = v0[i * p + j];
    }
    m->model.validate();
    handle = m.release();
    return AXM_OK;
  });
  (void)st;
  return handle;
}

axm_status axm_model_add_block(axm_model* model, int32_t m, const double* z, const double* k,
                               int32_t rank, int32_t prior_kind, double prior_a, double prior_b) {
  return guarded([&] {
    require(model != nullptr, "add_block: model handle is null");
    require(m >= 1, "add_block: block needs at least one effect");
    require(z != nullptr && k != nullptr, "add_block: matrix pointer is null");
    require(prior_kind == 0 || prior_kind == 1, "add_block: prior kind must be 0 or 1");
    const int32_t n = model->model.n();
    auxmix::RandomEffectBlock b;
    b.Z.resize(n, m);
    for (int32_t i = 0; i < n; ++i) {
      for (int32_t j = 0; j < m; ++j) b.Z(i, j) = z[i * m + j];
    }
    b.K.resize(m, m);
    for (int32_t i = 0; i < m; ++i) {
      for (int32_t j = 0; j < m; ++j) b.K(i, j) = k[i * m + j];
    }
    b.rank = rank;
    b.sigma2_prior.kind = prior_kind == 0 ? auxmix::SigmaPrior::Kind::InverseGamma
                                          : auxmix::SigmaPrior::Kind::Gamma;
    b.sigma2_prior.a = prior_a;
    b.sigma2_prior.b = prior_b;
    model->model.blocks.push_back(std::move(b));
    try {
      model->model.validate();
    } catch (...) {
      model->model.blocks.pop_back();
      throw;
    }
    return AXM_OK;
  });
}

int32_t axm_model_dim(const axm_model* model) {
  int32_t dim = -1;
  guarded([&] {
    require(model != nullptr, "model_dim: model handle is null");
    dim = model->model.p();
    for (const auxmix::RandomEffectBlock& b : model->model.blocks) {
      dim += static_cast<int32_t>(b.Z.cols()) + 1;
    }
    return AXM_OK;
  });
  return dim;
}

void axm_model_free(axm_model* model) { delete model; }

axm_store* axm_store_create(void) {
  axm_store* handle = nullptr;
  guarded([&] {
    handle = new axm_store;
    return AXM_OK;
  });
  return handle;
}

axm_status axm_store_load(axm_store* store, const char* path) {
  return guarded([&] {
    require(store != nullptr && path != nullptr, "store_load: null argument");
    store->store.load_file(path);
    return AXM_OK;
  });
}

axm_status axm_store_save(axm_store* store, const char* path) {
  return guarded([&] {
    require(store != nullptr && path != nullptr, "store_save: null argument");
    store->store.save_file(path);
    return AXM_OK;
  });
}

void axm_store_free(axm_store* store) { delete store; }

void axm_sampler_config_init(axm_sampler_config* config) {
  if (!config) return;
  config->algorithm = AXM_ALG_AUTO;
  config->iterations = 11000;
  config->burn_in = 1000;
  config->thinning = 1;
  config->t1 = 500;
  config->t2 = 250;
  config->p_lower = 0.05;
  config->p_upper = 0.05;
  config->seed = 0;
  config->chain_index = 0;
  config->store_residual_traces = 0;
  config->residual_trace_stride = 1;
}

namespace {

auxmix::SamplerConfig to_cpp(const axm_sampler_config& c) {
  auxmix::SamplerConfig out;
  switch (c.algorithm) {
    case AXM_ALG_AMS: out.algorithm = auxmix::Algorithm::Ams; break;
    case AXM_ALG_IAMS: out.algorithm = auxmix::Algorithm::Iams; break;
    case AXM_ALG_MH_IAMS: out.algorithm = auxmix::Algorithm::MhIams; break;
    case AXM_ALG_RIAMS: out.algorithm = auxmix::Algorithm::Riams; break;
    case AXM_ALG_AUTO: out.algorithm = auxmix::Algorithm::Auto; break;
    default: throw std::invalid_argument("sampler config: unknown algorithm code");
  }
  out.iterations = c.iterations;
  out.burn_in = c.burn_in;
  out.thinning = c.thinning;
  out.t1 = c.t1;
  out.t2 = c.t2;
  out.p_lower = c.p_lower;
  out.p_upper = c.p_upper;
  out.seed = c.seed;
  out.chain_index = c.chain_index;
  out.store_residual_traces = c.store_residual_traces != 0;
  out.residual_trace_stride = c.residual_trace_stride;
  return out;
}

int32_t from_cpp(auxmix::Algorithm a) {
  switch (a) {
    case auxmix::Algorithm::Ams: return AXM_ALG_AMS;
    case auxmix::Algorithm::Iams: return AXM_ALG_IAMS;
    case auxmix::Algorithm::MhIams: return AXM_ALG_MH_IAMS;
    case auxmix::Algorithm::Riams: return AXM_ALG_RIAMS;
    case auxmix::Algorithm::Auto: return AXM_ALG_AUTO;
  }
  return -1;
}

}  // namespace

axm_chain* axm_run_chain(const axm_model* model, const axm_sampler_config* config,
                         axm_store* store) {
  axm_chain* handle = nullptr;
  guarded([&] {
    require(model != nullptr && config != nullptr && store != nullptr,
            "run_chain: null argument");
    auto chain = std::make_unique<axm_chain>();
    chain->out = auxmix::run_chain(model->model, to_cpp(*config), store->store);
    handle = chain.release();
    return AXM_OK;
  });
  return handle;
}

void axm_chain_free(axm_chain* chain) { delete chain; }

int64_t axm_chain_rows(const axm_chain* chain) { return chain ? chain->out.draws.rows() : -1; }

int32_t axm_chain_cols(const axm_chain* chain) {
  return chain ? static_cast<int32_t>(chain->out.draws.cols()) : -1;
}

const char* axm_chain_name(const axm_chain* chain, int32_t col) {
  if (!chain || col < 0 || col >= static_cast<int32_t>(chain->out.names.size())) return nullptr;
  return chain->out.names[static_cast<std::size_t>(col)].c_str();
}

axm_status axm_chain_copy_draws(const axm_chain* chain, double* out) {
  return guarded([&] {
    require(chain != nullptr && out != nullptr, "copy_draws: null argument");
    const Eigen::MatrixXd& d = chain->out.draws;
    for (Eigen::Index r = 0; r < d.rows(); ++r) {
      for (Eigen::Index c = 0; c < d.cols(); ++c) out[r * d.cols() + c] = d(r, c);
    }
    return AXM_OK;
  });
}

axm_status axm_chain_copy_column(const axm_chain* chain, int32_t col, double* out) {
  return guarded([&] {
    require(chain != nullptr && out != nullptr, "copy_column: null argument");
    require(col >= 0 && col < chain->out.draws.cols(), "copy_column: column out of range");
    Eigen::Map<Eigen::VectorXd>(out, chain->out.draws.rows()) = chain->out.draws.col(col);
    return AXM_OK;
  });
}

int32_t axm_chain_algorithm(const axm_chain* chain) {
  return chain ? from_cpp(chain->out.algorithm_run) : -1;
}

int32_t axm_chain_block_count(const axm_chain* chain) {
  return chain ? static_cast<int32_t>(chain->out.acceptance.size()) : -1;
}

const char* axm_chain_block_name(const axm_chain* chain, int32_t block) {
  if (!chain || block < 0 || block >= static_cast<int32_t>(chain->out.acceptance.size())) {
    return nullptr;
  }
  return chain->out.acceptance[static_cast<std::size_t>(block)].block.c_str();
}

axm_status axm_chain_block_counts(const axm_chain* chain, int32_t block, int64_t* accepted,
                                  int64_t* proposed) {
  return guarded([&] {
    require(chain != nullptr, "block_counts: chain handle is null");
    require(block >= 0 && block < static_cast<int32_t>(chain->out.acceptance.size()),
            "block_counts: block out of range");
    const auxmix::BlockAcceptance& a = chain->out.acceptance[static_cast<std::size_t>(block)];
    if (accepted) *accepted = a.accepted;
    if (proposed) *proposed = a.proposed;
    return AXM_OK;
  });
}

int64_t axm_chain_aux_rows(const axm_chain* chain) {
  return chain ? static_cast<int64_t>(chain->out.residual_nu.size()) : -1;
}

axm_status axm_chain_aux_identity(const axm_chain* chain, int32_t* obs, int32_t* slot,
                                  double* nu) {
  return guarded([&] {
    require(chain != nullptr, "aux_identity: chain handle is null");
    const std::size_t rows = chain->out.residual_nu.size();
    for (std::size_t r = 0; r < rows; ++r) {
      if (obs) obs[r] = chain->out.residual_obs[r];
      if (slot) slot[r] = chain->out.residual_slot[r];
      if (nu) nu[r] = chain->out.residual_nu[r];
    }
    return AXM_OK;
  });
}

axm_status axm_chain_copy_kappa(const axm_chain* chain, double* upper, double* lower) {
  return guarded([&] {
    require(chain != nullptr, "copy_kappa: chain handle is null");
    const auxmix::TailMonitor& m = chain->out.monitor;
    if (upper) {
      require(!m.kappa_upper.empty(), "copy_kappa: this run tracked no excursions");
      std::memcpy(upper, m.kappa_upper.data(), m.kappa_upper.size() * sizeof(double));
    }
    if (lower) {
      require(!m.kappa_lower.empty(), "copy_kappa: lower excursions not tracked on this run");
      std::memcpy(lower, m.kappa_lower.data(), m.kappa_lower.size() * sizeof(double));
    }
    return AXM_OK;
  });
}

axm_status axm_chain_copy_flags(const axm_chain* chain, int32_t* flags) {
  return guarded([&] {
    require(chain != nullptr && flags != nullptr, "copy_flags: null argument");
    const std::vector<char>& f = chain->out.monitor.flags;
    require(!f.empty() || chain->out.residual_nu.empty(),
            "copy_flags: this run tracked no excursions");
    for (std::size_t r = 0; r < f.size(); ++r) flags[r] = f[r];
    return AXM_OK;
  });
}

axm_status axm_chain_timings(const axm_chain* chain, axm_timings* out) {
  return guarded([&] {
    require(chain != nullptr && out != nullptr, "timings: null argument");
    out->warmup_seconds = chain->out.timings.warmup_seconds;
    out->monitor_seconds = chain->out.timings.monitor_seconds;
    out->sampling_seconds = chain->out.timings.sampling_seconds;
    out->total_seconds = chain->out.timings.total_seconds;
    return AXM_OK;
  });
}

double axm_chain_ess(const axm_chain* chain, int32_t col, int32_t* degenerate) {
  double result = -1.0;
  guarded([&] {
    require(chain != nullptr, "ess: chain handle is null");
    require(col >= 0 && col < chain->out.draws.cols(), "ess: column out of range");
    std::vector<double> trace(chain->out.draws.col(col).data(),
                              chain->out.draws.col(col).data() + chain->out.draws.rows());
    bool degen = false;
    result = auxmix::effective_sample_size(trace, &degen);
    if (degenerate) *degenerate = degen ? 1 : 0;
    return AXM_OK;
  });
  return result;
}

axm_status axm_chain_delta(const axm_chain* chain, axm_store* store, int32_t law, double* delta,
                           int64_t* finite, int64_t* nonfinite) {
  return guarded([&] {
    require(chain != nullptr && store != nullptr && delta != nullptr,
            "delta: null argument");
    auxmix::ResidualLaw l;
    switch (law) {
      case AXM_LAW_MIXTURE: l = auxmix::ResidualLaw::BaseMixture; break;
      case AXM_LAW_ADJUSTED: l = auxmix::ResidualLaw::AdjustedMixture; break;
      case AXM_LAW_EXACT: l = auxmix::ResidualLaw::ExactNlg; break;
      default: throw std::invalid_argument("delta: unknown law code");
    }
    const auxmix::DiscrepancyReport rep =
        auxmix::delta_discrepancy(chain->out, l, store->store);
    for (std::size_t r = 0; r < rep.delta.size(); ++r) {
      delta[r] = rep.delta[r];
      if (finite) finite[r] = rep.finite_terms[r];
    }
    if (nonfinite) *nonfinite = rep.nonfinite_terms;
    return AXM_OK;
  });
}

axm_status axm_grid_posterior(const axm_model* model, int32_t resolution, double* mean,
                              double* sd, const double* probs, int32_t nprobs,
                              double* quantiles) {
  return guarded([&] {
    require(model != nullptr, "grid_posterior: model handle is null");
    require(nprobs == 0 || (probs != nullptr && quantiles != nullptr),
            "grid_posterior: probs and quantiles must come together");
    const auxmix::GridPosterior post =
        auxmix::grid_posterior_1d(model->model, resolution > 0 ? resolution : 4097);
    if (mean) *mean = post.mean;
    if (sd) *sd = post.sd;
    for (int32_t i = 0; i < nprobs; ++i) quantiles[i] = post.quantile(probs[i]);
    return AXM_OK;
  });
}

axm_status axm_reference_run(const axm_model* model, int64_t iterations, int64_t burn_in,
                             int64_t thinning, uint64_t seed, uint64_t chain_index,
                             double* draws, double* acceptance_rate, int32_t* warning) {
  return guarded([&] {
    require(model != nullptr && draws != nullptr, "reference_run: null argument");
    auxmix::ReferenceConfig c;
    c.iterations = iterations;
    c.burn_in = burn_in;
    c.thinning = thinning;
    c.seed = seed;
    c.chain_index = chain_index;
    const auxmix::ReferenceOutput out = auxmix::rwmh_reference(model->model, c);
    for (Eigen::Index r = 0; r < out.draws.rows(); ++r) {
      for (Eigen::Index j = 0; j < out.draws.cols(); ++j) {
        draws[r * out.draws.cols() + j] = out.draws(r, j);
      }
    }
    if (acceptance_rate) *acceptance_rate = out.acceptance_rate;
    if (warning) *warning = out.warning_flag ? 1 : 0;
    return AXM_OK;
  });
}

axm_status axm_simulate_toy(const char* path, int32_t n, double c, uint64_t seed) {
  return guarded([&] {
    require(path != nullptr, "simulate_toy: path is null");
    const auxmix::ToyData data = auxmix::simulate_toy(n, c, seed);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw auxmix::IoError(std::string("simulate_toy: cannot open ") + path);
    auxmix::write_toy_csv(data, os);
    os.flush();
    if (!os) throw auxmix::IoError(std::string("simulate_toy: write failed for ") + path);
    return AXM_OK;
  });
}

}  // extern "C"
