/* auxmix: Bayesian count-model sampling engine.
 *
 * C surface over the C++ core: opaque handles, integer status codes, and a
 * thread-local textual error. All array arguments are caller-allocated;
 * matrices pass row-major. Every function that can fail returns axm_status
 * (or a sentinel noted at the declaration) and leaves a message in
 * axm_last_error() on failure.
 */
#ifndef AUXMIX_H
#define AUXMIX_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  AXM_OK = 0,
  AXM_ERR_INVALID = 1,  /* bad argument, shape, or configuration */
  AXM_ERR_NUMERIC = 2,  /* numerical failure inside a valid computation */
  AXM_ERR_IO = 3,       /* file read/write failure */
  AXM_ERR_INTERNAL = 4
} axm_status;

/* Message describing this thread's most recent failure; empty string if none. */
const char* axm_last_error(void);
/* Status of the most recent API call on the calling thread (AXM_OK after a
 * success). Lets callers of pointer-returning functions classify failures. */
axm_status axm_last_status(void);
const char* axm_version(void);

/* ------------------------------------------------------------------ model */

typedef struct axm_model axm_model;

/* y: n counts; offsets: n exposure times or NULL for all-ones; x: n*p design,
 * row-major; v0: p*p fixed-effect prior covariance, row-major. NULL on error. */
axm_model* axm_model_create(int32_t n, int32_t p, const int32_t* y, const double* offsets,
                            const double* x, const double* v0);

/* Adds one random-effect block: z n*m design, k m*m prior precision structure
 * (symmetric non-negative definite) of the given rank; prior_kind 0 places an
 * inverse-gamma(a, b) prior on the block variance, 1 a gamma(a, b) prior. */
axm_status axm_model_add_block(axm_model* model, int32_t m, const double* z, const double* k,
                               int32_t rank, int32_t prior_kind, double prior_a, double prior_b);

/* Total parameter count: fixed effects + random effects + one variance per
 * block. Negative on error. */
int32_t axm_model_dim(const axm_model* model);

void axm_model_free(axm_model* model);

/* ------------------------------------------- residual approximation cache */

typedef struct axm_store axm_store;

axm_store* axm_store_create(void);
axm_status axm_store_load(axm_store* store, const char* path);
axm_status axm_store_save(axm_store* store, const char* path);
void axm_store_free(axm_store* store);

/* ---------------------------------------------------------------- sampler */

enum {
  AXM_ALG_AMS = 0,
  AXM_ALG_IAMS = 1,
  AXM_ALG_MH_IAMS = 2,
  AXM_ALG_RIAMS = 3,
  AXM_ALG_AUTO = 4
};

typedef struct {
  int32_t algorithm;        /* AXM_ALG_* */
  int64_t iterations;       /* total sweeps including burn-in */
  int64_t burn_in;
  int64_t thinning;
  int64_t t1, t2;           /* warm-up (MH-IAMS/RIAMS/AUTO) and monitoring (RIAMS/AUTO) sweeps */
  double p_lower, p_upper;  /* excursion-frequency thresholds in [0, 1] */
  uint64_t seed;
  uint64_t chain_index;
  int32_t store_residual_traces;  /* 0/1 */
  int64_t residual_trace_stride;
} axm_sampler_config;

/* Fills the configuration with the documented defaults. */
void axm_sampler_config_init(axm_sampler_config* config);

typedef struct axm_chain axm_chain;

/* Runs one chain; NULL on error. The store caches fitted residual
 * approximations across runs and may be shared by sequential calls. */
axm_chain* axm_run_chain(const axm_model* model, const axm_sampler_config* config,
                         axm_store* store);
void axm_chain_free(axm_chain* chain);

/* kept draws: rows x cols, parameter names per column */
int64_t axm_chain_rows(const axm_chain* chain);
int32_t axm_chain_cols(const axm_chain* chain);
const char* axm_chain_name(const axm_chain* chain, int32_t col); /* NULL if out of range */
axm_status axm_chain_copy_draws(const axm_chain* chain, double* out /* rows*cols, row-major */);
axm_status axm_chain_copy_column(const axm_chain* chain, int32_t col, double* out /* rows */);

/* algorithm that actually produced the draws (AXM_ALG_*); negative on error */
int32_t axm_chain_algorithm(const axm_chain* chain);

/* per-block accept/propose bookkeeping */
int32_t axm_chain_block_count(const axm_chain* chain);
const char* axm_chain_block_name(const axm_chain* chain, int32_t block);
axm_status axm_chain_block_counts(const axm_chain* chain, int32_t block, int64_t* accepted,
                                  int64_t* proposed);

/* tail monitoring: one entry per auxiliary residual in (observation, slot)
 * order. kappa_lower is tracked only under automatic selection. Any output
 * pointer may be NULL to skip that field. */
int64_t axm_chain_aux_rows(const axm_chain* chain);
axm_status axm_chain_aux_identity(const axm_chain* chain, int32_t* obs, int32_t* slot,
                                  double* nu);
axm_status axm_chain_copy_kappa(const axm_chain* chain, double* upper, double* lower);
axm_status axm_chain_copy_flags(const axm_chain* chain, int32_t* flags);

typedef struct {
  double warmup_seconds;
  double monitor_seconds;
  double sampling_seconds;
  double total_seconds;
} axm_timings;

axm_status axm_chain_timings(const axm_chain* chain, axm_timings* out);

/* ------------------------------------------------------------ diagnostics */

/* Effective sample size of one draw column (initial monotone sequence
 * estimator); negative on error. *degenerate (nullable) is set to 1 for a
 * constant trace. */
double axm_chain_ess(const axm_chain* chain, int32_t col, int32_t* degenerate);

enum {
  AXM_LAW_MIXTURE = 0,   /* base approximation */
  AXM_LAW_ADJUSTED = 1,  /* tail-adjusted where the chain flagged rows */
  AXM_LAW_EXACT = 2      /* degenerate reference: identically zero gaps */
};

/* Mean log-density gap (approximate minus exact) per auxiliary row over the
 * chain's stored residual traces. delta: aux_rows values; finite (nullable):
 * iterations entering each average; nonfinite (nullable): excluded terms. */
axm_status axm_chain_delta(const axm_chain* chain, axm_store* store, int32_t law, double* delta,
                           int64_t* finite, int64_t* nonfinite);

/* ----------------------------------------------------------------- oracle */

/* Quadrature posterior for an intercept-only model: moments plus requested
 * quantiles (probs ascending in [0, 1]; either probs or quantiles may be NULL
 * together). */
axm_status axm_grid_posterior(const axm_model* model, int32_t resolution, double* mean,
                              double* sd, const double* probs, int32_t nprobs,
                              double* quantiles);

/* Random-walk reference chain on the exact posterior. draws receives
 * ((iterations - burn_in) / thinning) * axm_model_dim(model) values,
 * row-major; acceptance_rate and warning (nullable) report the joint move. */
axm_status axm_reference_run(const axm_model* model, int64_t iterations, int64_t burn_in,
                             int64_t thinning, uint64_t seed, uint64_t chain_index,
                             double* draws, double* acceptance_rate, int32_t* warning);

/* ------------------------------------------------------------------- data */

/* Writes the synthetic count-regression dataset (header y,x1,x2) used by the
 * bundled experiments: log rate = 0.1 + x1 + c * x2. */
axm_status axm_simulate_toy(const char* path, int32_t n, double c, uint64_t seed);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AUXMIX_H */
