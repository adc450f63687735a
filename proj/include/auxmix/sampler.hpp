#pragma once

#include "auxmix/mixture.hpp"
#include "auxmix/model.hpp"
#include "auxmix/rng.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace auxmix {

enum class Algorithm {
  Ams,     // full augmentation, pure Gibbs
  Iams,    // parsimonious augmentation, pure Gibbs
  MhIams,  // parsimonious proposals corrected by Metropolis-Hastings
  Riams,   // MH with tail-adjusted mixtures on flagged residuals
  Auto,    // training phase picks one of the above three parsimonious variants
};

const char* algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

struct SamplerConfig {
  Algorithm algorithm = Algorithm::Auto;
  long long iterations = 0;  // total sweeps B, burn-in included
  long long burn_in = 0;
  long long thinning = 1;
  long long t1 = 500;        // plain-Gibbs warm-up sweeps (MH-IAMS/RIAMS/AUTO)
  long long t2 = 250;        // monitored sweeps (RIAMS/AUTO)
  double p_lower = 0.05;     // lower-excursion proportion threshold
  double p_upper = 0.05;     // upper-excursion proportion threshold
  std::uint64_t seed = 0;
  std::uint64_t chain_index = 0;  // substream selector for multi-chain runs
  bool store_residual_traces = false;
  long long residual_trace_stride = 1;  // keep every k-th stored iteration's residuals

  long long kept() const { return (iterations - burn_in) / thinning; }

  // Throws std::invalid_argument. RIAMS/AUTO require t1, t2 >= 1 and
  // burn_in >= t1 + t2; MH-IAMS requires t1 >= 0 and burn_in >= t1
  // (training sweeps are burn-in, never stored).
  void validate() const;
};

// Tail-excursion summary of the monitoring phase. Entries are indexed by
// auxiliary-row identity: the (observation, slot) pair in flattening order,
// which is fixed for a given dataset and scheme.
struct TailMonitor {
  std::vector<double> kappa_upper;  // share of monitored sweeps with eps > xi_U
  std::vector<double> kappa_lower;  // share with eps < xi_L (AUTO only, else empty)
  std::vector<char> flags;          // 1 = residual uses the tail-adjusted mixture
  Algorithm chosen = Algorithm::Iams;
  long long monitored = 0;          // monitoring sweeps actually run
};

struct BlockAcceptance {
  std::string block;  // "beta", "gamma_1", ..., "sigma2_1", ...
  long long accepted = 0;
  long long proposed = 0;
  double rate() const { return proposed > 0 ? static_cast<double>(accepted) / proposed : 1.0; }
};

struct ChainTimings {
  double warmup_seconds = 0.0;
  double monitor_seconds = 0.0;
  double sampling_seconds = 0.0;
  double total_seconds = 0.0;
};

struct ChainOutput {
  Eigen::MatrixXd draws;            // kept iterations x parameters
  std::vector<std::string> names;   // beta0.., gamma<q>_<j>, sigma2_<q>
  std::vector<BlockAcceptance> acceptance;
  TailMonitor monitor;
  ChainTimings timings;
  Algorithm algorithm_run = Algorithm::Iams;  // what actually produced the draws
  long long nonfinite_mh = 0;       // MH ratios that came out non-finite (rejected)
  long long label_underflows = 0;

  // identity of each auxiliary row in flattening order; indexes the monitor
  // vectors and the residual-trace columns
  std::vector<int> residual_obs;
  std::vector<int> residual_slot;
  std::vector<double> residual_nu;

  // opt-in: residuals at a strided subset of kept iterations, one column per
  // auxiliary row
  Eigen::MatrixXd residual_traces;
  long long trace_stride = 0;
};

// One pure Gibbs sweep (augment, labels, coefficient blocks, variances) under
// the scheme's augmentation. `sigma_steps`, when given, carries the adaptive
// state of any Metropolis variance updates across calls.
void gibbs_sweep(Algorithm scheme, LatentState& state, const PoissonLgm& model,
                 MixtureStore& store, RngStream& rng,
                 std::vector<MhStepState>* sigma_steps = nullptr);

// Accept/reject one coefficient-block proposal drawn from its full conditional
// under the approximate law. The ratio corrects the approximation:
// min(1, [L(prop) / L(curr)] * [L_a(curr) / L_a(prop)]) with L the exact
// augmented likelihood and L_a the mixture law (`adjusted_rows` selects the
// tail-adjusted mixture per row when the law is AdjustedMixture). On
// acceptance the state is updated; a non-finite ratio rejects and counts into
// `nonfinite` when given.
bool mh_accept_block(int block, const Eigen::VectorXd& proposed, LatentState& state,
                     const PoissonLgm& model, ResidualLaw law,
                     const std::vector<char>* adjusted_rows, MixtureStore& store, RngStream& rng,
                     long long* nonfinite = nullptr);

// Training phase of the automatic sampler: t1 parsimonious warm-up sweeps,
// then t2 monitored sweeps accumulating upper and lower excursion proportions
// per auxiliary row. Picks RIAMS if any kappa_U > p_U, else MH-IAMS if any
// kappa_L > p_L, else IAMS; flags are set where kappa_U > p_U.
struct PretrainResult {
  Algorithm chosen = Algorithm::Iams;
  TailMonitor monitor;
  LatentState state;  // warm state after t1 + t2 sweeps
};
PretrainResult automatic_pretrain(const PoissonLgm& model, const SamplerConfig& config,
                                  MixtureStore& store, RngStream& rng);

// Runs one chain of the configured algorithm and returns its draws and
// bookkeeping. The random stream is derived from (seed, chain_index), so
// reruns are bit-identical and chains never share state.
ChainOutput run_chain(const PoissonLgm& model, const SamplerConfig& config, MixtureStore& store);

}  // namespace auxmix
