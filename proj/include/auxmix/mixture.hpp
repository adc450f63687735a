#pragma once

#include "auxmix/errors.hpp"
#include "auxmix/nlg.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace auxmix {

struct MixtureComponent {
  double weight;
  double mean;
  double var;
};

// Finite Gaussian mixture approximating the negative log-gamma density with
// shape nu. Evaluation caches (log weight, log normalizer, half precision) are
// filled by finalize(); every construction path in this library calls it.
struct GaussianMixture {
  std::vector<MixtureComponent> comps;
  double nu = 0.0;
  bool adjusted = false;
  // certified max |log f - log g| over the central 99% of the target
  double central_error = std::numeric_limits<double>::quiet_NaN();

  void finalize();
  bool finalized() const { return log_w.size() == comps.size(); }

  // evaluation caches, indexed like comps; zero-weight entries carry -inf log_w
  std::vector<double> log_w;
  std::vector<double> log_norm;  // -0.5 * log(2 pi var)
  std::vector<double> half_prec; // 1 / (2 var)
};

double mixture_log_density(const GaussianMixture& m, double z);

struct MixtureFitConfig {
  int grid_points = 2048;
  double grid_tail = 1e-6;        // fit grid spans [q(tail), q(1 - tail)]
  int max_iterations = 20000;
  double rel_tolerance = 1e-8;    // relative objective change treated as converged
  double var_floor = 1e-4;
  int starts_small = 3;           // nu <= 10
  int starts_medium = 2;          // nu <= 100
  int starts_large = 1;           // nu > 100 (near-Gaussian targets)
  double central_target = 0.05;   // certified error the K-schedule must reach

  std::uint64_t hash() const;
};

// Optimizer budget exhausted before the tolerance was met. Carries the best
// iterate so a caller can still inspect (or accept) its certified error.
class MixtureFitError : public NumericalError {
public:
  MixtureFitError(const std::string& what, GaussianMixture best_, int iterations_)
      : NumericalError(what), best(std::move(best_)), iterations(iterations_) {}
  GaussianMixture best;
  int iterations;
};

// Component-count schedule by target shape: 10 / 7 / 4, then a single
// moment-matched Gaussian once the target is effectively normal.
int components_for_shape(double nu);

// Weighted EM on a quadrature grid, minimizing the discretized KL divergence
// from the target to the mixture. Deterministic: fixed grid, fixed multistart
// initializations, fixed iteration order. K = 1 returns the moment-matched
// Gaussian (the KL-optimal single component).
GaussianMixture fit_mixture(NlgShape shape, int n_components, const MixtureFitConfig& cfg);

// Outward-from-the-mode boundaries of the region where the mixture tracks the
// target within one log unit. "open" marks a side with no crossing inside the
// scan window [q(1e-14), q(1 - 1e-14)].
struct TailThresholds {
  double nu = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool lower_open = false;
  bool upper_open = false;
};

TailThresholds compute_tail_thresholds(NlgShape shape, const GaussianMixture& mix);

// Tail-repaired mixture: 30 extra components on equally spaced knots from
// xi_upper out to R = 2.5 * q(1 - 1e-16) + 1.5 * log(nu). Each component sits
// on its knot, its weight makes the mixture match the target exactly there,
// and its variance is tuned (golden section on log variance) to minimize the
// worst log-density gap over the segment to the next knot. Weights are
// renormalized after every addition. If xi_upper is open the base mixture is
// returned unchanged.
GaussianMixture build_adjusted_mixture(NlgShape shape, const GaussianMixture& base,
                                       const TailThresholds& thr);

// Per-shape cache of fitted mixtures, thresholds and adjusted variants.
// Fits happen on demand under an exclusive lock; returned references stay
// valid until clear(). Safe for concurrent chains.
class MixtureStore {
public:
  explicit MixtureStore(MixtureFitConfig cfg = {}) : cfg_(cfg) {}

  const MixtureFitConfig& config() const { return cfg_; }

  const GaussianMixture& base(double nu);
  const TailThresholds& thresholds(double nu);
  const GaussianMixture& adjusted(double nu);

  // Text cache: entries round-trip bit-exactly (17 significant digits) and are
  // keyed by the fit-config hash; a file written under a different config is
  // ignored wholesale.
  void save_file(const std::string& path) const;
  void load_file(const std::string& path);

  void clear();
  std::size_t size() const;

private:
  struct Entry {
    GaussianMixture base;
    std::optional<TailThresholds> thresholds;
    std::optional<GaussianMixture> adjusted;
  };

  Entry& entry_for(double nu);  // callers hold no lock

  mutable std::shared_mutex mu_;
  std::map<double, Entry> entries_;
  MixtureFitConfig cfg_;
};

MixtureStore& global_mixture_store();

}  // namespace auxmix
