#pragma once

#include "auxmix/mixture.hpp"
#include "auxmix/model.hpp"
#include "auxmix/sampler.hpp"

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

namespace auxmix {

// Mean log-density gap between the approximating residual law and the exact
// one, per auxiliary row, averaged over the stored residual-trace iterations.
// A large positive entry marks a residual whose approximation systematically
// over-weights it.
struct DiscrepancyReport {
  std::vector<double> delta;       // per row: mean of log g - log f
  std::vector<int> obs;            // row identity, copied from the chain
  std::vector<int> slot;
  std::vector<double> nu;
  std::vector<long long> finite_terms;  // iterations entering each average
  std::vector<std::size_t> extremes;    // row indices by decreasing |delta|
  long long iterations = 0;             // stored trace iterations scanned
  long long nonfinite_terms = 0;        // excluded from the averages
  ResidualLaw law = ResidualLaw::BaseMixture;
};

// Requires residual traces on the chain (opt-in at run time). For the
// AdjustedMixture law the chain's tail flags decide per row which mixture the
// run actually used; absent flags every row uses the adjusted mixture.
DiscrepancyReport delta_discrepancy(const ChainOutput& chain, ResidualLaw law,
                                    MixtureStore& store);

// delta table as CSV (one line per auxiliary row) and as a short readable
// summary of the extremes.
void write_discrepancy_csv(const DiscrepancyReport& report, std::ostream& os);
std::string format_discrepancy_report(const DiscrepancyReport& report);

// Effective sample size of a single draw trace via the initial monotone
// positive sequence estimator on the autocovariances. Always in (0, length];
// a constant trace reports the full length and sets `degenerate`.
double effective_sample_size(const std::vector<double>& trace, bool* degenerate = nullptr);

}  // namespace auxmix
