#include "auxmix/diagnostics.hpp"

#include "auxmix/errors.hpp"
#include "auxmix/nlg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace auxmix {

DiscrepancyReport delta_discrepancy(const ChainOutput& chain, ResidualLaw law,
                                    MixtureStore& store) {
  const Eigen::Index iters = chain.residual_traces.rows();
  const Eigen::Index rows = chain.residual_traces.cols();
  if (iters == 0 || rows == 0) {
    throw std::invalid_argument(
        "delta_discrepancy: the chain carries no residual traces (enable their storage)");
  }
  if (chain.residual_nu.size() != static_cast<std::size_t>(rows)) {
    throw std::invalid_argument("delta_discrepancy: residual shapes missing on the chain");
  }

  DiscrepancyReport rep;
  rep.law = law;
  rep.iterations = iters;
  rep.delta.assign(static_cast<std::size_t>(rows), 0.0);
  rep.finite_terms.assign(static_cast<std::size_t>(rows), 0);
  rep.nu = chain.residual_nu;
  rep.obs = chain.residual_obs;
  rep.slot = chain.residual_slot;

  const bool use_flags = law == ResidualLaw::AdjustedMixture &&
                         chain.monitor.flags.size() == static_cast<std::size_t>(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double nu = chain.residual_nu[static_cast<std::size_t>(r)];
    const GaussianMixture* g = nullptr;
    if (law == ResidualLaw::BaseMixture) {
      g = &store.base(nu);
    } else if (law == ResidualLaw::AdjustedMixture) {
      const bool adj = !use_flags || chain.monitor.flags[static_cast<std::size_t>(r)];
      g = adj ? &store.adjusted(nu) : &store.base(nu);
    }
    double sum = 0.0;
    long long finite = 0;
    for (Eigen::Index b = 0; b < iters; ++b) {
      const double eps = chain.residual_traces(b, r);
      const double term = g == nullptr
                              ? 0.0  // exact law: g == f identically
                              : mixture_log_density(*g, eps) - nlg_log_density(eps, NlgShape(nu));
      if (std::isfinite(term)) {
        sum += term;
        ++finite;
      } else {
        ++rep.nonfinite_terms;
      }
    }
    rep.finite_terms[static_cast<std::size_t>(r)] = finite;
    rep.delta[static_cast<std::size_t>(r)] =
        finite > 0 ? sum / static_cast<double>(finite)
                   : std::numeric_limits<double>::quiet_NaN();
  }

  rep.extremes.resize(static_cast<std::size_t>(rows));
  std::iota(rep.extremes.begin(), rep.extremes.end(), std::size_t{0});
  std::stable_sort(rep.extremes.begin(), rep.extremes.end(), [&](std::size_t a, std::size_t b) {
    const double da = std::isfinite(rep.delta[a]) ? std::abs(rep.delta[a]) : -1.0;
    const double db = std::isfinite(rep.delta[b]) ? std::abs(rep.delta[b]) : -1.0;
    return da > db;
  });
  if (rep.extremes.size() > 10) rep.extremes.resize(10);
  return rep;
}

void write_discrepancy_csv(const DiscrepancyReport& report, std::ostream& os) {
  os << "obs,slot,nu,delta,finite_iterations\n";
  char line[160];
  for (std::size_t r = 0; r < report.delta.size(); ++r) {
    std::snprintf(line, sizeof line, "%d,%d,%.17g,%.17g,%lld\n", report.obs[r], report.slot[r],
                  report.nu[r], report.delta[r], report.finite_terms[r]);
    os << line;
  }
}

std::string format_discrepancy_report(const DiscrepancyReport& report) {
  std::ostringstream os;
  os << "residual-law discrepancy over " << report.iterations << " stored iterations ("
     << report.delta.size() << " auxiliary rows)\n";
  if (report.nonfinite_terms > 0) {
    os << "  non-finite terms excluded: " << report.nonfinite_terms << "\n";
  }
  os << "  largest |delta|:\n";
  for (std::size_t k = 0; k < report.extremes.size(); ++k) {
    const std::size_t r = report.extremes[k];
    char line[160];
    std::snprintf(line, sizeof line, "    obs %d slot %d (nu %g): delta %.4g\n", report.obs[r],
                  report.slot[r], report.nu[r], report.delta[r]);
    os << line;
  }
  return os.str();
}

double effective_sample_size(const std::vector<double>& trace, bool* degenerate) {
  if (degenerate) *degenerate = false;
  const std::size_t n = trace.size();
  if (n < 10) {
    throw std::invalid_argument("effective_sample_size: trace must hold at least 10 draws");
  }
  for (double x : trace) {
    if (!std::isfinite(x)) {
      throw std::invalid_argument("effective_sample_size: trace contains non-finite draws");
    }
  }
  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / n;
  std::vector<double> centered(n);
  for (std::size_t i = 0; i < n; ++i) centered[i] = trace[i] - mean;

  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += centered[i] * centered[i + lag];
    return s / static_cast<double>(n);
  };
  const double c0 = autocov(0);
  if (c0 <= 0.0) {
    if (degenerate) *degenerate = true;
    return static_cast<double>(n);
  }

  // sum successive pairs of autocovariances while they stay positive, then
  // force the pair sums non-increasing; the truncated sum estimates the
  // integrated autocorrelation time
  double pair_sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double g = autocov(2 * m) + autocov(2 * m + 1);
    if (g <= 0.0) break;
    g = std::min(g, prev_pair);
    pair_sum += g;
    prev_pair = g;
  }
  const double tau = 2.0 * pair_sum / c0 - 1.0;
  if (tau <= 0.0) return static_cast<double>(n);  // antithetic chain: cap at the length
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

}  // namespace auxmix
