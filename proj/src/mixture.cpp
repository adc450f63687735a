#include "auxmix/mixture.hpp"

#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace auxmix {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double nlg_logf(double u, double nu) { return nlg_log_density(u, NlgShape(nu)); }

// FNV-1a over a canonical text rendering; stable across platforms.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

void GaussianMixture::finalize() {
  const std::size_t k = comps.size();
  log_w.resize(k);
  log_norm.resize(k);
  half_prec.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    const MixtureComponent& c = comps[j];
    if (!(c.weight >= 0.0) || !(c.var > 0.0) || !std::isfinite(c.mean)) {
      throw std::invalid_argument("GaussianMixture: component weights must be >= 0, variances > 0, means finite");
    }
    log_w[j] = c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity();
    log_norm[j] = -0.5 * (kLog2Pi + std::log(c.var));
    half_prec[j] = 0.5 / c.var;
  }
}

double mixture_log_density(const GaussianMixture& m, double z) {
  if (!m.finalized()) {
    throw std::logic_error("mixture_log_density: mixture not finalized");
  }
  const std::size_t k = m.comps.size();
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    if (m.comps[j].weight <= 0.0) continue;
    const double d = z - m.comps[j].mean;
    const double t = m.log_w[j] + m.log_norm[j] - d * d * m.half_prec[j];
    if (t > best) best = t;
  }
  if (!std::isfinite(best)) return -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    if (m.comps[j].weight <= 0.0) continue;
    const double d = z - m.comps[j].mean;
    acc += std::exp(m.log_w[j] + m.log_norm[j] - d * d * m.half_prec[j] - best);
  }
  return best + std::log(acc);
}

std::uint64_t MixtureFitConfig::hash() const {
  std::ostringstream os;
  os << "grid_points=" << grid_points << ";grid_tail=" << fmt17(grid_tail)
     << ";max_iterations=" << max_iterations << ";rel_tolerance=" << fmt17(rel_tolerance)
     << ";var_floor=" << fmt17(var_floor) << ";starts=" << starts_small << ","
     << starts_medium << "," << starts_large << ";central_target=" << fmt17(central_target);
  return fnv1a(os.str());
}

int components_for_shape(double nu) {
  if (!(nu > 0.0)) throw std::domain_error("components_for_shape: nu must be > 0");
  if (nu <= 10.0) return 10;
  if (nu <= 100.0) return 7;
  if (nu <= 1e4) return 4;
  return 1;
}

namespace {

// Certified max |log f - log g| over the central 99% of the target, measured
// on a dense grid that shares no points with the fitting grid.
double certify_central(const GaussianMixture& m, double nu) {
  const NlgShape shape(nu);
  const double lo = nlg_quantile(0.005, shape);
  const double hi = nlg_quantile(0.995, shape);
  const int n = 4097;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = lo + (hi - lo) * i / (n - 1);
    const double gap = std::abs(nlg_logf(u, nu) - mixture_log_density(m, u));
    if (gap > worst) worst = gap;
  }
  return worst;
}

GaussianMixture moment_matched(double nu) {
  GaussianMixture m;
  m.nu = nu;
  m.comps.push_back({1.0, nlg_mean(NlgShape(nu)), nlg_variance(NlgShape(nu))});
  m.finalize();
  m.central_error = certify_central(m, nu);
  return m;
}

struct FitGrid {
  std::vector<double> u;     // abscissae
  std::vector<double> p;     // normalized trapezoid masses of the target
  std::vector<double> logf;  // target log density
};

FitGrid make_fit_grid(double nu, const MixtureFitConfig& cfg) {
  const NlgShape shape(nu);
  FitGrid g;
  const int n = cfg.grid_points;
  const double a = nlg_quantile(cfg.grid_tail, shape);
  const double b = nlg_upper_quantile(cfg.grid_tail, shape);
  g.u.resize(n);
  g.p.resize(n);
  g.logf.resize(n);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    g.u[i] = a + (b - a) * i / (n - 1);
    g.logf[i] = nlg_logf(g.u[i], nu);
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    g.p[i] = w * std::exp(g.logf[i]);
    total += g.p[i];
  }
  for (double& v : g.p) v /= total;
  return g;
}

struct EmState {
  std::vector<double> w, m, v;
  double ce = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

// One full EM run from the given initialization. Deterministic.
EmState run_em(const FitGrid& grid, EmState init, const MixtureFitConfig& cfg) {
  const int n = static_cast<int>(grid.u.size());
  const int k = static_cast<int>(init.w.size());
  EmState s = std::move(init);
  std::vector<double> resp(static_cast<std::size_t>(n) * k);
  std::vector<double> logg(n);
  std::vector<double> lw(k), ln(k), hp(k);

  double prev_ce = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (int j = 0; j < k; ++j) {
      lw[j] = s.w[j] > 0.0 ? std::log(s.w[j]) : -std::numeric_limits<double>::infinity();
      ln[j] = -0.5 * (kLog2Pi + std::log(s.v[j]));
      hp[j] = 0.5 / s.v[j];
    }
    // E step: component log terms, row-wise log-sum-exp, responsibilities
    double ce = 0.0;
    for (int i = 0; i < n; ++i) {
      double* row = resp.data() + static_cast<std::size_t>(i) * k;
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        const double d = grid.u[i] - s.m[j];
        row[j] = lw[j] + ln[j] - d * d * hp[j];
        if (row[j] > best) best = row[j];
      }
      double acc = 0.0;
      for (int j = 0; j < k; ++j) acc += std::exp(row[j] - best);
      logg[i] = best + std::log(acc);
      ce -= grid.p[i] * logg[i];
      const double inv = 1.0 / acc;
      for (int j = 0; j < k; ++j) row[j] = std::exp(row[j] - best) * inv;
    }
    s.ce = ce;
    s.iterations = it + 1;
    if (std::abs(prev_ce - ce) <= cfg.rel_tolerance * std::max(1.0, std::abs(ce))) {
      s.converged = true;
      break;
    }
    prev_ce = ce;
    // M step: weighted moments per component, two-pass for the variances
    for (int j = 0; j < k; ++j) {
      double nk = 0.0, mk = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = grid.p[i] * resp[static_cast<std::size_t>(i) * k + j];
        nk += r;
        mk += r * grid.u[i];
      }
      if (nk <= 1e-300) {  // starved component: park it wide at the center of mass
        s.w[j] = 1e-300;
        continue;
      }
      mk /= nk;
      double vk = 0.0;
      for (int i = 0; i < n; ++i) {
        const double r = grid.p[i] * resp[static_cast<std::size_t>(i) * k + j];
        const double d = grid.u[i] - mk;
        vk += r * d * d;
      }
      vk /= nk;
      s.w[j] = nk;
      s.m[j] = mk;
      s.v[j] = std::max(vk, cfg.var_floor);
    }
    double wsum = 0.0;
    for (int j = 0; j < k; ++j) wsum += s.w[j];
    for (int j = 0; j < k; ++j) s.w[j] /= wsum;
  }
  return s;
}

EmState make_start(int start, int k, double nu, const FitGrid& grid, const MixtureFitConfig& cfg) {
  const NlgShape shape(nu);
  EmState s;
  s.w.assign(k, 1.0 / k);
  s.m.resize(k);
  s.v.resize(k);
  const double span = grid.u.back() - grid.u.front();
  const double base_var = std::max(cfg.var_floor, span / (2.0 * k) * span / (2.0 * k));
  switch (start % 4) {
    case 0:  // means at target quantiles
      for (int j = 0; j < k; ++j) {
        s.m[j] = nlg_quantile((j + 0.5) / k, shape);
        s.v[j] = base_var;
      }
      break;
    case 1: {  // means equally spaced over the bulk
      const double lo = nlg_quantile(0.002, shape);
      const double hi = nlg_quantile(0.998, shape);
      for (int j = 0; j < k; ++j) {
        s.m[j] = k == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * j / (k - 1);
        s.v[j] = std::max(cfg.var_floor, (hi - lo) / std::max(1, k - 1));
      }
      break;
    }
    case 2:  // quantile means, wide variances
      for (int j = 0; j < k; ++j) {
        s.m[j] = nlg_quantile((j + 0.5) / k, shape);
        s.v[j] = 4.0 * base_var;
      }
      break;
    default: {  // moment-matched spread: useful for near-Gaussian targets
      const double mu = nlg_mean(shape);
      const double sd = std::sqrt(nlg_variance(shape));
      for (int j = 0; j < k; ++j) {
        s.m[j] = k == 1 ? mu : mu + sd * (-2.0 + 4.0 * j / (k - 1));
        s.v[j] = std::max(cfg.var_floor, nlg_variance(shape) / k);
      }
      break;
    }
  }
  return s;
}

int starts_for_shape(double nu, const MixtureFitConfig& cfg) {
  if (nu <= 10.0) return cfg.starts_small;
  if (nu <= 100.0) return cfg.starts_medium;
  return cfg.starts_large;
}

}  // namespace

GaussianMixture fit_mixture(NlgShape shape, int n_components, const MixtureFitConfig& cfg) {
  if (n_components < 1) throw std::invalid_argument("fit_mixture: n_components must be >= 1");
  if (cfg.grid_points < 16) throw std::invalid_argument("fit_mixture: grid_points too small");
  if (n_components == 1) return moment_matched(shape.nu);

  const FitGrid grid = make_fit_grid(shape.nu, cfg);
  const int n_starts = std::max(1, starts_for_shape(shape.nu, cfg));
  EmState best;
  for (int start = 0; start < n_starts; ++start) {
    EmState s = run_em(grid, make_start(start, n_components, shape.nu, grid, cfg), cfg);
    if (s.ce < best.ce) best = std::move(s);
  }

  GaussianMixture m;
  m.nu = shape.nu;
  m.comps.resize(n_components);
  for (int j = 0; j < n_components; ++j) m.comps[j] = {best.w[j], best.m[j], best.v[j]};
  // deterministic presentation: components ordered by mean
  std::sort(m.comps.begin(), m.comps.end(),
            [](const MixtureComponent& a, const MixtureComponent& b) { return a.mean < b.mean; });
  m.finalize();
  m.central_error = certify_central(m, shape.nu);
  if (!best.converged && m.central_error > cfg.central_target) {
    throw MixtureFitError("fit_mixture: EM budget exhausted for nu=" + fmt17(shape.nu) +
                              " (best certified central error " + fmt17(m.central_error) + ")",
                          m, best.iterations);
  }
  return m;
}

namespace {

// |log f - log g| - 1, the function whose sign change locates a threshold.
double excess_gap(double u, double nu, const GaussianMixture& mix) {
  return std::abs(nlg_logf(u, nu) - mixture_log_density(mix, u)) - 1.0;
}

// March outward from `from` to `to`, return the first bracketed sign change of
// excess_gap refined by bisection, or nullopt if the gap never exceeds one.
std::optional<double> first_crossing(double from, double to, double nu,
                                     const GaussianMixture& mix) {
  const int steps = 4000;
  double prev_u = from;
  double prev_g = excess_gap(from, nu, mix);
  if (prev_g > 0.0) return from;  // already past one log unit at the start
  for (int i = 1; i <= steps; ++i) {
    const double u = from + (to - from) * i / steps;
    const double g = excess_gap(u, nu, mix);
    if (g > 0.0) {
      double lo = prev_u, hi = u;
      for (int it = 0; it < 200 && std::abs(hi - lo) > 1e-12 * (1.0 + std::abs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        (excess_gap(mid, nu, mix) > 0.0 ? hi : lo) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev_u = u;
    prev_g = g;
  }
  (void)prev_g;
  return std::nullopt;
}

}  // namespace

TailThresholds compute_tail_thresholds(NlgShape shape, const GaussianMixture& mix) {
  if (mix.comps.empty()) throw std::invalid_argument("compute_tail_thresholds: empty mixture");
  TailThresholds t;
  t.nu = shape.nu;
  const double mode = -std::log(shape.nu);
  const double lo = nlg_quantile(1e-14, shape);
  const double hi = nlg_upper_quantile(1e-14, shape);
  if (auto up = first_crossing(mode, hi, shape.nu, mix)) {
    t.upper = *up;
  } else {
    t.upper = hi;
    t.upper_open = true;
  }
  if (auto down = first_crossing(mode, lo, shape.nu, mix)) {
    t.lower = *down;
  } else {
    t.lower = lo;
    t.lower_open = true;
  }
  return t;
}

namespace {

double golden_min(double a, double b, const std::function<double(double)>& f) {
  const double gr = 0.6180339887498949;
  double x1 = b - gr * (b - a);
  double x2 = a + gr * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 200 && (b - a) > 1e-10 * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (f1 <= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = f(x2);
    }
  }
  return f1 <= f2 ? x1 : x2;
}

}  // namespace

GaussianMixture build_adjusted_mixture(NlgShape shape, const GaussianMixture& base,
                                       const TailThresholds& thr) {
  if (!base.finalized()) throw std::invalid_argument("build_adjusted_mixture: base not finalized");
  if (thr.upper_open) return base;  // nothing to repair inside the scan window

  const double nu = shape.nu;
  const double R = 2.5 * nlg_upper_quantile(1e-16, shape) + 1.5 * std::log(std::max(nu, 1.0));
  const int n_knots = 30;
  if (!(R > thr.upper)) return base;  // no tail region beyond the threshold

  const double h = (R - thr.upper) / (n_knots - 1);
  const double span = R - thr.upper;

  GaussianMixture g = base;
  for (int j = 0; j < n_knots; ++j) {
    const double t = thr.upper + h * j;
    const double f_t = std::exp(nlg_logf(t, nu));
    const double g_t = std::exp(mixture_log_density(g, t));
    const double deficit = f_t - g_t;

    // The component's weight pins the mixture to the target at the knot
    // itself, and the next knot is pinned the same way by the next
    // component. What the variance alone controls is the open segment in
    // between, so it is tuned minimax over interior points of [t, t + h].
    // (Tuning at the next knot instead is degenerate: that point gets
    // re-matched anyway, and the optimizer drifts to a max-variance corner
    // that floors the whole tail.)
    const double lo_logv = std::log(1e-4);
    const double hi_logv = std::log(std::max(std::min(span * span, 9.0 * h * h), 2e-4));
    auto objective = [&](double logv) {
      const double v = std::exp(logv);
      const double w = deficit > 0.0 ? deficit * std::sqrt(2.0 * M_PI * v) : 0.0;
      double worst = 0.0;
      for (double frac : {0.2, 0.4, 0.6, 0.8}) {
        const double u = t + frac * h;
        const double d = u - t;
        const double dens = std::exp(mixture_log_density(g, u)) +
                            w * std::exp(-d * d / (2.0 * v)) / std::sqrt(2.0 * M_PI * v);
        const double gap = dens > 0.0 ? std::abs(nlg_logf(u, nu) - std::log(dens)) : 1e6;
        if (gap > worst) worst = gap;
      }
      return worst;
    };
    double v = std::exp(golden_min(lo_logv, hi_logv, objective));
    // Guard: the committed component must strictly undershoot the target at
    // the next two knots. Components can only add density, so overshoot at a
    // knot is permanent: it starves that knot's own component (deficit <= 0)
    // and the construction degenerates. Passing at distances h and 2h bounds
    // every later knot too, because the component decays quadratically in
    // knot distance while the target decays (at most) linearly. Shrinking the
    // variance always restores the margin.
    for (int shrink = 0; shrink < 200 && v > 1e-10; ++shrink) {
      bool ok = true;
      for (double d : {h, 2.0 * h}) {
        const double fwd = deficit > 0.0 ? deficit * std::exp(-d * d / (2.0 * v)) : 0.0;
        const double ahead = std::exp(mixture_log_density(g, t + d)) + fwd;
        if (std::log(ahead) > nlg_logf(t + d, nu) - 0.2) {
          ok = false;
          break;
        }
      }
      if (ok) break;
      v *= 0.72;
    }
    const double w = deficit > 0.0 ? deficit * std::sqrt(2.0 * M_PI * v) : 0.0;
    g.comps.push_back({w, t, v});
    double wsum = 0.0;
    for (const MixtureComponent& c : g.comps) wsum += c.weight;
    for (MixtureComponent& c : g.comps) c.weight /= wsum;
    g.finalize();
  }
  g.adjusted = true;
  g.central_error = certify_central(g, nu);
  return g;
}

MixtureStore::Entry& MixtureStore::entry_for(double nu) {
  {
    std::shared_lock lk(mu_);
    auto it = entries_.find(nu);
    if (it != entries_.end()) return it->second;
  }
  std::unique_lock lk(mu_);
  auto it = entries_.find(nu);
  if (it != entries_.end()) return it->second;

  // K schedule with escalation: a fit whose certified error misses the target
  // is retried with more components before giving up.
  const int k0 = components_for_shape(nu);
  GaussianMixture fitted;
  bool ok = false;
  std::string last_err;
  for (int extra : {0, 3, 6}) {
    if (k0 == 1 && extra > 0) break;  // the single-Gaussian regime is pinned
    try {
      fitted = fit_mixture(NlgShape(nu), k0 + extra, cfg_);
      if (fitted.central_error <= cfg_.central_target) {
        ok = true;
        break;
      }
      last_err = "certified central error " + fmt17(fitted.central_error);
    } catch (const MixtureFitError& e) {
      last_err = e.what();
    }
  }
  if (!ok) {
    throw NumericalError("MixtureStore: no acceptable fit for nu=" + fmt17(nu) + ": " + last_err);
  }
  auto [ins, inserted] = entries_.emplace(nu, Entry{std::move(fitted), std::nullopt, std::nullopt});
  (void)inserted;
  return ins->second;
}

const GaussianMixture& MixtureStore::base(double nu) { return entry_for(nu).base; }

const TailThresholds& MixtureStore::thresholds(double nu) {
  Entry& e = entry_for(nu);
  {
    std::shared_lock lk(mu_);
    if (e.thresholds) return *e.thresholds;
  }
  std::unique_lock lk(mu_);
  if (!e.thresholds) e.thresholds = compute_tail_thresholds(NlgShape(nu), e.base);
  return *e.thresholds;
}

const GaussianMixture& MixtureStore::adjusted(double nu) {
  Entry& e = entry_for(nu);
  const TailThresholds& thr = thresholds(nu);
  {
    std::shared_lock lk(mu_);
    if (e.adjusted) return *e.adjusted;
  }
  std::unique_lock lk(mu_);
  if (!e.adjusted) e.adjusted = build_adjusted_mixture(NlgShape(nu), e.base, thr);
  return *e.adjusted;
}

void MixtureStore::clear() {
  std::unique_lock lk(mu_);
  entries_.clear();
}

std::size_t MixtureStore::size() const {
  std::shared_lock lk(mu_);
  return entries_.size();
}

namespace {

void write_mixture(std::ostream& os, const char* tag, const GaussianMixture& m) {
  os << tag << " nu " << fmt17(m.nu) << " K " << m.comps.size() << " adjusted "
     << (m.adjusted ? 1 : 0) << " central_error " << fmt17(m.central_error) << "\n";
  for (const MixtureComponent& c : m.comps) {
    os << "  component " << fmt17(c.weight) << " " << fmt17(c.mean) << " " << fmt17(c.var) << "\n";
  }
}

GaussianMixture read_mixture(std::istream& is, std::istringstream& header) {
  GaussianMixture m;
  std::string kw;
  std::size_t k = 0;
  int adj = 0;
  header >> kw >> m.nu >> kw >> k >> kw >> adj >> kw >> m.central_error;
  m.adjusted = adj != 0;
  for (std::size_t j = 0; j < k; ++j) {
    std::string line;
    if (!std::getline(is, line)) throw IoError("mixture cache: truncated component list");
    std::istringstream ls(line);
    std::string tag;
    MixtureComponent c{};
    if (!(ls >> tag >> c.weight >> c.mean >> c.var) || tag != "component") {
      throw IoError("mixture cache: malformed component line: " + line);
    }
    m.comps.push_back(c);
  }
  m.finalize();
  return m;
}

}  // namespace

void MixtureStore::save_file(const std::string& path) const {
  std::shared_lock lk(mu_);
  std::ofstream os(path);
  if (!os) throw IoError("mixture cache: cannot open for writing: " + path);
  os << "# negative log-gamma mixture cache v1\n";
  os << "fit_config_hash " << cfg_.hash() << "\n";
  for (const auto& [nu, e] : entries_) {
    write_mixture(os, "mixture", e.base);
    if (e.thresholds) {
      const TailThresholds& t = *e.thresholds;
      os << "thresholds nu " << fmt17(t.nu) << " lower " << fmt17(t.lower) << " upper "
         << fmt17(t.upper) << " lower_open " << (t.lower_open ? 1 : 0) << " upper_open "
         << (t.upper_open ? 1 : 0) << "\n";
    }
    if (e.adjusted) write_mixture(os, "adjusted_mixture", *e.adjusted);
  }
  if (!os) throw IoError("mixture cache: write failed: " + path);
}

void MixtureStore::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("mixture cache: cannot open: " + path);
  std::string line;
  bool hash_ok = false;
  std::unique_lock lk(mu_);
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "fit_config_hash") {
      std::uint64_t h = 0;
      ls >> h;
      hash_ok = (h == cfg_.hash());
      if (!hash_ok) return;  // built under a different config: ignore the file
    } else if (tag == "mixture" || tag == "adjusted_mixture") {
      if (!hash_ok) throw IoError("mixture cache: missing fit_config_hash header");
      GaussianMixture m = read_mixture(is, ls);
      Entry& e = entries_[m.nu];
      if (tag == "mixture") {
        e.base = std::move(m);
      } else {
        e.adjusted = std::move(m);
      }
    } else if (tag == "thresholds") {
      if (!hash_ok) throw IoError("mixture cache: missing fit_config_hash header");
      TailThresholds t;
      std::string kw;
      int lo_open = 0, up_open = 0;
      ls >> kw >> t.nu >> kw >> t.lower >> kw >> t.upper >> kw >> lo_open >> kw >> up_open;
      t.lower_open = lo_open != 0;
      t.upper_open = up_open != 0;
      entries_[t.nu].thresholds = t;
    } else {
      throw IoError("mixture cache: unrecognized line: " + line);
    }
  }
}

MixtureStore& global_mixture_store() {
  static MixtureStore store;
  return store;
}

}  // namespace auxmix
