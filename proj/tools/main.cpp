// auxmix command-line front end: dataset simulation, model fitting, algorithm
// comparison, and approximation diagnostics. Talks to the engine exclusively
// through the C surface in auxmix.h.

#include "auxmix.h"

#include "CLI11.hpp"
#include "json.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

// exit codes: 0 success, 2 configuration error, 3 numerical failure
struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) { throw CliError{code, message}; }

int exit_code_for(axm_status st) {
  switch (st) {
    case AXM_OK: return 0;
    case AXM_ERR_INVALID: return 2;
    case AXM_ERR_IO: return 2;
    default: return 3;
  }
}

void check(axm_status st, const std::string& what) {
  if (st != AXM_OK) fail(exit_code_for(st), what + ": " + axm_last_error());
}

/* for pointer-returning API calls: classify by the thread's last status */
[[noreturn]] void fail_last(const std::string& what) {
  const int code = exit_code_for(axm_last_status());
  fail(code == 0 ? 3 : code, what + ": " + axm_last_error());
}

std::string fnv1a_hex(const std::string& bytes) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(2, "cannot open " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(2, "cannot write " + path);
  os << content;
  if (!os.flush()) fail(2, "write failed for " + path);
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// ------------------------------------------------------------------ dataset

struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // one vector per name
  std::size_t rows = 0;

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j) {
      if (names[j] == name) return columns[j];
    }
    fail(2, "dataset has no column named '" + name + "'");
  }
  bool has(const std::string& name) const {
    return std::find(names.begin(), names.end(), name) != names.end();
  }
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

Table read_table(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(2, "cannot open dataset " + path);
  std::string line;
  if (!std::getline(is, line)) fail(2, "dataset " + path + " is empty");
  Table t;
  t.names = split(line, ',');
  t.columns.assign(t.names.size(), {});
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (cells.size() != t.names.size()) {
      fail(2, "dataset " + path + ": row with " + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(t.names.size()));
    }
    for (std::size_t j = 0; j < cells.size(); ++j) {
      char* end = nullptr;
      const double v = std::strtod(cells[j].c_str(), &end);
      if (end == cells[j].c_str() || *end != '\0') {
        fail(2, "dataset " + path + ": non-numeric cell '" + cells[j] + "'");
      }
      t.columns[j].push_back(v);
    }
    ++t.rows;
  }
  if (t.rows == 0) fail(2, "dataset " + path + " has no rows");
  return t;
}

// matrix file: comma-separated numeric rows, no header
std::vector<double> read_matrix(const std::string& path, int expected_order) {
  std::ifstream is(path);
  if (!is) fail(2, "cannot open precision matrix " + path);
  std::vector<double> values;
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> cells = split(line, ',');
    if (static_cast<int>(cells.size()) != expected_order) {
      fail(2, "precision matrix " + path + ": expected " + std::to_string(expected_order) +
                  " columns per row");
    }
    for (const std::string& c : cells) {
      char* end = nullptr;
      values.push_back(std::strtod(c.c_str(), &end));
      if (end == c.c_str() || *end != '\0') {
        fail(2, "precision matrix " + path + ": non-numeric cell '" + c + "'");
      }
    }
    ++rows;
  }
  if (rows != expected_order) {
    fail(2, "precision matrix " + path + ": expected " + std::to_string(expected_order) +
                " rows");
  }
  return values;
}

// ------------------------------------------------------------ configuration

struct BlockSpec {
  std::vector<std::string> columns;
  std::string precision = "identity";  // or a matrix file path
  int rank = -1;                       // default: block size
  int prior_kind = 0;                  // 0 inverse-gamma, 1 gamma
  double prior_a = 1.0;
  double prior_b = 0.001;
};

struct RunConfig {
  std::string data;
  std::string output_dir;
  std::string y_column = "y";
  std::string offset_column;  // empty: offsets default to 1
  bool intercept = true;
  std::vector<std::string> covariates;
  double prior_var = 100.0;
  std::vector<BlockSpec> blocks;

  std::string algorithm = "AUTO";
  long long iterations = 11000;
  long long burn_in = 1000;
  long long thinning = 1;
  long long t1 = 500;
  long long t2 = 250;
  double p_lower = 0.05;
  double p_upper = 0.05;
  uint64_t seed = 0;
  int chains = 1;
  bool store_residual_traces = false;
  long long residual_trace_stride = 1;
};

int algorithm_code(const std::string& name) {
  if (name == "AMS") return AXM_ALG_AMS;
  if (name == "IAMS") return AXM_ALG_IAMS;
  if (name == "MH-IAMS") return AXM_ALG_MH_IAMS;
  if (name == "RIAMS") return AXM_ALG_RIAMS;
  if (name == "AUTO") return AXM_ALG_AUTO;
  fail(2, "unknown algorithm '" + name + "' (expected AMS, IAMS, MH-IAMS, RIAMS, or AUTO)");
}

const char* algorithm_label(int code) {
  switch (code) {
    case AXM_ALG_AMS: return "AMS";
    case AXM_ALG_IAMS: return "IAMS";
    case AXM_ALG_MH_IAMS: return "MH-IAMS";
    case AXM_ALG_RIAMS: return "RIAMS";
    case AXM_ALG_AUTO: return "AUTO";
    default: return "?";
  }
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(2, "config: key '" + key + "' expects true or false, got '" + v + "'");
}

long long parse_int(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const long long x = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') {
    fail(2, "config: key '" + key + "' expects an integer, got '" + v + "'");
  }
  return x;
}

double parse_real(const std::string& v, const std::string& key) {
  char* end = nullptr;
  const double x = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') {
    fail(2, "config: key '" + key + "' expects a number, got '" + v + "'");
  }
  return x;
}

std::vector<std::string> tokens_of(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

// Key/value lines with `block ... end` nesting; `schema_version 1` required.
RunConfig parse_run_config(const std::string& path) {
  std::istringstream is(read_file(path));
  RunConfig cfg;
  bool saw_schema = false;
  std::string line;
  int line_no = 0;
  std::optional<BlockSpec> block;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::vector<std::string> toks = tokens_of(line);
    if (toks.empty()) continue;
    const std::string& key = toks[0];
    const auto one = [&]() -> const std::string& {
      if (toks.size() != 2) {
        fail(2, "config " + path + " line " + std::to_string(line_no) + ": key '" + key +
                    "' expects exactly one value");
      }
      return toks[1];
    };
    if (block) {
      if (key == "columns") {
        block->columns.assign(toks.begin() + 1, toks.end());
      } else if (key == "precision") {
        block->precision = one();
      } else if (key == "rank") {
        block->rank = static_cast<int>(parse_int(one(), key));
      } else if (key == "prior") {
        if (toks.size() != 4) {
          fail(2, "config: 'prior' expects: prior inverse_gamma|gamma <a> <b>");
        }
        if (toks[1] == "inverse_gamma") {
          block->prior_kind = 0;
        } else if (toks[1] == "gamma") {
          block->prior_kind = 1;
        } else {
          fail(2, "config: unknown prior family '" + toks[1] + "'");
        }
        block->prior_a = parse_real(toks[2], key);
        block->prior_b = parse_real(toks[3], key);
      } else if (key == "end") {
        if (block->columns.empty()) fail(2, "config: block without columns");
        cfg.blocks.push_back(*block);
        block.reset();
      } else {
        fail(2, "config " + path + " line " + std::to_string(line_no) +
                    ": unknown block key '" + key + "'");
      }
      continue;
    }
    if (key == "schema_version") {
      if (one() != "1") fail(2, "config: unsupported schema_version (expected 1)");
      saw_schema = true;
    } else if (key == "data") {
      cfg.data = one();
    } else if (key == "output_dir") {
      cfg.output_dir = one();
    } else if (key == "y_column") {
      cfg.y_column = one();
    } else if (key == "offset_column") {
      cfg.offset_column = one();
    } else if (key == "intercept") {
      cfg.intercept = parse_bool(one(), key);
    } else if (key == "covariates") {
      cfg.covariates.assign(toks.begin() + 1, toks.end());
    } else if (key == "prior_var") {
      cfg.prior_var = parse_real(one(), key);
    } else if (key == "algorithm") {
      cfg.algorithm = one();
      algorithm_code(cfg.algorithm);  // validate now
    } else if (key == "iterations") {
      cfg.iterations = parse_int(one(), key);
    } else if (key == "burn_in") {
      cfg.burn_in = parse_int(one(), key);
    } else if (key == "thinning") {
      cfg.thinning = parse_int(one(), key);
    } else if (key == "t1") {
      cfg.t1 = parse_int(one(), key);
    } else if (key == "t2") {
      cfg.t2 = parse_int(one(), key);
    } else if (key == "p_lower") {
      cfg.p_lower = parse_real(one(), key);
    } else if (key == "p_upper") {
      cfg.p_upper = parse_real(one(), key);
    } else if (key == "seed") {
      cfg.seed = static_cast<uint64_t>(parse_int(one(), key));
    } else if (key == "chains") {
      cfg.chains = static_cast<int>(parse_int(one(), key));
    } else if (key == "store_residual_traces") {
      cfg.store_residual_traces = parse_bool(one(), key);
    } else if (key == "residual_trace_stride") {
      cfg.residual_trace_stride = parse_int(one(), key);
    } else if (key == "block") {
      block.emplace();
    } else {
      fail(2, "config " + path + " line " + std::to_string(line_no) + ": unknown key '" +
                  key + "'");
    }
  }
  if (block) fail(2, "config: block without matching 'end'");
  if (!saw_schema) fail(2, "config: missing schema_version");
  if (cfg.data.empty()) fail(2, "config: missing data path");
  if (cfg.output_dir.empty()) fail(2, "config: missing output_dir");
  if (cfg.chains < 1) fail(2, "config: chains must be >= 1");
  return cfg;
}

// ------------------------------------------------------------ model handles

struct Model {
  axm_model* h = nullptr;
  ~Model() { axm_model_free(h); }
  Model() = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
};

struct Store {
  axm_store* h = nullptr;
  Store() : h(axm_store_create()) {
    if (!h) fail_last("cannot create approximation store");
  }
  ~Store() { axm_store_free(h); }
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;
};

struct Chain {
  axm_chain* h = nullptr;
  Chain() = default;
  Chain(Chain&& other) noexcept : h(other.h) { other.h = nullptr; }
  Chain& operator=(Chain&& other) noexcept {
    std::swap(h, other.h);
    return *this;
  }
  ~Chain() { axm_chain_free(h); }
  Chain(const Chain&) = delete;
  Chain& operator=(const Chain&) = delete;
};

void build_model(Model& model, const Table& data, const RunConfig& cfg) {
  const std::vector<double>& yc = data.column(cfg.y_column);
  const int32_t n = static_cast<int32_t>(data.rows);
  std::vector<int32_t> y(static_cast<std::size_t>(n));
  for (int32_t i = 0; i < n; ++i) {
    const double v = yc[static_cast<std::size_t>(i)];
    if (v < 0 || v != std::floor(v)) {
      fail(2, "column '" + cfg.y_column + "' must hold non-negative integer counts");
    }
    y[static_cast<std::size_t>(i)] = static_cast<int32_t>(v);
  }
  std::vector<double> offsets;
  const double* offsets_ptr = nullptr;
  if (!cfg.offset_column.empty()) {
    if (!data.has(cfg.offset_column)) {
      fail(2, "offset column '" + cfg.offset_column + "' not in dataset");
    }
    offsets = data.column(cfg.offset_column);
    offsets_ptr = offsets.data();
  }
  const int32_t p = static_cast<int32_t>(cfg.covariates.size() + (cfg.intercept ? 1 : 0));
  if (p < 1) fail(2, "model needs an intercept or at least one covariate");
  std::vector<double> x(static_cast<std::size_t>(n) * p);
  for (int32_t i = 0; i < n; ++i) {
    int32_t j = 0;
    if (cfg.intercept) x[static_cast<std::size_t>(i * p + j++)] = 1.0;
    for (const std::string& name : cfg.covariates) {
      x[static_cast<std::size_t>(i * p + j++)] = data.column(name)[static_cast<std::size_t>(i)];
    }
  }
  std::vector<double> v0(static_cast<std::size_t>(p) * p, 0.0);
  for (int32_t j = 0; j < p; ++j) v0[static_cast<std::size_t>(j * p + j)] = cfg.prior_var;
  model.h = axm_model_create(n, p, y.data(), offsets_ptr, x.data(), v0.data());
  if (!model.h) fail_last("model construction failed");

  for (const BlockSpec& b : cfg.blocks) {
    const int32_t m = static_cast<int32_t>(b.columns.size());
    std::vector<double> z(static_cast<std::size_t>(n) * m);
    for (int32_t i = 0; i < n; ++i) {
      for (int32_t j = 0; j < m; ++j) {
        z[static_cast<std::size_t>(i * m + j)] =
            data.column(b.columns[static_cast<std::size_t>(j)])[static_cast<std::size_t>(i)];
      }
    }
    std::vector<double> k;
    if (b.precision == "identity") {
      k.assign(static_cast<std::size_t>(m) * m, 0.0);
      for (int32_t j = 0; j < m; ++j) k[static_cast<std::size_t>(j * m + j)] = 1.0;
    } else {
      k = read_matrix(b.precision, m);
    }
    const int32_t rank = b.rank >= 0 ? b.rank : m;
    check(axm_model_add_block(model.h, m, z.data(), k.data(), rank, b.prior_kind, b.prior_a,
                              b.prior_b),
          "random-effect block");
  }
}

axm_sampler_config to_sampler_config(const RunConfig& cfg, uint64_t chain_index) {
  axm_sampler_config c;
  axm_sampler_config_init(&c);
  c.algorithm = algorithm_code(cfg.algorithm);
  c.iterations = cfg.iterations;
  c.burn_in = cfg.burn_in;
  c.thinning = cfg.thinning;
  c.t1 = cfg.t1;
  c.t2 = cfg.t2;
  c.p_lower = cfg.p_lower;
  c.p_upper = cfg.p_upper;
  c.seed = cfg.seed;
  c.chain_index = chain_index;
  c.store_residual_traces = cfg.store_residual_traces ? 1 : 0;
  c.residual_trace_stride = cfg.residual_trace_stride;
  return c;
}

int worker_count() {
  const char* env = std::getenv("AUXMIX_WORKERS");
  if (!env) return 1;
  const int w = std::atoi(env);
  return w >= 1 ? w : 1;
}

// Runs `chains` chains (chain_index 0..chains-1) with up to AUXMIX_WORKERS in
// flight. Results are deterministic regardless of scheduling: every chain
// derives its stream from (seed, chain_index).
std::vector<Chain> run_chains(const Model& model, const RunConfig& cfg, Store& store) {
  std::vector<Chain> chains(static_cast<std::size_t>(cfg.chains));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string error_message;
  int error_code = 3;
  std::mutex error_mutex;
  const int workers = std::min(worker_count(), cfg.chains);
  auto work = [&] {
    for (;;) {
      const int idx = next.fetch_add(1);
      if (idx >= cfg.chains || failed.load()) return;
      const axm_sampler_config sc = to_sampler_config(cfg, static_cast<uint64_t>(idx));
      axm_chain* c = axm_run_chain(model.h, &sc, store.h);
      if (!c) {
        std::lock_guard<std::mutex> lock(error_mutex);
        failed.store(true);
        if (error_message.empty()) {
          error_message = axm_last_error();
          const int code = exit_code_for(axm_last_status());
          error_code = code == 0 ? 3 : code;
        }
        return;
      }
      chains[static_cast<std::size_t>(idx)].h = c;
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& t : pool) t.join();
  }
  if (failed.load()) fail(error_code, "chain failed: " + error_message);
  return chains;
}

// ------------------------------------------------------------------- stats

double vec_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double vec_sd(const std::vector<double>& v, double m) {
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

double sorted_quantile(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = pos - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

// fixed-bandwidth Gaussian kernel density, 256-point grid
std::string kde_csv(const std::vector<double>& draws) {
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  const double m = vec_mean(sorted);
  const double sd = vec_sd(sorted, m);
  const double iqr = sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25);
  double spread = std::min(sd, iqr / 1.34);
  if (!(spread > 0.0)) spread = sd > 0.0 ? sd : 1.0;
  const double h = 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
  const double lo = sorted.front() - 3.0 * h, hi = sorted.back() + 3.0 * h;
  std::ostringstream os;
  os << "x,density\n";
  const int grid = 256;
  for (int g = 0; g < grid; ++g) {
    const double x = lo + (hi - lo) * g / (grid - 1);
    double dens = 0.0;
    for (double d : sorted) {
      const double z = (x - d) / h;
      dens += std::exp(-0.5 * z * z);
    }
    dens /= static_cast<double>(sorted.size()) * h * std::sqrt(2.0 * M_PI);
    os << g6(x) << ',' << g6(dens) << '\n';
  }
  return os.str();
}

double two_sample_ks(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double ks = 0.0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j]) {
      ++i;
    } else {
      ++j;
    }
    const double fa = static_cast<double>(i) / static_cast<double>(a.size());
    const double fb = static_cast<double>(j) / static_cast<double>(b.size());
    ks = std::max(ks, std::abs(fa - fb));
  }
  return ks;
}

std::vector<double> chain_column(const Chain& chain, int32_t col) {
  std::vector<double> out(static_cast<std::size_t>(axm_chain_rows(chain.h)));
  check(axm_chain_copy_column(chain.h, col, out.data()), "draw access");
  return out;
}

std::string draws_csv(const Chain& chain) {
  const int64_t rows = axm_chain_rows(chain.h);
  const int32_t cols = axm_chain_cols(chain.h);
  std::vector<double> flat(static_cast<std::size_t>(rows * cols));
  check(axm_chain_copy_draws(chain.h, flat.data()), "draw access");
  std::ostringstream os;
  for (int32_t c = 0; c < cols; ++c) os << (c ? "," : "") << axm_chain_name(chain.h, c);
  os << '\n';
  for (int64_t r = 0; r < rows; ++r) {
    for (int32_t c = 0; c < cols; ++c) {
      os << (c ? "," : "") << g17(flat[static_cast<std::size_t>(r * cols + c)]);
    }
    os << '\n';
  }
  return os.str();
}

// ------------------------------------------------------------- subcommands

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) fail(2, "cannot create output directory " + dir + ": " + ec.message());
}

std::string path_join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

int cmd_simulate(const std::string& output, int n, double c, uint64_t seed) {
  check(axm_simulate_toy(output.c_str(), n, c, seed), "simulate");
  std::printf("wrote %s (%d rows, c=%s, seed=%llu)\n", output.c_str(), n, g6(c).c_str(),
              static_cast<unsigned long long>(seed));
  return 0;
}

nlohmann::json timings_json(const Chain& chain) {
  axm_timings tm;
  check(axm_chain_timings(chain.h, &tm), "timings");
  return {{"warmup_seconds", tm.warmup_seconds},
          {"monitor_seconds", tm.monitor_seconds},
          {"sampling_seconds", tm.sampling_seconds},
          {"total_seconds", tm.total_seconds}};
}

std::string summary_text(const std::vector<Chain>& chains) {
  const Chain& first = chains.front();
  const int32_t cols = axm_chain_cols(first.h);
  std::ostringstream os;
  os << "chosen_algorithm";
  for (const Chain& c : chains) os << ' ' << algorithm_label(axm_chain_algorithm(c.h));
  os << "\n\nparameters (pooled over " << chains.size() << " chain"
     << (chains.size() == 1 ? "" : "s") << "):\n";
  os << "name mean sd q05 q50 q95 ess\n";
  for (int32_t j = 0; j < cols; ++j) {
    std::vector<double> pooled;
    double ess_total = 0.0;
    for (const Chain& c : chains) {
      const std::vector<double> col = chain_column(c, j);
      pooled.insert(pooled.end(), col.begin(), col.end());
      const double ess = axm_chain_ess(c.h, j, nullptr);
      ess_total += ess > 0.0 ? ess : 0.0;
    }
    const double m = vec_mean(pooled);
    const double sd = vec_sd(pooled, m);
    std::vector<double> sorted = pooled;
    std::sort(sorted.begin(), sorted.end());
    os << axm_chain_name(first.h, j) << ' ' << g6(m) << ' ' << g6(sd) << ' '
       << g6(sorted_quantile(sorted, 0.05)) << ' ' << g6(sorted_quantile(sorted, 0.5)) << ' '
       << g6(sorted_quantile(sorted, 0.95)) << ' ' << g6(ess_total) << '\n';
  }
  os << "\nacceptance (chain 1):\n";
  for (int32_t b = 0; b < axm_chain_block_count(first.h); ++b) {
    int64_t acc = 0, prop = 0;
    check(axm_chain_block_counts(first.h, b, &acc, &prop), "acceptance");
    const double rate = prop > 0 ? static_cast<double>(acc) / static_cast<double>(prop) : 1.0;
    os << axm_chain_block_name(first.h, b) << ' ' << g6(rate) << " (" << acc << '/' << prop
       << ")\n";
  }
  const int64_t aux = axm_chain_aux_rows(first.h);
  std::vector<int32_t> flags(static_cast<std::size_t>(aux), 0);
  if (axm_chain_copy_flags(first.h, flags.data()) == AXM_OK) {
    std::vector<int32_t> obs(static_cast<std::size_t>(aux)), slot(static_cast<std::size_t>(aux));
    check(axm_chain_aux_identity(first.h, obs.data(), slot.data(), nullptr), "aux identity");
    int64_t flagged = 0;
    for (int32_t f : flags) flagged += f;
    os << "\ntail_flags " << flagged << " of " << aux << " residuals";
    if (flagged > 0) {
      os << ":";
      for (std::size_t r = 0; r < flags.size(); ++r) {
        if (flags[r]) os << " (" << obs[r] << ',' << slot[r] << ')';
      }
    }
    os << '\n';
  }
  return os.str();
}

int cmd_fit(const std::string& config_path) {
  const std::string config_bytes = read_file(config_path);
  const RunConfig cfg = parse_run_config(config_path);
  const Table data = read_table(cfg.data);
  Model model;
  build_model(model, data, cfg);
  ensure_dir(cfg.output_dir);

  Store store;
  const std::vector<Chain> chains = run_chains(model, cfg, store);

  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["tool"] = axm_version();
  manifest["command"] = "fit";
  manifest["config_hash"] = fnv1a_hex(config_bytes);
  manifest["seed"] = cfg.seed;
  manifest["data"] = cfg.data;
  manifest["chains"] = cfg.chains;
  manifest["algorithm"] = cfg.algorithm;
  std::vector<std::string> written;

  for (std::size_t k = 0; k < chains.size(); ++k) {
    const std::string name = "draws_" + std::to_string(k + 1) + ".csv";
    write_file(path_join(cfg.output_dir, name), draws_csv(chains[k]));
    written.push_back(name);
    manifest["chosen_algorithm"].push_back(
        algorithm_label(axm_chain_algorithm(chains[k].h)));
    manifest["timings"].push_back(timings_json(chains[k]));
  }
  write_file(path_join(cfg.output_dir, "summary.txt"), summary_text(chains));
  written.push_back("summary.txt");
  manifest["outputs"] = written;
  write_file(path_join(cfg.output_dir, "manifest.json"), manifest.dump(2) + "\n");
  std::printf("fit complete: %s\n", cfg.output_dir.c_str());
  return 0;
}

int cmd_compare(const std::string& data_path, const std::string& output_dir,
                const std::string& algorithms, bool with_oracle, long long iterations,
                long long burn_in, long long t1, long long t2, uint64_t seed,
                long long oracle_iterations, long long oracle_burn_in) {
  const Table data = read_table(data_path);
  if (!data.has("y") || !data.has("x1")) {
    fail(2, "compare expects the toy dataset columns y,x1[,x2]");
  }
  RunConfig cfg;
  cfg.data = data_path;
  cfg.output_dir = output_dir;
  cfg.covariates = {"x1"};
  cfg.iterations = iterations;
  cfg.burn_in = burn_in;
  cfg.t1 = t1;
  cfg.t2 = t2;
  cfg.seed = seed;
  Model model;
  build_model(model, data, cfg);
  ensure_dir(output_dir);
  const int32_t dim = axm_model_dim(model.h);

  std::vector<std::string> algs;
  for (const std::string& a : split(algorithms, ',')) {
    if (!a.empty()) algs.push_back(a);
  }
  if (algs.empty()) fail(2, "compare: empty algorithm list");

  // oracle draws for KS distances
  std::vector<std::vector<double>> oracle_cols;
  if (with_oracle) {
    const int64_t kept = (oracle_iterations - oracle_burn_in);
    if (kept <= 0) fail(2, "compare: oracle_iterations must exceed oracle_burn_in");
    std::vector<double> flat(static_cast<std::size_t>(kept * dim));
    double acc = 0.0;
    int32_t warning = 0;
    check(axm_reference_run(model.h, oracle_iterations, oracle_burn_in, 1, seed + 1000003, 0,
                            flat.data(), &acc, &warning),
          "oracle chain");
    if (warning) {
      std::fprintf(stderr, "warning: oracle acceptance %.3f outside the healthy band\n", acc);
    }
    oracle_cols.assign(static_cast<std::size_t>(dim), {});
    for (int64_t r = 0; r < kept; ++r) {
      for (int32_t j = 0; j < dim; ++j) {
        oracle_cols[static_cast<std::size_t>(j)].push_back(
            flat[static_cast<std::size_t>(r * dim + j)]);
      }
    }
  }

  Store store;
  std::ostringstream acc_table, timing_table, ks_table;
  acc_table << "algorithm,block,accepted,proposed,rate\n";
  timing_table << "algorithm,sampling_seconds,per_iteration_seconds,ratio_vs_iams\n";
  ks_table << "algorithm,parameter,ks\n";
  std::map<std::string, double> per_iter;
  std::vector<std::pair<std::string, Chain>> runs;

  for (const std::string& alg : algs) {
    RunConfig one = cfg;
    one.algorithm = alg;
    const axm_sampler_config sc = to_sampler_config(one, 0);
    Chain chain;
    chain.h = axm_run_chain(model.h, &sc, store.h);
    if (!chain.h) fail_last("chain " + alg + " failed");

    for (int32_t b = 0; b < axm_chain_block_count(chain.h); ++b) {
      int64_t a = 0, p = 0;
      check(axm_chain_block_counts(chain.h, b, &a, &p), "acceptance");
      const double rate = p > 0 ? static_cast<double>(a) / static_cast<double>(p) : 1.0;
      acc_table << alg << ',' << axm_chain_block_name(chain.h, b) << ',' << a << ',' << p << ','
                << g6(rate) << '\n';
    }

    axm_timings tm;
    check(axm_chain_timings(chain.h, &tm), "timings");
    const int code = algorithm_code(alg);
    long long training = 0;
    if (code == AXM_ALG_MH_IAMS) training = t1;
    if (code == AXM_ALG_RIAMS || code == AXM_ALG_AUTO) training = t1 + t2;
    per_iter[alg] = tm.sampling_seconds / static_cast<double>(iterations - training);

    for (int32_t j = 0; j < axm_chain_cols(chain.h); ++j) {
      const std::vector<double> col = chain_column(chain, j);
      write_file(path_join(output_dir, std::string("density_") + axm_chain_name(chain.h, j) +
                                           "_" + alg + ".csv"),
                 kde_csv(col));
      if (with_oracle) {
        ks_table << alg << ',' << axm_chain_name(chain.h, j) << ','
                 << g6(two_sample_ks(col, oracle_cols[static_cast<std::size_t>(j)])) << '\n';
      }
    }
    runs.emplace_back(alg, std::move(chain));
  }

  const double iams_rate = per_iter.count("IAMS") ? per_iter["IAMS"] : 0.0;
  for (const auto& [alg, chain] : runs) {
    axm_timings tm;
    check(axm_chain_timings(chain.h, &tm), "timings");
    const double ratio = iams_rate > 0.0 ? per_iter[alg] / iams_rate : 0.0;
    timing_table << alg << ',' << g6(tm.sampling_seconds) << ',' << g17(per_iter[alg]) << ','
                 << g6(ratio) << '\n';
  }

  if (with_oracle) {
    const axm_chain* first = runs.front().second.h;
    for (std::size_t j = 0; j < oracle_cols.size(); ++j) {
      write_file(path_join(output_dir, std::string("density_") +
                                           axm_chain_name(first, static_cast<int32_t>(j)) +
                                           "_oracle.csv"),
                 kde_csv(oracle_cols[j]));
    }
    write_file(path_join(output_dir, "ks.csv"), ks_table.str());
  }
  write_file(path_join(output_dir, "acceptance.csv"), acc_table.str());
  write_file(path_join(output_dir, "timing.csv"), timing_table.str());

  nlohmann::json manifest;
  manifest["schema_version"] = 1;
  manifest["tool"] = axm_version();
  manifest["command"] = "compare";
  manifest["seed"] = seed;
  manifest["data"] = data_path;
  manifest["algorithms"] = algs;
  manifest["iterations"] = iterations;
  manifest["burn_in"] = burn_in;
  manifest["oracle"] = with_oracle;
  for (const auto& [alg, chain] : runs) {
    manifest["chosen_algorithm"][alg] = algorithm_label(axm_chain_algorithm(chain.h));
  }
  write_file(path_join(output_dir, "manifest.json"), manifest.dump(2) + "\n");
  std::printf("compare complete: %s\n", output_dir.c_str());
  return 0;
}

int cmd_diagnose(const std::string& config_path, const std::string& law_name) {
  const RunConfig base = parse_run_config(config_path);
  RunConfig cfg = base;
  cfg.store_residual_traces = true;  // the whole point of this subcommand
  const Table data = read_table(cfg.data);
  Model model;
  build_model(model, data, cfg);
  ensure_dir(cfg.output_dir);

  int32_t law = AXM_LAW_MIXTURE;
  if (law_name == "mixture") {
    law = AXM_LAW_MIXTURE;
  } else if (law_name == "adjusted") {
    law = AXM_LAW_ADJUSTED;
  } else if (law_name == "exact") {
    law = AXM_LAW_EXACT;
  } else {
    fail(2, "diagnose: unknown law '" + law_name + "' (mixture, adjusted, exact)");
  }

  Store store;
  const axm_sampler_config sc = to_sampler_config(cfg, 0);
  Chain chain;
  chain.h = axm_run_chain(model.h, &sc, store.h);
  if (!chain.h) fail_last("chain failed");

  const int64_t aux = axm_chain_aux_rows(chain.h);
  std::vector<double> delta(static_cast<std::size_t>(aux));
  std::vector<int64_t> finite(static_cast<std::size_t>(aux));
  int64_t nonfinite = 0;
  check(axm_chain_delta(chain.h, store.h, law, delta.data(), finite.data(), &nonfinite),
        "discrepancy");
  std::vector<int32_t> obs(static_cast<std::size_t>(aux)), slot(static_cast<std::size_t>(aux));
  std::vector<double> nus(static_cast<std::size_t>(aux));
  check(axm_chain_aux_identity(chain.h, obs.data(), slot.data(), nus.data()), "aux identity");

  std::ostringstream delta_csv;
  delta_csv << "obs,slot,nu,delta,finite_iterations\n";
  double worst = 0.0;
  std::size_t worst_row = 0;
  for (std::size_t r = 0; r < delta.size(); ++r) {
    delta_csv << obs[r] << ',' << slot[r] << ',' << g17(nus[r]) << ',' << g17(delta[r]) << ','
              << finite[r] << '\n';
    if (std::isfinite(delta[r]) && std::abs(delta[r]) > worst) {
      worst = std::abs(delta[r]);
      worst_row = r;
    }
  }
  write_file(path_join(cfg.output_dir, "delta.csv"), delta_csv.str());

  std::ostringstream ess_csv;
  ess_csv << "parameter,ess,degenerate\n";
  for (int32_t j = 0; j < axm_chain_cols(chain.h); ++j) {
    int32_t degen = 0;
    const double ess = axm_chain_ess(chain.h, j, &degen);
    if (ess < 0.0) fail(3, std::string("ess failed: ") + axm_last_error());
    ess_csv << axm_chain_name(chain.h, j) << ',' << g6(ess) << ',' << degen << '\n';
  }
  write_file(path_join(cfg.output_dir, "ess.csv"), ess_csv.str());

  std::ostringstream report;
  report << "law " << law_name << "\nresiduals " << aux << "\nnonfinite_terms " << nonfinite
         << "\nworst_abs_delta " << g6(worst) << " at obs " << obs[worst_row] << " slot "
         << slot[worst_row] << "\nalgorithm "
         << algorithm_label(axm_chain_algorithm(chain.h)) << '\n';
  write_file(path_join(cfg.output_dir, "report.txt"), report.str());
  std::printf("diagnose complete: %s\n", cfg.output_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"auxmix: Bayesian count-model sampling engine"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate the synthetic count regression dataset");
  std::string sim_output = "toy.csv";
  int sim_n = 500;
  double sim_c = 0.0;
  uint64_t sim_seed = 1;
  sim->add_option("--output", sim_output, "output CSV path");
  sim->add_option("--n", sim_n, "observations")->check(CLI::PositiveNumber);
  sim->add_option("--c", sim_c, "weight of the omitted covariate");
  sim->add_option("--seed", sim_seed, "random seed");

  // fit
  auto* fit = app.add_subcommand("fit", "run chains described by a config file");
  std::string fit_config;
  fit->add_option("--config", fit_config, "run configuration file")->required();

  // compare
  auto* cmp = app.add_subcommand("compare", "run several algorithms on one dataset");
  std::string cmp_data, cmp_output = "compare_out";
  std::string cmp_algs = "AMS,IAMS,MH-IAMS,RIAMS";
  bool cmp_no_oracle = false;
  long long cmp_iterations = 11000, cmp_burn = 1000, cmp_t1 = 500, cmp_t2 = 250;
  long long cmp_oracle_iterations = 60000, cmp_oracle_burn = 10000;
  uint64_t cmp_seed = 1;
  cmp->add_option("--data", cmp_data, "dataset CSV (columns y,x1[,x2])")->required();
  cmp->add_option("--output", cmp_output, "output directory");
  cmp->add_option("--algorithms", cmp_algs, "comma-separated algorithm list");
  cmp->add_flag("--no-oracle", cmp_no_oracle, "skip the exact-posterior reference");
  cmp->add_option("--iterations", cmp_iterations, "sweeps per chain including burn-in");
  cmp->add_option("--burn-in", cmp_burn, "burn-in sweeps");
  cmp->add_option("--t1", cmp_t1, "warm-up sweeps for adaptive variants");
  cmp->add_option("--t2", cmp_t2, "monitoring sweeps for adaptive variants");
  cmp->add_option("--seed", cmp_seed, "random seed");
  cmp->add_option("--oracle-iterations", cmp_oracle_iterations, "reference chain sweeps");
  cmp->add_option("--oracle-burn-in", cmp_oracle_burn, "reference chain burn-in");

  // diagnose
  auto* dia = app.add_subcommand("diagnose", "approximation and chain diagnostics");
  std::string dia_config, dia_law = "mixture";
  dia->add_option("--config", dia_config, "run configuration file")->required();
  dia->add_option("--law", dia_law, "law to score: mixture, adjusted, exact");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(sim_output, sim_n, sim_c, sim_seed);
    if (fit->parsed()) return cmd_fit(fit_config);
    if (cmp->parsed()) {
      return cmd_compare(cmp_data, cmp_output, cmp_algs, !cmp_no_oracle, cmp_iterations,
                         cmp_burn, cmp_t1, cmp_t2, cmp_seed, cmp_oracle_iterations,
                         cmp_oracle_burn);
    }
    if (dia->parsed()) return cmd_diagnose(dia_config, dia_law);
  } catch (const CliError& e) {
    std::fprintf(stderr, "error: %s\n", e.message.c_str());
    return e.code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 3;
  }
  return 0;
}
