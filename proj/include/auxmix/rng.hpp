#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace auxmix {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// One stream per chain. Substreams are derived by mixing the master seed with
// the substream index, so chains launched from one seed never share state and
// the draw sequence depends only on (seed, index) — reruns are bit-identical.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RngStream substream(std::uint64_t master, std::uint64_t index) {
    return RngStream(splitmix64(master ^ splitmix64(index)));
  }

  std::uint64_t raw() { return engine_(); }

  // Strictly inside (0, 1): the offset keeps log(u) and log1p(-u) finite.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    std::normal_distribution<double> d;
    return d(engine_);
  }

  double exponential() { return -std::log(uniform()); }

  // Gamma(shape, 1).
  double gamma(double shape) {
    std::gamma_distribution<double> d(shape, 1.0);
    return d(engine_);
  }

  // Beta(y, 1) via the inverse CDF u^(1/y); exact and one uniform per draw.
  double beta_y1(double y) { return std::pow(uniform(), 1.0 / y); }

  long long poisson(double mean) {
    std::poisson_distribution<long long> d(mean);
    return d(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

private:
  std::mt19937_64 engine_;
};

}  // namespace auxmix
