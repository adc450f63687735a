#include "auxmix/simulate.hpp"

#include "auxmix/errors.hpp"
#include "auxmix/rng.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace auxmix {

ToyData simulate_toy(int n, double c, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("simulate_toy: need at least one observation");
  if (!std::isfinite(c)) throw std::invalid_argument("simulate_toy: covariate weight not finite");
  RngStream rng(seed);
  ToyData d;
  d.y.resize(n);
  d.x1.resize(n);
  d.x2.resize(n);
  for (int i = 0; i < n; ++i) {
    d.x1[i] = rng.normal();
    d.x2[i] = rng.normal();
    d.y[i] = static_cast<int>(rng.poisson(std::exp(0.1 + d.x1[i] + c * d.x2[i])));
  }
  return d;
}

void write_toy_csv(const ToyData& data, std::ostream& os) {
  os << "y,x1,x2\n";
  char line[96];
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::snprintf(line, sizeof line, "%d,%.17g,%.17g\n", data.y[i], data.x1[i], data.x2[i]);
    os << line;
  }
}

ToyData read_toy_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != "y,x1,x2") {
    throw IoError("toy dataset: expected header 'y,x1,x2'");
  }
  std::vector<int> y;
  std::vector<double> x1, x2;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    const long yi = std::strtol(p, &end, 10);
    if (end == p || *end != ',' || yi < 0) throw IoError("toy dataset: malformed count in '" + line + "'");
    p = end + 1;
    const double a = std::strtod(p, &end);
    if (end == p || *end != ',') throw IoError("toy dataset: malformed x1 in '" + line + "'");
    p = end + 1;
    const double b = std::strtod(p, &end);
    if (end == p || *end != '\0') throw IoError("toy dataset: malformed x2 in '" + line + "'");
    y.push_back(static_cast<int>(yi));
    x1.push_back(a);
    x2.push_back(b);
  }
  if (y.empty()) throw IoError("toy dataset: no rows");
  ToyData d;
  d.y = Eigen::Map<const Eigen::VectorXi>(y.data(), static_cast<Eigen::Index>(y.size()));
  d.x1 = Eigen::Map<const Eigen::VectorXd>(x1.data(), static_cast<Eigen::Index>(x1.size()));
  d.x2 = Eigen::Map<const Eigen::VectorXd>(x2.data(), static_cast<Eigen::Index>(x2.size()));
  return d;
}

PoissonLgm toy_regression(const ToyData& data, bool include_x2, double prior_var) {
  if (!(prior_var > 0.0) || !std::isfinite(prior_var)) {
    throw std::invalid_argument("toy_regression: prior variance must be positive and finite");
  }
  PoissonLgm m;
  m.y = data.y;
  m.t = Eigen::VectorXd::Ones(data.n());
  const Eigen::Index p = include_x2 ? 3 : 2;
  m.X.resize(data.n(), p);
  m.X.col(0).setOnes();
  m.X.col(1) = data.x1;
  if (include_x2) m.X.col(2) = data.x2;
  m.V0 = Eigen::MatrixXd::Identity(p, p) * prior_var;
  return m;
}

}  // namespace auxmix
