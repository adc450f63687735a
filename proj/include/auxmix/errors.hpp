#pragma once

#include <stdexcept>
#include <string>

namespace auxmix {

// Contract violations (bad shapes, out-of-domain arguments, malformed
// configuration) throw std::invalid_argument / std::domain_error directly.
// NumericalError covers failures that arise during otherwise valid
// computations: factorizations that stay indefinite through the jitter
// ladder, optimizers that exhaust their budget, overflow that poisons a
// result. The message carries enough context to locate the failing piece.
class NumericalError : public std::runtime_error {
public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace auxmix
