#pragma once

#include <stdexcept>
#include <string>

namespace sace {

// Error categories map one-to-one onto CLI exit codes and C API status codes.
enum class ErrorCategory {
  kInput = 2,
  kFit = 3,
  kVariance = 4,
  kConfig = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string message)
      : std::runtime_error(std::move(message)), category_(category) {}
  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

struct InputError : Error {
  explicit InputError(std::string m) : Error(ErrorCategory::kInput, std::move(m)) {}
};

struct FitError : Error {
  explicit FitError(std::string m) : Error(ErrorCategory::kFit, std::move(m)) {}
};

struct VarianceError : Error {
  explicit VarianceError(std::string m) : Error(ErrorCategory::kVariance, std::move(m)) {}
};

struct ConfigError : Error {
  explicit ConfigError(std::string m) : Error(ErrorCategory::kConfig, std::move(m)) {}
};

// Point-estimation failures (zero denominators, positivity) surface through
// the fit exit code; they abort an analysis the same way a failed fit does.
struct EstimationError : Error {
  explicit EstimationError(std::string m) : Error(ErrorCategory::kFit, std::move(m)) {}
};

// Quadrature failures: mode search not converging, non-concave integrand,
// NaN at a node. Callers in the variance path re-wrap with cluster context.
struct IntegrationError : Error {
  explicit IntegrationError(std::string m) : Error(ErrorCategory::kFit, std::move(m)) {}
};

}  // namespace sace
