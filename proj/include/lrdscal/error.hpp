#pragma once

#include <stdexcept>
#include <string>

namespace lrdscal {

/// Coarse classification of failures, used by the CLI to pick an exit code.
enum class ErrorKind {
  domain,              // argument outside the mathematical domain
  invalid_input,       // malformed or inconsistent input
  insufficient_data,   // not enough samples for the requested scale
  invalid_config,      // configuration that cannot be executed
  assumption_violated, // model hypotheses of the limit theorems fail
  unsupported_regime,  // expansion shape outside the covered theorem families
  numeric,             // quadrature / Monte Carlo failure
  schema,              // persisted data does not match the expected layout
  dependency,          // a required precomputed quantity is missing
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::domain: return "domain";
    case ErrorKind::invalid_input: return "invalid_input";
    case ErrorKind::insufficient_data: return "insufficient_data";
    case ErrorKind::invalid_config: return "invalid_config";
    case ErrorKind::assumption_violated: return "assumption_violated";
    case ErrorKind::unsupported_regime: return "unsupported_regime";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::schema: return "schema";
    case ErrorKind::dependency: return "dependency";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Quadrature or sampling failure; carries the achieved error estimate.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved)
      : Error(ErrorKind::numeric, what), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace lrdscal
