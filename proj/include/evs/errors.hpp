#pragma once

#include <stdexcept>
#include <string>

namespace evs {

/// Invalid run configuration (grid sizes, parameter ranges, malformed init specs).
/// CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite or out-of-domain numeric input to a kernel.
struct DomainError : std::runtime_error {
    explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// A documented precondition of an operation was violated by the caller.
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

/// The per-step inner solver failed to certify within its iteration budget.
/// Carries the best residual seen so the caller can report it. CLI exit code 3.
struct StepError : std::runtime_error {
    double best_residual;
    int iterations;
    StepError(const std::string& what, double best, int iters)
        : std::runtime_error(what), best_residual(best), iterations(iters) {}
};

}  // namespace evs
