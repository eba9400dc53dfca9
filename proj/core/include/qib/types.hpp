#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace qib {

/// Index type used for variables, blocks, constraints and decomposition nodes.
using Index = std::int32_t;

/// Numerical tolerances shared across the solver stack.  Defaults are chosen
/// for instances whose coefficients are O(1) after normalization; each field
/// can be overridden through the QIB_* environment variables (see
/// tolerances_from_env).
struct Tolerances {
    /// Symmetric matrices with smallest eigenvalue >= -psd_tol count as PSD.
    double psd_tol = 1e-9;
    /// Constraint violations up to feas_tol are treated as feasible.
    double feas_tol = 1e-8;
    /// Objective values within val_tol of each other are considered equal.
    double val_tol = 1e-7;
    /// Maximum acceptable KKT residual for an interior-point optimum.
    double kkt_tol = 1e-6;
    /// Slack granted when testing discretized consistency conditions.
    double cons_tol = 1e-9;
};

/// Reads QIB_PSD_TOL, QIB_FEAS_TOL, QIB_VAL_TOL, QIB_KKT_TOL and
/// QIB_CONS_TOL from the environment; unset variables keep their defaults.
Tolerances tolerances_from_env();

/// A problem failed structural validation.  `violations` lists every problem
/// found, one human-readable message each.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

  private:
    std::vector<std::string> violations_;
};

/// A variable has an infinite bound, so the [0,1] rescaling is undefined.
class UnboundedVariable : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A supplied tree decomposition does not cover the intersection graph.
class InvalidDecomposition : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// The interior-point iteration exceeded its budget or lost positive
/// definiteness beyond recovery.
class NumericalFailure : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A matrix expected to be positive (semi)definite is not.
class NotPositiveDefinite : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Generator input data is malformed (wrong sizes, non-positive entries, ...).
class InvalidData : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Exact enumeration was requested on an instance above the size guard.
class TooLarge : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A candidate solution sets x != 0 inside a block whose indicator is 0.
class IndicatorViolation : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A dynamic-programming back-pointer refers to a missing state.
class CorruptTable : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

}  // namespace qib
