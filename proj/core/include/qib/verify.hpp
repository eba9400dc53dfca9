#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "qib/epsilon.hpp"
#include "qib/model.hpp"
#include "qib/types.hpp"

namespace qib {

/// Feasibility audit of a candidate (x, z) against a problem.
struct CheckReport {
    /// slack[r] = rhs - lhs per constraint (for equalities: rhs - lhs signed).
    std::vector<double> slack;
    /// Largest violation among mixed-integer rows (0 if none).
    double max_mixed_infeasibility = 0.0;
    /// max_r |incident blocks of r| * eps over mixed rows: the a-priori cap
    /// on mixed-row violation for solutions produced by the solver.
    double guarantee_bound = 0.0;
    /// Whether every combinatorial row holds exactly (integer arithmetic).
    bool combinatorial_feasible = false;
    /// max_mixed_infeasibility <= guarantee_bound + feas_tol and
    /// combinatorial_feasible.
    bool within_bound = false;
    double objective = 0.0;
};

/// Audits (x, z).  Preconditions checked with tolerance 1e-9: x within
/// bounds, z binary; z_i = 0 blocks must have x[i] = 0 (IndicatorViolation
/// otherwise); forced-on blocks must have z_i = 1.  Throws
/// std::invalid_argument for malformed inputs.
CheckReport check_solution(const Problem& problem, const Eigen::VectorXd& x,
                           const Eigen::VectorXi& z, Epsilon eps, const Tolerances& tol = {});

struct OracleOptions {
    Tolerances tol;
    /// Stop at the first feasible pattern instead of scanning all of them
    /// (useful when only feasibility matters).
    bool stop_at_first_feasible = false;
    /// Worker threads for the pattern scan; results are reduced
    /// deterministically (value first, then pattern counter order).
    int threads = 1;
};

enum class OracleStatus { Optimal, Infeasible };

/// Ground-truth solution by exhausting all 2^|blocks| indicator patterns and
/// solving the continuous restriction of each.  Guarded to at most 20 blocks
/// (TooLarge beyond).  Patterns failing a cheap interval bound or an exact
/// combinatorial check are pruned without a continuous solve.
struct OracleResult {
    OracleStatus status = OracleStatus::Infeasible;
    Eigen::VectorXd x;
    Eigen::VectorXi z;
    double value = 0.0;
    std::size_t patterns_examined = 0;
    std::size_t continuous_solves = 0;
};
OracleResult oracle_solve(const Problem& problem, const OracleOptions& opts = {});

/// Verdict on a solver value against the oracle: when the oracle found an
/// optimum, the solver must be feasible-per-report and must not exceed the
/// oracle value by more than #blocks * val_tol (it may be lower — rounding
/// admits superoptimal values).  An infeasible oracle imposes nothing.
struct ComparisonVerdict {
    bool pass = false;
    std::string reason;
};
ComparisonVerdict compare(std::optional<double> solver_value, const OracleResult& oracle,
                          Index num_blocks, const Tolerances& tol = {});

}  // namespace qib
