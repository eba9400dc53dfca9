#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qib/types.hpp"

namespace qib {

/// Sentinel magnitude for an absent linear-row bound (use -kNoBound for a
/// missing lower bound).
inline constexpr double kNoBound = 1e299;

/// One convex quadratic inequality row  x' Q x + a' x <= rhs.
/// Q must be PSD; a 0x0 Q means the row is linear.
struct QcqpRow {
    Eigen::MatrixXd Q;
    Eigen::VectorXd a;
    double rhs = 0.0;
};

/// A linear row with both bounds, lo <= a' x <= hi.  Rows whose width
/// hi - lo is below 1e-7 are treated as equalities and eliminated exactly.
struct QcqpLinearRow {
    Eigen::VectorXd a;
    double lo = 0.0;
    double hi = 0.0;
};

/// Box-constrained convex QCQP:
///   minimize    x' P x + q' x + r
///   subject to  quadratic rows, two-sided linear rows, 0 <= x <= upper.
struct BlockQcqp {
    Eigen::MatrixXd P;  ///< PSD; 0x0 allowed when dim()==0 or objective is linear
    Eigen::VectorXd q;
    double r = 0.0;
    Eigen::VectorXd upper;  ///< finite, nonnegative
    std::vector<QcqpRow> rows;
    std::vector<QcqpLinearRow> linear_rows;

    Eigen::Index dim() const { return upper.size(); }
};

enum class QcqpStatus { Optimal, Infeasible };

struct QcqpResult {
    QcqpStatus status = QcqpStatus::Infeasible;
    Eigen::VectorXd x;  ///< clipped to the box; best attempt when infeasible
    double value = 0.0;
    /// Largest constraint violation at x (positive only when infeasible).
    double max_violation = 0.0;
    /// Max KKT residual at x (stationarity projected onto the nullspace of
    /// eliminated equality rows, complementarity, dual feasibility).
    double kkt_residual = 0.0;
    int newton_iterations = 0;

    // Inequality multipliers.  Rows eliminated as equalities carry zeros;
    // their effect is absorbed into the nullspace projection of the
    // stationarity test.
    std::vector<double> row_multipliers;        ///< per quadratic row
    std::vector<double> linear_lo_multipliers;  ///< per linear row, lower side
    std::vector<double> linear_hi_multipliers;  ///< per linear row, upper side
    Eigen::VectorXd box_lower_multipliers;
    Eigen::VectorXd box_upper_multipliers;
};

struct QcqpOptions {
    double feas_tol = 1e-8;
    double mu_initial = 1.0;
    double mu_final = 1e-11;
    double mu_factor = 0.1;
    /// Newton iteration budget per barrier stage; NumericalFailure beyond.
    int max_newton = 200;
};

/// Log-barrier path-following with damped Newton steps.  Equality rows are
/// eliminated through an orthonormal nullspace basis first; feasibility is
/// certified by an internal relaxation stage, after which the constraints are
/// tightened back to within 1e-9 + the certified violation.  Deterministic.
/// Throws NumericalFailure if the iteration budget is exhausted.
QcqpResult solve(const BlockQcqp& q, const QcqpOptions& opts = {});

/// Feasibility subproblem: minimize t such that every constraint row holds
/// relaxed by t, with t floored at -1.  The box stays hard whenever a
/// box-interior start exists (always true without equality rows); with
/// equality rows the box is relaxed alongside the constraints.  An empty
/// constraint list short-circuits to t = 0 at the box center.  t <= feas_tol
/// certifies feasibility of the original system.
struct Phase1Result {
    Eigen::VectorXd x;
    double t = 0.0;
};
Phase1Result phase1(const BlockQcqp& q, const QcqpOptions& opts = {});

/// Recomputes the KKT residual of `result` against `q` from scratch:
/// max of projected stationarity, complementarity products, dual
/// infeasibility and constraint violation.
double kkt_residual(const BlockQcqp& q, const QcqpResult& result);

}  // namespace qib
