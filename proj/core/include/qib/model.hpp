#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "qib/types.hpp"

namespace qib {

/// A continuous decision variable.  Bounds are inclusive; `block` is the id of
/// the indicator block the variable belongs to.
struct Variable {
    Index id = 0;
    double lower = 0.0;
    double upper = 1.0;
    Index block = 0;
};

/// A group of variables switched on and off together by one binary indicator.
/// When the indicator is 0 every member variable must be exactly 0.
struct Block {
    Index id = 0;
    std::vector<Index> variables;  ///< member ids; defines matrix ordering
};

/// Per-block quadratic term of a form: x_B' * matrix * x_B, with rows/columns
/// ordered like Block::variables.  Matrices are symmetrized on validation.
struct BlockQuad {
    Index block = 0;
    Eigen::MatrixXd matrix;
};

/// A block-separable quadratic form
///   sum_i x[i]' Q_i x[i] + sum_j d_j x_j^2 + sum_j c_j x_j + sum_i v_i z_i.
/// `diag` and `linear` are indexed by variable id, `indicator` by block id.
/// Empty vectors mean all-zero.
struct QuadForm {
    std::vector<BlockQuad> quad;
    Eigen::VectorXd diag;
    Eigen::VectorXd linear;
    Eigen::VectorXd indicator;
};

enum class ConstraintKind {
    MixedInteger,   ///< convex quadratic in x plus a linear indicator term
    Combinatorial,  ///< indicators only, coefficients in {-1, 0, +1}
};

enum class ConstraintSense {
    LessEqual,
    Equal,  ///< only purely linear mixed-integer rows may be equalities
};

struct Constraint {
    ConstraintKind kind = ConstraintKind::MixedInteger;
    ConstraintSense sense = ConstraintSense::LessEqual;
    QuadForm form;
    double rhs = 0.0;
};

/// A block-indicator problem: minimize a convex quadratic objective subject to
/// mixed-integer and combinatorial rows, with x[i] forced to 0 whenever
/// z_i = 0.  Fields below `warnings` are caches populated by
/// validate_problem; they are not serialized.
struct Problem {
    std::vector<Variable> variables;
    std::vector<Block> blocks;
    std::vector<Constraint> constraints;
    QuadForm objective;

    /// Blocks whose indicator is pinned to 1 (set by normalize when a fixed
    /// variable with nonzero value lives in the block).  Empty means none.
    std::vector<std::uint8_t> forced_on;
    /// Set by normalize when variable fixing turns some row into an
    /// unsatisfiable constant; such an instance has no feasible point.
    bool trivially_infeasible = false;
    /// Non-fatal issues found during validation (e.g. floored rhs values).
    std::vector<std::string> warnings;

    // --- caches (populated by validate_problem) ---
    /// incidence[r]: sorted ids of blocks appearing in constraint r.
    std::vector<std::vector<Index>> incidence;
    /// block_of[j]: block id of variable j.
    std::vector<Index> block_of;
    /// position_in_block[j]: index of variable j inside its block's list.
    std::vector<Index> position_in_block;
    bool validated = false;

    Index num_variables() const { return static_cast<Index>(variables.size()); }
    Index num_blocks() const { return static_cast<Index>(blocks.size()); }
    Index num_constraints() const { return static_cast<Index>(constraints.size()); }
    bool block_forced_on(Index i) const {
        return !forced_on.empty() && forced_on[static_cast<std::size_t>(i)] != 0;
    }
};

/// Invertible record of what normalize did, sufficient to map points and
/// objective values between the original and the normalized instance.
struct NormalizationTransform {
    /// x_orig[j] = shift[j] + scale[j] * x_norm[to_normalized[j]]; fixed
    /// variables have scale 0 and to_normalized -1.
    Eigen::VectorXd shift;
    Eigen::VectorXd scale;
    std::vector<Index> to_normalized;  ///< original id -> normalized id or -1
    std::vector<Index> to_original;    ///< normalized id -> original id
    /// constraint_scale[s]: factor the normalized row s was divided by.
    std::vector<double> constraint_scale;
    /// constraint_map[s]: original index of normalized row s (vacuously true
    /// rows are dropped during normalization).
    std::vector<Index> constraint_map;
    /// objective_orig(x) = objective_norm(x') + objective_offset.
    double objective_offset = 0.0;
};

struct NormalizedProblem {
    Problem problem;
    NormalizationTransform transform;
};

/// Checks structural well-formedness: contiguous ids, consistent block
/// membership, bound ordering, PSD quadratic terms, nonnegative diagonals,
/// combinatorial coefficient integrality, equality rows purely linear, and
/// nonempty incidence per row.  Returns a copy with symmetrized matrices,
/// zero-padded form vectors and incidence caches filled in.  Non-integral
/// combinatorial right-hand sides are floored and reported in `warnings`.
/// Throws ValidationError listing every violation found.
Problem validate_problem(const Problem& problem, const Tolerances& tol = {});

/// Rescales a validated problem so that every variable ranges over [0,1]
/// (fixed variables are substituted out) and every mixed-integer row has
/// coefficient 1-norm exactly 1.  The transform returned maps solutions back.
/// Throws UnboundedVariable if any bound is infinite.
NormalizedProblem normalize(const Problem& problem, const Tolerances& tol = {});

/// Left-hand side of constraint r at (x, z): quadratic + diagonal + linear
/// terms in x plus the indicator term.  x is indexed by variable id, z by
/// block id.
double evaluate_constraint(const Problem& problem, Index r, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& z);

/// Objective value at (x, z), including indicator costs.
double evaluate_objective(const Problem& problem, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& z);

/// Maps a point of the normalized instance back to original coordinates and
/// adds the objective offset back onto the value.
struct DenormalizedSolution {
    Eigen::VectorXd x;
    double objective = 0.0;
};
DenormalizedSolution denormalize_solution(const NormalizationTransform& transform,
                                          const Eigen::VectorXd& x_norm, double objective_norm);

/// Inverse of denormalize_solution on points: maps original coordinates into
/// the normalized space (fixed variables are dropped).
Eigen::VectorXd normalize_point(const NormalizationTransform& transform,
                                const Eigen::VectorXd& x_orig);

namespace detail {
/// Evaluates an arbitrary block-separable form against (x, z).
double evaluate_form(const Problem& problem, const QuadForm& form, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& z);
/// 1-norm of the continuous + indicator coefficients of a form, the quantity
/// normalized mixed rows pin to 1.
double coefficient_norm(const QuadForm& form);
}  // namespace detail

}  // namespace qib
