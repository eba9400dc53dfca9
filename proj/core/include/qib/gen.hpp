#pragma once

#include <Eigen/Dense>
#include <vector>

#include "qib/graph.hpp"
#include "qib/model.hpp"
#include "qib/types.hpp"

namespace qib {

/// Subset-sum input: positive integers a (each > 1), target a0, size cap.
struct SubsetSumData {
    std::vector<long long> a;
    long long a0 = 0;
    long long cap = 0;  ///< N; unused by the staircase reduction
};

/// Factor-model portfolio input.  H = lambda.size() eigenpairs, n assets.
struct PortfolioData {
    Eigen::VectorXd lambda;  ///< H positive eigenvalues
    Eigen::MatrixXd v;       ///< H x n eigenvector rows
    Eigen::VectorXd d;       ///< n nonnegative diagonal objective weights
    Eigen::VectorXd mu;      ///< n linear reward coefficients
    Eigen::MatrixXd A;       ///< R x n body rows (R may be 0)
    Eigen::VectorXd b;       ///< R right-hand sides
    Eigen::VectorXd u;       ///< n positive upper bounds
    long long cap = 0;       ///< N
    // Long-short extension (gen_portfolio_longshort only).
    Eigen::VectorXd u_minus;  ///< bounds of the negative parts
    Eigen::MatrixXd A_minus;  ///< body coefficients of the negative parts; -A when empty
    long long cap_plus = 0;   ///< N+
    long long cap_minus = 0;  ///< N-
};

/// Banded-objective input: Q positive definite with Q_ij = 0 for |i-j| > k.
struct BandedData {
    Eigen::MatrixXd Q;
    Eigen::VectorXd c;  ///< linear objective on x
    Eigen::VectorXd d;  ///< indicator costs
    int bandwidth = 0;
};

/// Generator output: the instance, a companion decomposition of its
/// constraint intersection graph, and the constant dropped from the
/// objective when the generator rescaled variables (original-formulation
/// value = instance value + objective_offset).
struct GeneratedInstance {
    Problem problem;
    TreeDecomposition decomposition;
    double objective_offset = 0.0;
};

/// Staircase feasibility reduction: 5n singleton blocks (s1j, s2j, t1j, t2j,
/// xj), per j four linear equality rows (pair sums = 1, staircase rows = 2),
/// one global sum row = n + a0, and one combinatorial row capping the number
/// of active blocks at 3n.  Feasible iff some subset of a sums to a0.
GeneratedInstance gen_subsetsum_w3(const SubsetSumData& d);

/// Two-equality-row reduction: n singleton blocks, objective sum dvec_j x_j^2
/// (all-ones when dvec is empty), rows sum x = cap and sum a_j x_j = a0,
/// combinatorial row capping active blocks at cap.  Optimum <= cap iff an
/// exactly-cap subset of a sums to a0 (with unit dvec).
GeneratedInstance gen_2row(const SubsetSumData& d, const Eigen::VectorXd& dvec = {});

/// Factor-model portfolio: n singleton x-blocks and H singleton y-blocks
/// (fresh indicators appearing in no constraint), body rows Ax <= b, equality
/// rows v_h . x - y_h = 0, cardinality sum z_x <= cap.  y_h bounds are the
/// 1-norm bounds sum_j |v_hj| u_j.
GeneratedInstance gen_portfolio(const PortfolioData& d);

/// Long-short variant: positive and negative part blocks per asset, body
/// rows A(x+ - x-) <= b, eigen rows v_h . (x+ - x-) - y_h = 0, per-asset
/// orthogonality rows z+_j + z-_j <= 1, and three cardinality rows
/// (positives <= cap_plus, negatives <= cap_minus, all <= cap).
GeneratedInstance gen_portfolio_longshort(const PortfolioData& d);

/// Root-free LDL^T factorization preserving bandwidth: Q = L D L^T with L
/// unit-lower-triangular, bandwidth(L) <= bandwidth(Q), D positive diagonal.
/// Throws NotPositiveDefinite when a pivot is not positive.
struct LdlFactors {
    Eigen::MatrixXd L;
    Eigen::VectorXd D;
};
LdlFactors ldl_banded(const Eigen::MatrixXd& Q);

/// Banded-objective reformulation: from min d'z + c'x + x'Qx (x free, z_j = 0
/// forcing x_j = 0), bound |x_j| <= rho via the objective upper bound 0 at
/// (x, z) = 0, factor Q = L D L^T, and introduce y = L^T x with
/// fresh-indicator blocks so the objective becomes sum_j D_j y_j^2 + c'x.
/// The x boxes stay centered at 0 ([-rho, rho]) so an off block keeps its
/// exact original meaning and instance optima match the original
/// formulation's optima plus objective_offset.  The y variables are emitted
/// in [0,1] (y_j = rho_y_j (2 y'_j - 1)), which gives the substitution rows
/// nonzero right-hand sides and unit coefficient 1-norm and moves a constant
/// into objective_offset; a y block costs nothing and sits in no
/// combinatorial row, so the reparametrization never changes the optimum.
/// Companion decomposition: bags of bandwidth+1 consecutive rows.
GeneratedInstance gen_banded(const BandedData& d);

/// Linear-equality design problem: objective sum x_j^2, rows Ax = b, caller
/// supplied blocks and finite bounds, cardinality sum z <= cap.
GeneratedInstance gen_truss(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const std::vector<std::vector<Index>>& blocks, long long cap,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

}  // namespace qib
