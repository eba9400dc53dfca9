#include "qib/gen.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <string>

namespace qib {
namespace {

QuadForm zero_form(Eigen::Index nvars, Eigen::Index nblocks) {
    QuadForm f;
    f.diag = Eigen::VectorXd::Zero(nvars);
    f.linear = Eigen::VectorXd::Zero(nvars);
    f.indicator = Eigen::VectorXd::Zero(nblocks);
    return f;
}

Variable var(Index id, double lower, double upper, Index block) {
    Variable v;
    v.id = id;
    v.lower = lower;
    v.upper = upper;
    v.block = block;
    return v;
}

Constraint linear_eq(QuadForm form, double rhs) {
    Constraint c;
    c.kind = ConstraintKind::MixedInteger;
    c.sense = ConstraintSense::Equal;
    c.form = std::move(form);
    c.rhs = rhs;
    return c;
}

Constraint linear_le(QuadForm form, double rhs) {
    Constraint c;
    c.kind = ConstraintKind::MixedInteger;
    c.sense = ConstraintSense::LessEqual;
    c.form = std::move(form);
    c.rhs = rhs;
    return c;
}

Constraint comb_le(QuadForm form, double rhs) {
    Constraint c;
    c.kind = ConstraintKind::Combinatorial;
    c.sense = ConstraintSense::LessEqual;
    c.form = std::move(form);
    c.rhs = rhs;
    return c;
}

void singleton_blocks(Problem& p, Index count) {
    for (Index i = 0; i < count; ++i) {
        Block b;
        b.id = i;
        b.variables = {i};
        p.blocks.push_back(std::move(b));
    }
}

TreeDecomposition path_decomposition(std::vector<std::vector<Index>> bags) {
    TreeDecomposition td;
    for (std::size_t i = 0; i < bags.size(); ++i) {
        std::sort(bags[i].begin(), bags[i].end());
        td.nodes.push_back({static_cast<Index>(i), std::move(bags[i])});
        if (i > 0) td.edges.emplace_back(static_cast<Index>(i - 1), static_cast<Index>(i));
    }
    return td;
}

}  // namespace

GeneratedInstance gen_subsetsum_w3(const SubsetSumData& d) {
    const auto n = static_cast<Index>(d.a.size());
    if (n < 1) throw InvalidData("subset-sum: need at least one element");
    for (long long aj : d.a) {
        if (aj <= 1) throw InvalidData("subset-sum: elements must exceed 1");
    }
    if (d.a0 < 1) throw InvalidData("subset-sum: target must be positive");

    Problem p;
    const Index nv = 5 * n;  // per j: s1, s2, t1, t2, x
    for (Index j = 0; j < n; ++j) {
        const auto aj = static_cast<double>(d.a[static_cast<std::size_t>(j)]);
        p.variables.push_back(var(5 * j + 0, 0.0, 1.0, 5 * j + 0));
        p.variables.push_back(var(5 * j + 1, 0.0, 1.0, 5 * j + 1));
        p.variables.push_back(var(5 * j + 2, 0.0, 1.0, 5 * j + 2));
        p.variables.push_back(var(5 * j + 3, 0.0, 1.0, 5 * j + 3));
        p.variables.push_back(var(5 * j + 4, 0.0, aj + 1.0, 5 * j + 4));
    }
    singleton_blocks(p, nv);
    p.objective = zero_form(nv, nv);

    for (Index j = 0; j < n; ++j) {
        const auto aj = static_cast<double>(d.a[static_cast<std::size_t>(j)]);
        const Index s1 = 5 * j, s2 = 5 * j + 1, t1 = 5 * j + 2, t2 = 5 * j + 3, x = 5 * j + 4;
        QuadForm f = zero_form(nv, nv);
        f.linear[s1] = 1.0;
        f.linear[s2] = 1.0;
        p.constraints.push_back(linear_eq(std::move(f), 1.0));
        f = zero_form(nv, nv);
        f.linear[s1] = 1.0;
        f.linear[s2] = -(aj - 1.0);
        f.linear[x] = 1.0;
        p.constraints.push_back(linear_eq(std::move(f), 2.0));
        f = zero_form(nv, nv);
        f.linear[t1] = 1.0;
        f.linear[t2] = 1.0;
        p.constraints.push_back(linear_eq(std::move(f), 1.0));
        f = zero_form(nv, nv);
        f.linear[t1] = 1.0;
        f.linear[t2] = -(aj - 1.0);
        f.linear[x] = 1.0;
        p.constraints.push_back(linear_eq(std::move(f), 2.0));
    }
    QuadForm sum = zero_form(nv, nv);
    for (Index j = 0; j < n; ++j) sum.linear[5 * j + 4] = 1.0;
    p.constraints.push_back(linear_eq(std::move(sum), static_cast<double>(n + d.a0)));
    QuadForm card = zero_form(nv, nv);
    card.indicator.setOnes();
    p.constraints.push_back(comb_le(std::move(card), 3.0 * n));

    // Path of 3 bags per j; the global sum row and the cardinality row ride
    // in every bag.
    const Index rsum = 4 * n, rcard = 4 * n + 1;
    std::vector<std::vector<Index>> bags;
    for (Index j = 0; j < n; ++j) {
        bags.push_back({4 * j + 0, 4 * j + 1, rsum, rcard});
        bags.push_back({4 * j + 1, 4 * j + 3, rsum, rcard});
        bags.push_back({4 * j + 3, 4 * j + 2, rsum, rcard});
    }

    GeneratedInstance out;
    out.problem = validate_problem(p);
    out.decomposition = path_decomposition(std::move(bags));
    return out;
}

GeneratedInstance gen_2row(const SubsetSumData& d, const Eigen::VectorXd& dvec) {
    const auto n = static_cast<Index>(d.a.size());
    if (n < 1) throw InvalidData("2row: need at least one element");
    for (long long aj : d.a) {
        if (aj < 1) throw InvalidData("2row: elements must be positive");
    }
    if (d.a0 < 1) throw InvalidData("2row: target must be positive");
    if (d.cap < 1 || d.cap > n) throw InvalidData("2row: cap must be in [1, n]");
    Eigen::VectorXd w = dvec;
    if (w.size() == 0) w = Eigen::VectorXd::Ones(n);
    if (w.size() != n || w.minCoeff() < 0.0)
        throw InvalidData("2row: weight vector must be nonnegative of length n");

    Problem p;
    for (Index j = 0; j < n; ++j) p.variables.push_back(var(j, 0.0, 1.0, j));
    singleton_blocks(p, n);
    p.objective = zero_form(n, n);
    p.objective.diag = w;

    QuadForm f = zero_form(n, n);
    f.linear.setOnes();
    p.constraints.push_back(linear_eq(std::move(f), static_cast<double>(d.cap)));
    f = zero_form(n, n);
    for (Index j = 0; j < n; ++j)
        f.linear[j] = static_cast<double>(d.a[static_cast<std::size_t>(j)]);
    p.constraints.push_back(linear_eq(std::move(f), static_cast<double>(d.a0)));
    f = zero_form(n, n);
    f.indicator.setOnes();
    p.constraints.push_back(comb_le(std::move(f), static_cast<double>(d.cap)));

    GeneratedInstance out;
    out.problem = validate_problem(p);
    out.decomposition = path_decomposition({{0, 1, 2}});
    return out;
}

namespace {

void check_portfolio(const PortfolioData& d, bool longshort) {
    const auto n = d.u.size();
    const auto H = d.lambda.size();
    if (n < 1) throw InvalidData("portfolio: need at least one asset");
    if (d.u.minCoeff() <= 0.0) throw InvalidData("portfolio: bounds must be positive");
    if (H > 0 && (d.v.rows() != H || d.v.cols() != n))
        throw InvalidData("portfolio: eigenvector matrix must be H x n");
    if (H > 0 && d.lambda.minCoeff() <= 0.0)
        throw InvalidData("portfolio: eigenvalues must be positive");
    if (d.d.size() != n || d.d.minCoeff() < 0.0)
        throw InvalidData("portfolio: diagonal weights must be nonnegative of length n");
    if (d.mu.size() != n) throw InvalidData("portfolio: reward vector must have length n");
    const auto R = d.A.rows();
    if (R > 0 && d.A.cols() != n) throw InvalidData("portfolio: body matrix must be R x n");
    if (d.b.size() != R) throw InvalidData("portfolio: body rhs must have length R");
    if (d.cap < 0 || d.cap > (longshort ? 2 * n : n)) throw InvalidData("portfolio: bad cap");
    if (longshort) {
        if (d.u_minus.size() != n || d.u_minus.minCoeff() <= 0.0)
            throw InvalidData("portfolio: negative-part bounds must be positive of length n");
        if (d.A_minus.size() > 0 && (d.A_minus.rows() != R || d.A_minus.cols() != n))
            throw InvalidData("portfolio: negative-part body matrix must be R x n");
        if (d.cap_plus < 0 || d.cap_plus > n || d.cap_minus < 0 || d.cap_minus > n)
            throw InvalidData("portfolio: bad signed caps");
    }
}

}  // namespace

GeneratedInstance gen_portfolio(const PortfolioData& d) {
    check_portfolio(d, false);
    const Index n = static_cast<Index>(d.u.size());
    const Index H = static_cast<Index>(d.lambda.size());
    const Index R = static_cast<Index>(d.A.rows());
    const Index nv = n + H;

    Problem p;
    for (Index j = 0; j < n; ++j) p.variables.push_back(var(j, 0.0, d.u[j], j));
    for (Index h = 0; h < H; ++h) {
        const double s = d.v.row(h).cwiseAbs().dot(d.u);
        p.variables.push_back(var(n + h, -s, s, n + h));
    }
    singleton_blocks(p, nv);

    p.objective = zero_form(nv, nv);
    for (Index j = 0; j < n; ++j) {
        p.objective.diag[j] = d.d[j];
        p.objective.linear[j] = -d.mu[j];
    }
    for (Index h = 0; h < H; ++h) p.objective.diag[n + h] = d.lambda[h];

    for (Index r = 0; r < R; ++r) {
        QuadForm f = zero_form(nv, nv);
        for (Index j = 0; j < n; ++j) f.linear[j] = d.A(r, j);
        if (f.linear.cwiseAbs().sum() == 0.0) throw InvalidData("portfolio: zero body row");
        p.constraints.push_back(linear_le(std::move(f), d.b[r]));
    }
    for (Index h = 0; h < H; ++h) {
        QuadForm f = zero_form(nv, nv);
        for (Index j = 0; j < n; ++j) f.linear[j] = d.v(h, j);
        f.linear[n + h] = -1.0;
        p.constraints.push_back(linear_eq(std::move(f), 0.0));
    }
    QuadForm card = zero_form(nv, nv);
    for (Index j = 0; j < n; ++j) card.indicator[j] = 1.0;
    p.constraints.push_back(comb_le(std::move(card), static_cast<double>(d.cap)));

    std::vector<Index> all(static_cast<std::size_t>(R + H + 1));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);

    GeneratedInstance out;
    out.problem = validate_problem(p);
    out.decomposition = path_decomposition({std::move(all)});
    return out;
}

GeneratedInstance gen_portfolio_longshort(const PortfolioData& d) {
    check_portfolio(d, true);
    const Index n = static_cast<Index>(d.u.size());
    const Index H = static_cast<Index>(d.lambda.size());
    const Index R = static_cast<Index>(d.A.rows());
    const Index nv = 2 * n + H;
    const Eigen::MatrixXd Am = d.A_minus.size() > 0 ? d.A_minus : Eigen::MatrixXd(-d.A);

    Problem p;
    for (Index j = 0; j < n; ++j) p.variables.push_back(var(j, 0.0, d.u[j], j));
    for (Index j = 0; j < n; ++j) p.variables.push_back(var(n + j, 0.0, d.u_minus[j], n + j));
    for (Index h = 0; h < H; ++h) {
        const double s = d.v.row(h).cwiseAbs().dot(d.u.cwiseMax(d.u_minus));
        p.variables.push_back(var(2 * n + h, -s, s, 2 * n + h));
    }
    singleton_blocks(p, nv);

    p.objective = zero_form(nv, nv);
    for (Index j = 0; j < n; ++j) {
        p.objective.diag[j] = d.d[j];
        p.objective.diag[n + j] = d.d[j];
        p.objective.linear[j] = -d.mu[j];
        p.objective.linear[n + j] = d.mu[j];
    }
    for (Index h = 0; h < H; ++h) p.objective.diag[2 * n + h] = d.lambda[h];

    for (Index r = 0; r < R; ++r) {
        QuadForm f = zero_form(nv, nv);
        for (Index j = 0; j < n; ++j) {
            f.linear[j] = d.A(r, j);
            f.linear[n + j] = Am(r, j);
        }
        if (f.linear.cwiseAbs().sum() == 0.0) throw InvalidData("portfolio: zero body row");
        p.constraints.push_back(linear_le(std::move(f), d.b[r]));
    }
    for (Index h = 0; h < H; ++h) {
        QuadForm f = zero_form(nv, nv);
        for (Index j = 0; j < n; ++j) {
            f.linear[j] = d.v(h, j);
            f.linear[n + j] = -d.v(h, j);
        }
        f.linear[2 * n + h] = -1.0;
        p.constraints.push_back(linear_eq(std::move(f), 0.0));
    }
    for (Index j = 0; j < n; ++j) {
        QuadForm f = zero_form(nv, nv);
        f.indicator[j] = 1.0;
        f.indicator[n + j] = 1.0;
        p.constraints.push_back(comb_le(std::move(f), 1.0));
    }
    QuadForm cp = zero_form(nv, nv), cm = zero_form(nv, nv), call = zero_form(nv, nv);
    for (Index j = 0; j < n; ++j) {
        cp.indicator[j] = 1.0;
        cm.indicator[n + j] = 1.0;
        call.indicator[j] = 1.0;
        call.indicator[n + j] = 1.0;
    }
    p.constraints.push_back(comb_le(std::move(cp), static_cast<double>(d.cap_plus)));
    p.constraints.push_back(comb_le(std::move(cm), static_cast<double>(d.cap_minus)));
    p.constraints.push_back(comb_le(std::move(call), static_cast<double>(d.cap)));

    // Spine of body, eigen and the three cardinality rows; one bag per asset
    // adds its orthogonality row.
    std::vector<Index> spine;
    for (Index r = 0; r < R + H; ++r) spine.push_back(r);
    spine.push_back(R + H + n);
    spine.push_back(R + H + n + 1);
    spine.push_back(R + H + n + 2);
    std::vector<std::vector<Index>> bags;
    for (Index j = 0; j < n; ++j) {
        std::vector<Index> bag = spine;
        bag.push_back(R + H + j);
        bags.push_back(std::move(bag));
    }

    GeneratedInstance out;
    out.problem = validate_problem(p);
    out.decomposition = path_decomposition(std::move(bags));
    return out;
}

LdlFactors ldl_banded(const Eigen::MatrixXd& Q) {
    const auto n = Q.rows();
    if (n < 1 || Q.cols() != n) throw InvalidData("ldl: matrix must be square and nonempty");
    const Eigen::MatrixXd S = (Q + Q.transpose()) / 2.0;

    Eigen::Index band = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < i; ++j) {
            if (S(i, j) != 0.0) band = std::max(band, i - j);
        }
    }

    LdlFactors f;
    f.L = Eigen::MatrixXd::Identity(n, n);
    f.D = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double dj = S(j, j);
        for (Eigen::Index s = std::max<Eigen::Index>(0, j - band); s < j; ++s)
            dj -= f.L(j, s) * f.L(j, s) * f.D[s];
        if (dj <= 0.0) throw NotPositiveDefinite("nonpositive pivot at index " + std::to_string(j));
        f.D[j] = dj;
        for (Eigen::Index i = j + 1; i <= std::min(j + band, n - 1); ++i) {
            double lij = S(i, j);
            for (Eigen::Index s = std::max<Eigen::Index>(0, i - band); s < j; ++s)
                lij -= f.L(i, s) * f.L(j, s) * f.D[s];
            f.L(i, j) = lij / dj;
        }
    }
    return f;
}

GeneratedInstance gen_banded(const BandedData& d) {
    const auto n = d.Q.rows();
    if (n < 1 || d.Q.cols() != n) throw InvalidData("banded: matrix must be square and nonempty");
    if (d.c.size() != n || d.d.size() != n)
        throw InvalidData("banded: cost vectors must have length n");
    if (d.bandwidth < 0) throw InvalidData("banded: bandwidth must be nonnegative");
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (std::abs(i - j) > d.bandwidth && d.Q(i, j) != 0.0)
                throw InvalidData("banded: entry outside the stated bandwidth");
        }
    }

    const LdlFactors f = ldl_banded(d.Q);
    const Eigen::MatrixXd S = (d.Q + d.Q.transpose()) / 2.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
    const double lmin = es.eigenvalues().minCoeff();
    if (lmin <= 0.0) throw NotPositiveDefinite("matrix is not positive definite");

    // Any optimum obeys lmin*||x||^2 - ||c||*||x|| + sum_j min(d_j,0) <= 0
    // (the all-zero point has value 0), bounding ||x|| and hence every |x_j| by rho.
    const double cn = d.c.norm();
    double neg = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) neg += std::min(d.d[j], 0.0);
    const double rho = (cn + std::sqrt(cn * cn - 4.0 * lmin * neg)) / (2.0 * lmin);

    // The x boxes stay centered at 0 so that switching a block off keeps its
    // exact original meaning (x_j = 0).  The auxiliary y_j = (L^T x)_j, with
    // |y_j| <= rho * (1-norm of column j of L) =: rho_y[j], is emitted in
    // [0,1] coordinates via y_j = rho_y[j] * (2 y'_j - 1); that substitution
    // turns the row y_j - (L^T x)_j = 0 into one with a nonzero right-hand
    // side and adds linear y' terms plus a recorded constant to the objective.
    // Harmless for the optimum: a y block costs nothing and appears in no
    // combinatorial row, so keeping it on never hurts.
    const auto ni = static_cast<Index>(n);
    const Index nv = 2 * ni;
    Eigen::VectorXd rho_y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        double colnorm = 0.0;
        for (Eigen::Index i = j; i <= std::min<Eigen::Index>(j + d.bandwidth, n - 1); ++i)
            colnorm += std::abs(f.L(i, j));
        rho_y[j] = rho * colnorm;
    }

    Problem p;
    for (Index j = 0; j < ni; ++j) p.variables.push_back(var(j, rho == 0.0 ? 0.0 : -rho, rho, j));
    for (Index j = 0; j < ni; ++j)
        p.variables.push_back(var(ni + j, 0.0, rho_y[j] > 0.0 ? 1.0 : 0.0, ni + j));
    singleton_blocks(p, nv);

    double offset = 0.0;
    p.objective = zero_form(nv, nv);
    for (Index j = 0; j < ni; ++j) {
        const double ry = rho_y[j];
        p.objective.linear[j] = d.c[j];
        p.objective.diag[ni + j] = 4.0 * f.D[j] * ry * ry;
        p.objective.linear[ni + j] = -4.0 * f.D[j] * ry * ry;
        p.objective.indicator[j] = d.d[j];
        offset += f.D[j] * ry * ry;
    }

    for (Index j = 0; j < ni; ++j) {
        const double ry = rho_y[j];
        QuadForm form = zero_form(nv, nv);
        double sigma = 2.0 * ry;
        for (Eigen::Index i = j; i <= std::min<Eigen::Index>(j + d.bandwidth, n - 1); ++i) {
            form.linear[static_cast<Index>(i)] = f.L(i, j);
            sigma += std::abs(f.L(i, j));
        }
        form.linear[ni + j] = -2.0 * ry;
        form.linear /= sigma;
        p.constraints.push_back(linear_eq(std::move(form), -ry / sigma));
    }

    const Index k = std::min<Index>(static_cast<Index>(d.bandwidth), ni - 1);
    std::vector<std::vector<Index>> bags;
    for (Index s = 0; s <= ni - 1 - k; ++s) {
        std::vector<Index> bag;
        for (Index r = s; r <= s + k; ++r) bag.push_back(r);
        bags.push_back(std::move(bag));
    }

    GeneratedInstance out;
    out.problem = validate_problem(p);
    out.decomposition = path_decomposition(std::move(bags));
    out.objective_offset = offset;
    return out;
}

GeneratedInstance gen_truss(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                            const std::vector<std::vector<Index>>& blocks, long long cap,
                            const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    const auto n = A.cols();
    const auto R = A.rows();
    if (n < 1 || R < 1) throw InvalidData("truss: need at least one row and one column");
    if (b.size() != R) throw InvalidData("truss: rhs must have length R");
    if (lower.size() != n || upper.size() != n)
        throw InvalidData("truss: bounds must have length n");
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]) || lower[j] > upper[j])
            throw InvalidData("truss: bounds must be finite with lower <= upper");
    }
    if (blocks.empty()) throw InvalidData("truss: need at least one block");
    if (cap < 0 || cap > static_cast<long long>(blocks.size()))
        throw InvalidData("truss: bad cap");

    const auto nb = static_cast<Index>(blocks.size());
    std::vector<Index> owner(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < nb; ++i) {
        for (Index j : blocks[static_cast<std::size_t>(i)]) {
            if (j < 0 || j >= n || owner[static_cast<std::size_t>(j)] != -1)
                throw InvalidData("truss: blocks must partition the variables");
            owner[static_cast<std::size_t>(j)] = i;
        }
    }
    for (Index o : owner) {
        if (o < 0) throw InvalidData("truss: blocks must partition the variables");
    }

    Problem p;
    for (Index j = 0; j < static_cast<Index>(n); ++j)
        p.variables.push_back(var(j, lower[j], upper[j], owner[static_cast<std::size_t>(j)]));
    for (Index i = 0; i < nb; ++i) {
        Block blk;
        blk.id = i;
        blk.variables = blocks[static_cast<std::size_t>(i)];
        p.blocks.push_back(std::move(blk));
    }
    p.objective = zero_form(n, nb);
    p.objective.diag.setOnes();

    for (Eigen::Index r = 0; r < R; ++r) {
        QuadForm f = zero_form(n, nb);
        for (Eigen::Index j = 0; j < n; ++j) f.linear[j] = A(r, j);
        if (f.linear.cwiseAbs().sum() == 0.0) throw InvalidData("truss: zero coefficient row");
        p.constraints.push_back(linear_eq(std::move(f), b[r]));
    }
    QuadForm card = zero_form(n, nb);
    card.indicator.setOnes();
    p.constraints.push_back(comb_le(std::move(card), static_cast<double>(cap)));

    std::vector<Index> all(static_cast<std::size_t>(R + 1));
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Index>(i);

    GeneratedInstance out;
    out.problem = validate_problem(p);
    out.decomposition = path_decomposition({std::move(all)});
    return out;
}

}  // namespace qib
