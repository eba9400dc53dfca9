#include "qib/qcqp.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace qib {

namespace {

constexpr double kEqualityCollapse = 1e-7;  // two-sided width below this -> equality
constexpr double kFixedVarTol = 1e-12;      // upper bound below this -> variable pinned to 0
constexpr double kRelaxMargin = 1e-9;       // slack added after the feasibility stage
constexpr double kInterior = 1e-6;          // margin certifying a strictly feasible start

/// Multiplier slot a reduced row reports into.
struct Tag {
    enum Type { QuadRow, LinearLo, LinearHi, BoxUpper, BoxLower } type = QuadRow;
    Eigen::Index index = 0;
};

/// Reduced one-sided row  y' Q y + a' y <= rhs  (Q empty for linear rows).
struct RRow {
    Eigen::MatrixXd Q;
    Eigen::VectorXd a;
    double rhs = 0.0;
    Tag tag;
};

double row_value(const RRow& row, const Eigen::VectorXd& y) {
    double v = row.a.dot(y);
    if (row.Q.size() > 0) v += y.dot(row.Q * y);
    return v;
}

Eigen::VectorXd row_gradient(const RRow& row, const Eigen::VectorXd& y) {
    if (row.Q.size() > 0) return 2.0 * (row.Q * y) + row.a;
    return row.a;
}

double quad_value(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, double r,
                  const Eigen::VectorXd& x) {
    double v = q.dot(x) + r;
    if (P.size() > 0) v += x.dot(P * x);
    return v;
}

/// Equality elimination + reduction of every one-sided row to y-space, where
/// x = xp + N y with N an orthonormal nullspace basis of the equality rows.
struct Canonical {
    Eigen::Index dim = 0;
    Eigen::Index ny = 0;
    Eigen::MatrixXd N;
    Eigen::VectorXd xp;
    bool has_equalities = false;
    bool consistent = true;
    double eq_residual = 0.0;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    Eigen::MatrixXd P;  // reduced objective
    Eigen::VectorXd q;
    double r = 0.0;
    std::vector<RRow> rows;  // non-constant reduced rows, box included
    /// Worst violation among rows that reduced to constants (no y left).
    double constant_violation = 0.0;
};

Canonical canonicalize(const BlockQcqp& problem, const QcqpOptions& opts) {
    Canonical can;
    const Eigen::Index dim = problem.dim();
    can.dim = dim;

    std::vector<std::pair<Eigen::VectorXd, double>> eqs;
    for (const auto& row : problem.linear_rows)
        if (row.hi - row.lo <= kEqualityCollapse) {
            const double b = (row.lo + row.hi) / 2.0;
            // A row with no effective coefficients is a constant: record its
            // residual instead of feeding a zero row to the factorizations.
            if (row.a.size() == 0 || row.a.cwiseAbs().maxCoeff() <= 1e-12)
                can.constant_violation = std::max(can.constant_violation, std::abs(b));
            else
                eqs.emplace_back(row.a, b);
        }
    for (Eigen::Index j = 0; j < dim; ++j)
        if (problem.upper[j] <= kFixedVarTol) {
            Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
            e[j] = 1.0;
            eqs.emplace_back(std::move(e), 0.0);
        }

    if (eqs.empty()) {
        can.N = Eigen::MatrixXd::Identity(dim, dim);
        can.xp = Eigen::VectorXd::Zero(dim);
        can.ny = dim;
    } else {
        can.has_equalities = true;
        const auto neq = static_cast<Eigen::Index>(eqs.size());
        can.A.resize(neq, dim);
        can.b.resize(neq);
        for (Eigen::Index i = 0; i < neq; ++i) {
            can.A.row(i) = eqs[static_cast<std::size_t>(i)].first;
            can.b[i] = eqs[static_cast<std::size_t>(i)].second;
        }
        Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(can.A);
        can.xp = cod.solve(can.b);
        can.eq_residual = (can.A * can.xp - can.b).cwiseAbs().maxCoeff();
        can.consistent = can.eq_residual <= 1e-9 * (1.0 + can.b.cwiseAbs().maxCoeff());
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(can.A.transpose());
        const Eigen::Index rank = qr.rank();
        can.ny = dim - rank;
        Eigen::MatrixXd full = qr.householderQ() * Eigen::MatrixXd::Identity(dim, dim);
        can.N = full.rightCols(can.ny);
    }

    const Eigen::MatrixXd Pd =
        problem.P.size() > 0 ? problem.P : Eigen::MatrixXd::Zero(dim, dim);
    can.P = can.N.transpose() * Pd * can.N;
    can.q = can.N.transpose() * (2.0 * (Pd * can.xp) + problem.q);
    can.r = problem.r + can.xp.dot(Pd * can.xp) + problem.q.dot(can.xp);

    auto push = [&](const Eigen::MatrixXd& Q, const Eigen::VectorXd& a, double rhs, Tag tag) {
        RRow row;
        row.tag = tag;
        if (Q.size() > 0) {
            row.Q = can.N.transpose() * Q * can.N;
            row.a = can.N.transpose() * (2.0 * (Q * can.xp) + a);
            row.rhs = rhs - can.xp.dot(Q * can.xp) - a.dot(can.xp);
            if (row.Q.size() == 0 || row.Q.cwiseAbs().maxCoeff() <= 1e-14) row.Q.resize(0, 0);
        } else {
            row.a = can.N.transpose() * a;
            row.rhs = rhs - a.dot(can.xp);
        }
        const bool constant =
            row.Q.size() == 0 && (row.a.size() == 0 || row.a.cwiseAbs().maxCoeff() <= 1e-12);
        if (constant) {
            can.constant_violation = std::max(can.constant_violation, -row.rhs);
            return;
        }
        can.rows.push_back(std::move(row));
    };

    for (std::size_t i = 0; i < problem.rows.size(); ++i)
        push(problem.rows[i].Q, problem.rows[i].a, problem.rows[i].rhs,
             {Tag::QuadRow, static_cast<Eigen::Index>(i)});
    const Eigen::MatrixXd no_quad;
    for (std::size_t i = 0; i < problem.linear_rows.size(); ++i) {
        const auto& row = problem.linear_rows[i];
        if (row.hi - row.lo <= kEqualityCollapse) continue;  // eliminated
        if (row.hi < kNoBound)
            push(no_quad, row.a, row.hi, {Tag::LinearHi, static_cast<Eigen::Index>(i)});
        if (row.lo > -kNoBound)
            push(no_quad, -row.a, -row.lo, {Tag::LinearLo, static_cast<Eigen::Index>(i)});
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (problem.upper[j] <= kFixedVarTol) continue;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
        e[j] = 1.0;
        push(no_quad, e, problem.upper[j], {Tag::BoxUpper, j});
        push(no_quad, -e, 0.0, {Tag::BoxLower, j});
    }
    (void)opts;
    return can;
}

/// Damped-Newton log-barrier minimization of  y' P y + q' y - mu * sum log s.
/// Returns the Newton step count; `y` must start strictly feasible.
int barrier_minimize(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                     const std::vector<RRow>& rows, Eigen::VectorXd& y, const QcqpOptions& opts,
                     std::optional<double> stop_obj_below) {
    const Eigen::Index n = y.size();
    int total = 0;
    auto slack = [&](const Eigen::VectorXd& point, std::vector<double>& s) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            s[i] = rows[i].rhs - row_value(rows[i], point);
            if (!(s[i] > 0.0)) return false;
        }
        return true;
    };
    std::vector<double> s(rows.size());
    if (!slack(y, s)) throw NumericalFailure("barrier started outside the feasible interior");

    auto phi = [&](const Eigen::VectorXd& point, const std::vector<double>& sl, double mu) {
        double v = quad_value(P, q, 0.0, point);
        for (double si : sl) v -= mu * std::log(si);
        return v;
    };

    for (double mu = opts.mu_initial; mu >= opts.mu_final * 0.999; mu *= opts.mu_factor) {
        for (int inner = 0; inner < 50; ++inner) {
            slack(y, s);
            Eigen::VectorXd grad = q;
            if (P.size() > 0) grad += 2.0 * (P * y);
            Eigen::MatrixXd H = P.size() > 0 ? Eigen::MatrixXd(2.0 * P)
                                             : Eigen::MatrixXd::Zero(n, n);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const Eigen::VectorXd g = row_gradient(rows[i], y);
                grad += (mu / s[i]) * g;
                H += (mu / (s[i] * s[i])) * (g * g.transpose());
                if (rows[i].Q.size() > 0) H += (2.0 * mu / s[i]) * rows[i].Q;
            }

            Eigen::VectorXd d;
            double ridge = 0.0;
            while (true) {
                Eigen::LDLT<Eigen::MatrixXd> ldlt(
                    ridge > 0.0 ? Eigen::MatrixXd(H + ridge * Eigen::MatrixXd::Identity(n, n)) : H);
                if (ldlt.info() == Eigen::Success) {
                    d = ldlt.solve(-grad);
                    if (grad.dot(d) < 0.0 || grad.cwiseAbs().maxCoeff() == 0.0) break;
                }
                ridge = ridge == 0.0 ? 1e-12 : ridge * 100.0;
                if (ridge > 1e-2) {
                    // The Newton system is too ill-conditioned to trust;
                    // steepest descent still makes progress on the barrier.
                    d = -grad;
                    break;
                }
            }

            const double decrement = -grad.dot(d) / 2.0;
            if (decrement <= 1e-12 * std::max(1.0, std::abs(phi(y, s, mu)))) break;

            // Fraction-to-boundary: start the search strictly short of the
            // nearest constraint along d (exact for linear rows), so iterates
            // cannot wedge against the boundary and ruin the conditioning.
            double alpha = 1.0;
            for (const auto& row : rows) {
                if (row.Q.size() > 0) continue;  // handled by the halving loop
                const double ad = row.a.dot(d);
                if (ad > 0.0) {
                    const double s_here = row.rhs - row.a.dot(y);
                    alpha = std::min(alpha, 0.99 * s_here / ad);
                }
            }
            if (alpha <= 0.0) break;
            std::vector<double> strial(rows.size());
            int halvings = 0;
            while (halvings < 90 && !slack(y + alpha * d, strial)) {
                alpha /= 2.0;
                ++halvings;
            }
            if (halvings >= 90) break;  // wedged against the boundary; accept y
            const double phi0 = phi(y, s, mu);
            const double slope = grad.dot(d);
            while (halvings < 90) {
                slack(y + alpha * d, strial);
                if (phi(y + alpha * d, strial, mu) <= phi0 + 1e-4 * alpha * slope) break;
                alpha /= 2.0;
                ++halvings;
            }
            if (halvings >= 90) break;
            y += alpha * d;
            if (++total > opts.max_newton)
                throw NumericalFailure("Newton iteration budget exhausted");
            if (stop_obj_below && quad_value(P, q, 0.0, y) < *stop_obj_below) return total;
        }
        if (stop_obj_below && quad_value(P, q, 0.0, y) < *stop_obj_below) return total;
    }
    return total;
}

/// Appends a relaxation coordinate t to every row and returns the phase-1
/// system: rows hold g_r(y) - t <= rhs_r plus the floor -t <= 1.
std::vector<RRow> relaxed_rows(const std::vector<RRow>& rows, Eigen::Index ny) {
    std::vector<RRow> out;
    out.reserve(rows.size() + 1);
    for (const auto& row : rows) {
        RRow r2;
        r2.rhs = row.rhs;
        r2.tag = row.tag;
        r2.a = Eigen::VectorXd::Zero(ny + 1);
        r2.a.head(ny) = row.a;
        r2.a[ny] = -1.0;
        if (row.Q.size() > 0) {
            r2.Q = Eigen::MatrixXd::Zero(ny + 1, ny + 1);
            r2.Q.topLeftCorner(ny, ny) = row.Q;
        }
        out.push_back(std::move(r2));
    }
    RRow floor_row;
    floor_row.a = Eigen::VectorXd::Zero(ny + 1);
    floor_row.a[ny] = -1.0;
    floor_row.rhs = 1.0;
    floor_row.tag = {Tag::QuadRow, -1};
    out.push_back(std::move(floor_row));
    return out;
}

Eigen::VectorXd clip_to_box(const BlockQcqp& problem, const Eigen::VectorXd& x) {
    Eigen::VectorXd out = x;
    for (Eigen::Index j = 0; j < problem.dim(); ++j)
        out[j] = std::min(std::max(out[j], 0.0), problem.upper[j]);
    return out;
}

/// Largest violation of the original rows, box and eliminated equalities.
double original_violation(const BlockQcqp& problem, const Eigen::VectorXd& x) {
    double v = 0.0;
    for (const auto& row : problem.rows) {
        double lhs = row.a.dot(x);
        if (row.Q.size() > 0) lhs += x.dot(row.Q * x);
        v = std::max(v, lhs - row.rhs);
    }
    for (const auto& row : problem.linear_rows) {
        const double lhs = row.a.dot(x);
        v = std::max(v, lhs - row.hi);
        v = std::max(v, row.lo - lhs);
    }
    for (Eigen::Index j = 0; j < problem.dim(); ++j) {
        v = std::max(v, x[j] - problem.upper[j]);
        v = std::max(v, -x[j]);
    }
    return v;
}

void size_multipliers(QcqpResult& res, const BlockQcqp& problem) {
    res.row_multipliers.assign(problem.rows.size(), 0.0);
    res.linear_lo_multipliers.assign(problem.linear_rows.size(), 0.0);
    res.linear_hi_multipliers.assign(problem.linear_rows.size(), 0.0);
    res.box_lower_multipliers = Eigen::VectorXd::Zero(problem.dim());
    res.box_upper_multipliers = Eigen::VectorXd::Zero(problem.dim());
}

void store_multiplier(QcqpResult& res, const Tag& tag, double lambda) {
    switch (tag.type) {
        case Tag::QuadRow:
            if (tag.index >= 0) res.row_multipliers[static_cast<std::size_t>(tag.index)] = lambda;
            break;
        case Tag::LinearLo:
            res.linear_lo_multipliers[static_cast<std::size_t>(tag.index)] = lambda;
            break;
        case Tag::LinearHi:
            res.linear_hi_multipliers[static_cast<std::size_t>(tag.index)] = lambda;
            break;
        case Tag::BoxUpper:
            res.box_upper_multipliers[tag.index] = lambda;
            break;
        case Tag::BoxLower:
            res.box_lower_multipliers[tag.index] = lambda;
            break;
    }
}

Eigen::VectorXd start_point(const Canonical& can, const BlockQcqp& problem) {
    if (can.has_equalities) return Eigen::VectorXd::Zero(can.ny);
    return 0.5 * problem.upper;  // N = I, xp = 0: y is x itself
}

}  // namespace

QcqpResult solve(const BlockQcqp& problem, const QcqpOptions& opts) {
    Canonical can = canonicalize(problem, opts);
    QcqpResult res;
    size_multipliers(res, problem);

    if (!can.consistent || can.constant_violation > opts.feas_tol) {
        res.status = QcqpStatus::Infeasible;
        res.x = clip_to_box(problem, can.xp);
        res.value = quad_value(problem.P, problem.q, problem.r, res.x);
        res.max_violation = std::max(can.eq_residual, can.constant_violation);
        return res;
    }

    if (can.ny == 0) {
        res.x = clip_to_box(problem, can.xp);
        const double clip_shift = can.dim > 0 ? (can.xp - res.x).cwiseAbs().maxCoeff() : 0.0;
        const double viol = std::max(original_violation(problem, res.x), clip_shift);
        res.value = quad_value(problem.P, problem.q, problem.r, res.x);
        if (viol > opts.feas_tol) {
            res.status = QcqpStatus::Infeasible;
            res.max_violation = viol;
        } else {
            res.status = QcqpStatus::Optimal;
            res.max_violation = std::max(viol, 0.0);
        }
        return res;
    }

    Eigen::VectorXd y = start_point(can, problem);
    double start_violation = -std::numeric_limits<double>::infinity();
    for (const auto& row : can.rows)
        start_violation = std::max(start_violation, row_value(row, y) - row.rhs);

    double rho = 0.0;
    if (start_violation > -kInterior) {
        // Feasibility stage: minimize the common relaxation t, stopping early
        // once a strictly interior point appears.
        std::vector<RRow> prows = relaxed_rows(can.rows, can.ny);
        Eigen::VectorXd yt(can.ny + 1);
        yt.head(can.ny) = y;
        yt[can.ny] = std::max(start_violation, 0.0) + 1.0;
        Eigen::VectorXd pq = Eigen::VectorXd::Zero(can.ny + 1);
        pq[can.ny] = 1.0;
        const Eigen::MatrixXd pP;
        res.newton_iterations +=
            barrier_minimize(pP, pq, prows, yt, opts, /*stop_obj_below=*/-kInterior);
        const double t_reached = yt[can.ny];
        y = yt.head(can.ny);
        if (t_reached > opts.feas_tol) {
            res.status = QcqpStatus::Infeasible;
            res.x = clip_to_box(problem, can.xp + can.N * y);
            res.value = quad_value(problem.P, problem.q, problem.r, res.x);
            res.max_violation = std::max(original_violation(problem, res.x), t_reached);
            return res;
        }
        rho = std::max(t_reached, 0.0) + kRelaxMargin;
    }

    std::vector<RRow> rows = can.rows;
    for (auto& row : rows) row.rhs += rho;
    res.newton_iterations += barrier_minimize(can.P, can.q, rows, y, opts, std::nullopt);

    const Eigen::VectorXd x_interior = can.xp + can.N * y;
    res.x = clip_to_box(problem, x_interior);
    res.value = quad_value(problem.P, problem.q, problem.r, res.x);
    res.status = QcqpStatus::Optimal;
    res.max_violation = std::max(original_violation(problem, res.x), 0.0);
    for (const auto& row : rows) {
        const double s = row.rhs - row_value(row, y);
        if (s > 0.0) store_multiplier(res, row.tag, opts.mu_final / s);
    }
    res.kkt_residual = kkt_residual(problem, res);
    return res;
}

Phase1Result phase1(const BlockQcqp& problem, const QcqpOptions& opts) {
    Canonical can = canonicalize(problem, opts);
    if (!can.consistent)
        return {clip_to_box(problem, can.xp), std::max(can.eq_residual, can.constant_violation)};

    if (can.ny == 0) {
        Eigen::VectorXd x = clip_to_box(problem, can.xp);
        const double clip_shift = can.dim > 0 ? (can.xp - x).cwiseAbs().maxCoeff() : 0.0;
        const double viol = std::max(original_violation(problem, x), clip_shift);
        return {std::move(x), std::max(viol, can.constant_violation)};
    }

    std::vector<RRow> hard;   // rows kept exact (the box, when possible)
    std::vector<RRow> soft;   // rows granted the common relaxation t
    for (const auto& row : can.rows) {
        const bool box_row = row.tag.type == Tag::BoxUpper || row.tag.type == Tag::BoxLower;
        if (box_row && !can.has_equalities)
            hard.push_back(row);
        else
            soft.push_back(row);
    }

    if (soft.empty()) {
        // Nothing to relax: report the box center (or the projected particular
        // solution when equality rows fixed the point).
        Eigen::VectorXd x = can.has_equalities ? clip_to_box(problem, can.xp)
                                               : Eigen::VectorXd(0.5 * problem.upper);
        return {std::move(x), std::max(can.constant_violation, 0.0)};
    }

    Eigen::VectorXd y = start_point(can, problem);
    double worst = 0.0;
    for (const auto& row : soft) worst = std::max(worst, row_value(row, y) - row.rhs);

    std::vector<RRow> prows = relaxed_rows(soft, can.ny);
    for (const auto& row : hard) {  // hard rows get a zero t coefficient
        RRow r2;
        r2.rhs = row.rhs;
        r2.tag = row.tag;
        r2.a = Eigen::VectorXd::Zero(can.ny + 1);
        r2.a.head(can.ny) = row.a;
        if (row.Q.size() > 0) {
            r2.Q = Eigen::MatrixXd::Zero(can.ny + 1, can.ny + 1);
            r2.Q.topLeftCorner(can.ny, can.ny) = row.Q;
        }
        prows.push_back(std::move(r2));
    }

    Eigen::VectorXd yt(can.ny + 1);
    yt.head(can.ny) = y;
    yt[can.ny] = worst + 1.0;
    Eigen::VectorXd pq = Eigen::VectorXd::Zero(can.ny + 1);
    pq[can.ny] = 1.0;
    const Eigen::MatrixXd pP;
    QcqpOptions full = opts;
    barrier_minimize(pP, pq, prows, yt, full, std::nullopt);
    Eigen::VectorXd x = clip_to_box(problem, can.xp + can.N * yt.head(can.ny));
    return {std::move(x), std::max(yt[can.ny], can.constant_violation)};
}

double kkt_residual(const BlockQcqp& problem, const QcqpResult& result) {
    const Eigen::Index dim = problem.dim();
    const Eigen::VectorXd& x = result.x;
    Eigen::VectorXd grad = problem.q;
    if (problem.P.size() > 0) grad += 2.0 * (problem.P * x);

    double comp = 0.0;
    double dual = 0.0;
    auto take = [&](double lambda, double s, const Eigen::VectorXd& g) {
        grad += lambda * g;
        comp = std::max(comp, std::abs(lambda * std::max(s, 0.0)));
        dual = std::max(dual, -lambda);
    };
    for (std::size_t i = 0; i < problem.rows.size(); ++i) {
        const auto& row = problem.rows[i];
        double lhs = row.a.dot(x);
        Eigen::VectorXd g = row.a;
        if (row.Q.size() > 0) {
            lhs += x.dot(row.Q * x);
            g += 2.0 * (row.Q * x);
        }
        take(result.row_multipliers[i], row.rhs - lhs, g);
    }
    for (std::size_t i = 0; i < problem.linear_rows.size(); ++i) {
        const auto& row = problem.linear_rows[i];
        if (row.hi - row.lo <= kEqualityCollapse) continue;  // eliminated as equality
        const double lhs = row.a.dot(x);
        if (row.hi < kNoBound) take(result.linear_hi_multipliers[i], row.hi - lhs, row.a);
        if (row.lo > -kNoBound)
            take(result.linear_lo_multipliers[i], lhs - row.lo, Eigen::VectorXd(-row.a));
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (problem.upper[j] <= kFixedVarTol) continue;
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
        e[j] = 1.0;
        take(result.box_upper_multipliers[j], problem.upper[j] - x[j], e);
        take(result.box_lower_multipliers[j], x[j], Eigen::VectorXd(-e));
    }

    Canonical can = canonicalize(problem, QcqpOptions{});
    const double stationarity =
        can.has_equalities
            ? (can.ny > 0 ? (can.N.transpose() * grad).cwiseAbs().maxCoeff() : 0.0)
            : (dim > 0 ? grad.cwiseAbs().maxCoeff() : 0.0);
    double viol = original_violation(problem, x);
    if (can.has_equalities && can.A.size() > 0)
        viol = std::max(viol, (can.A * x - can.b).cwiseAbs().maxCoeff());
    return std::max({stationarity, comp, dual, std::max(viol, 0.0)});
}

}  // namespace qib
