#include "qib/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "qib/qcqp.hpp"

namespace qib {
namespace {

// Per incident mixed row: the block's slice of the row plus bounds on the
// values the slice can take over the box.
struct RowSlice {
    Index row = -1;
    bool is_equality = false;
    Eigen::MatrixXd quad;     // block quadratic + diagonal share (dim x dim)
    Eigen::VectorXd lin;      // linear share over the block's variables
    double shift = 0.0;       // v^r_i, added when delta = 1
    double lo = 0.0;          // lower bound of slice + shift over the box
    double hi = 0.0;          // upper bound of slice + shift over the box
    bool has_quad = false;
    int k_floor = 0;          // smallest admissible cell index
    int k_ceil = 0;           // largest admissible cell index
    int k_inactive = 0;       // cells >= this leave the row slack everywhere
};

Eigen::MatrixXd block_quad_matrix(const QuadForm& form, const Problem& p, Index block) {
    const auto& vars = p.blocks[static_cast<std::size_t>(block)].variables;
    const auto dim = static_cast<Eigen::Index>(vars.size());
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& bq : form.quad) {
        if (bq.block == block) m += bq.matrix;
    }
    for (Eigen::Index t = 0; t < dim; ++t) {
        m(t, t) += form.diag[vars[static_cast<std::size_t>(t)]];
    }
    return m;
}

Eigen::VectorXd block_linear(const QuadForm& form, const Problem& p, Index block) {
    const auto& vars = p.blocks[static_cast<std::size_t>(block)].variables;
    const auto dim = static_cast<Eigen::Index>(vars.size());
    Eigen::VectorXd v(dim);
    for (Eigen::Index t = 0; t < dim; ++t) v[t] = form.linear[vars[static_cast<std::size_t>(t)]];
    return v;
}

std::vector<Index> incident_mixed_rows(const Problem& p, Index block) {
    std::vector<Index> rows;
    for (Index r = 0; r < p.num_constraints(); ++r) {
        const auto& inc = p.incidence[static_cast<std::size_t>(r)];
        if (p.constraints[static_cast<std::size_t>(r)].kind != ConstraintKind::MixedInteger)
            continue;
        if (std::binary_search(inc.begin(), inc.end(), block)) rows.push_back(r);
    }
    return rows;
}

}  // namespace

SketchValue sketch_value(const Problem& problem, Index block, const std::vector<Index>& mixed_rows,
                         const SketchKey& key, Epsilon eps, const SketchOptions& opts) {
    const auto& vars = problem.blocks[static_cast<std::size_t>(block)].variables;
    const auto dim = static_cast<Eigen::Index>(vars.size());
    const double e = eps.value();
    const double ft = opts.tol.feas_tol;

    if (key.delta == 0) {
        // x pinned to 0: each row's contribution is 0 (no indicator shift).
        for (std::size_t t = 0; t < mixed_rows.size(); ++t) {
            const auto& con = problem.constraints[static_cast<std::size_t>(mixed_rows[t])];
            const int k = key.k[t];
            if (e * (k + 1) < -ft) return {false, 0.0, Eigen::VectorXd::Zero(dim)};
            if (con.sense == ConstraintSense::Equal && e * k > ft)
                return {false, 0.0, Eigen::VectorXd::Zero(dim)};
        }
        return {true, 0.0, Eigen::VectorXd::Zero(dim)};
    }

    BlockQcqp q;
    q.P = block_quad_matrix(problem.objective, problem, block);
    q.q = block_linear(problem.objective, problem, block);
    q.r = problem.objective.indicator[block];
    q.upper = Eigen::VectorXd(dim);
    for (Eigen::Index t = 0; t < dim; ++t)
        q.upper[t] = problem.variables[vars[static_cast<std::size_t>(t)]].upper;

    for (std::size_t t = 0; t < mixed_rows.size(); ++t) {
        const Index r = mixed_rows[t];
        const auto& con = problem.constraints[static_cast<std::size_t>(r)];
        const int k = key.k[t];
        const double shift = con.form.indicator[block];
        Eigen::MatrixXd qm = block_quad_matrix(con.form, problem, block);
        Eigen::VectorXd lin = block_linear(con.form, problem, block);
        const bool has_quad = qm.size() > 0 && qm.cwiseAbs().maxCoeff() > 0.0;
        if (con.sense == ConstraintSense::Equal) {
            // Purely linear by validation; both cell edges apply.
            q.linear_rows.push_back({lin, e * k - shift, e * (k + 1) - shift});
        } else if (has_quad) {
            q.rows.push_back({qm, lin, e * (k + 1) - shift});
        } else {
            q.linear_rows.push_back({lin, -kNoBound, e * (k + 1) - shift});
        }
    }

    if (dim == 0) {
        // Nothing continuous to decide; rows reduce to constants 0 + shift.
        for (const auto& row : q.linear_rows) {
            if (0.0 < row.lo - ft || 0.0 > row.hi + ft) return {false, 0.0, Eigen::VectorXd{}};
        }
        for (const auto& row : q.rows) {
            if (row.rhs < -ft) return {false, 0.0, Eigen::VectorXd{}};
        }
        return {true, q.r, Eigen::VectorXd{}};
    }

    QcqpResult res = solve(q, opts.qcqp);
    if (res.status == QcqpStatus::Infeasible) return {false, 0.0, Eigen::VectorXd::Zero(dim)};
    return {true, res.value, res.x};
}

SketchSet enumerate_sketches(const Problem& problem, Index block, Epsilon eps,
                             const SketchOptions& opts) {
    SketchSet out;
    out.block = block;
    out.mixed_rows = incident_mixed_rows(problem, block);

    const auto& vars = problem.blocks[static_cast<std::size_t>(block)].variables;
    const auto dim = static_cast<Eigen::Index>(vars.size());
    const double e = eps.value();
    const double ft = opts.tol.feas_tol;
    const int kmin = eps.k_min();
    const int kmax = eps.k_max();
    const std::size_t nrows = out.mixed_rows.size();

    // Off profile first (grid order puts delta = 0 ahead of delta = 1).
    if (!problem.block_forced_on(block)) {
        ++out.keys_examined;
        SketchKey off;
        off.delta = 0;
        off.k.assign(nrows, 0);
        out.sketches.push_back({off, 0.0, Eigen::VectorXd::Zero(dim)});
    }

    // Per-row admissible cell windows for delta = 1.
    std::vector<RowSlice> slices(nrows);
    for (std::size_t t = 0; t < nrows; ++t) {
        RowSlice& s = slices[t];
        s.row = out.mixed_rows[t];
        const auto& con = problem.constraints[static_cast<std::size_t>(s.row)];
        s.is_equality = con.sense == ConstraintSense::Equal;
        s.quad = block_quad_matrix(con.form, problem, block);
        s.lin = block_linear(con.form, problem, block);
        s.shift = con.form.indicator[block];
        s.has_quad = dim > 0 && s.quad.cwiseAbs().maxCoeff() > 0.0;
        double lin_lo = 0.0, lin_hi = 0.0, quad_hi = 0.0;
        for (Eigen::Index j = 0; j < dim; ++j) {
            const double u = problem.variables[vars[static_cast<std::size_t>(j)]].upper;
            lin_lo += std::min(s.lin[j] * u, 0.0);
            lin_hi += std::max(s.lin[j] * u, 0.0);
            for (Eigen::Index l = 0; l < dim; ++l) {
                const double ul = problem.variables[vars[static_cast<std::size_t>(l)]].upper;
                quad_hi += std::abs(s.quad(j, l)) * u * ul;
            }
        }
        s.lo = lin_lo + s.shift;        // quadratic share bounded below by 0 (PSD, 0 in box)
        s.hi = lin_hi + quad_hi + s.shift;
        // Cell k admits points only when eps*(k+1) >= lo; for equalities the
        // lower edge eps*k must also be attainable: eps*k <= hi.
        s.k_floor = std::max(kmin, static_cast<int>(std::ceil((s.lo - ft) / e)) - 1);
        s.k_ceil =
            s.is_equality ? std::min(kmax, static_cast<int>(std::floor((s.hi + ft) / e))) : kmax;
        // Cells whose upper edge clears hi by a safe margin leave the row
        // slack over the whole box; they all share one solve.
        double inact = std::ceil((s.hi + 1e-7) / e);
        s.k_inactive = inact >= static_cast<double>(kmax) ? kmax : static_cast<int>(inact);
        if (s.is_equality) s.k_inactive = kmax;  // lower edge keeps every cell distinct
    }

    bool range_empty = false;
    for (const auto& s : slices) {
        if (s.k_floor > s.k_ceil) range_empty = true;
    }

    if (!range_empty) {
        std::map<std::vector<int>, std::pair<bool, std::size_t>> memo;  // clamped key -> sketch
        std::vector<int> k(nrows);
        for (std::size_t t = 0; t < nrows; ++t) k[t] = slices[t].k_floor;
        for (;;) {
            ++out.keys_examined;
            SketchKey key;
            key.delta = 1;
            key.k = k;
            std::vector<int> clamped(nrows);
            for (std::size_t t = 0; t < nrows; ++t)
                clamped[t] = std::min(k[t], slices[t].k_inactive);
            auto it = memo.find(clamped);
            if (it == memo.end()) {
                SketchValue sv = sketch_value(problem, block, out.mixed_rows, key, eps, opts);
                std::size_t idx = 0;
                if (sv.feasible) {
                    idx = out.sketches.size();
                    out.sketches.push_back({key, sv.value, sv.certificate});
                }
                it = memo.emplace(clamped, std::make_pair(sv.feasible, idx)).first;
            } else if (it->second.first) {
                const Sketch& base = out.sketches[it->second.second];
                out.sketches.push_back({key, base.value, base.certificate});
            }
            // Odometer step over the per-row windows.
            std::size_t t = nrows;
            while (t > 0) {
                --t;
                if (k[t] < slices[t].k_ceil) {
                    ++k[t];
                    for (std::size_t u = t + 1; u < nrows; ++u) k[u] = slices[u].k_floor;
                    t = SIZE_MAX;
                    break;
                }
            }
            if (t != SIZE_MAX) break;
        }
    }

    return out;
}

}  // namespace qib
