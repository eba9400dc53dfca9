#include "qib/verify.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qib/qcqp.hpp"

namespace qib {

CheckReport check_solution(const Problem& problem, const Eigen::VectorXd& x,
                           const Eigen::VectorXi& z, Epsilon eps, const Tolerances& tol) {
    constexpr double pre_tol = 1e-9;
    if (x.size() != problem.num_variables() || z.size() != problem.num_blocks())
        throw std::invalid_argument("check_solution: dimension mismatch");
    for (Index j = 0; j < problem.num_variables(); ++j) {
        const auto& v = problem.variables[static_cast<std::size_t>(j)];
        if (x[j] < v.lower - pre_tol || x[j] > v.upper + pre_tol)
            throw std::invalid_argument("check_solution: x out of bounds");
    }
    for (Index i = 0; i < problem.num_blocks(); ++i) {
        if (z[i] != 0 && z[i] != 1) throw std::invalid_argument("check_solution: z not binary");
        if (z[i] == 0 && problem.block_forced_on(i))
            throw IndicatorViolation("forced-on block switched off");
        if (z[i] == 0) {
            for (Index j : problem.blocks[static_cast<std::size_t>(i)].variables) {
                if (std::abs(x[j]) > pre_tol)
                    throw IndicatorViolation("nonzero variable in a switched-off block");
            }
        }
    }

    const Eigen::VectorXd zd = z.cast<double>();
    CheckReport rep;
    rep.objective = evaluate_objective(problem, x, zd);
    rep.slack.resize(static_cast<std::size_t>(problem.num_constraints()));
    rep.combinatorial_feasible = true;
    for (Index r = 0; r < problem.num_constraints(); ++r) {
        const auto& con = problem.constraints[static_cast<std::size_t>(r)];
        const double lhs = evaluate_constraint(problem, r, x, zd);
        rep.slack[static_cast<std::size_t>(r)] = con.rhs - lhs;
        if (con.kind == ConstraintKind::MixedInteger) {
            const double viol = con.sense == ConstraintSense::Equal ? std::abs(lhs - con.rhs)
                                                                    : std::max(lhs - con.rhs, 0.0);
            rep.max_mixed_infeasibility = std::max(rep.max_mixed_infeasibility, viol);
            const double cap =
                eps.value() *
                static_cast<double>(problem.incidence[static_cast<std::size_t>(r)].size());
            rep.guarantee_bound = std::max(rep.guarantee_bound, cap);
        } else {
            long long kappa = 0;
            for (Index i : problem.incidence[static_cast<std::size_t>(r)])
                kappa += std::llround(con.form.indicator[i]) * static_cast<long long>(z[i]);
            if (kappa > std::llround(con.rhs)) rep.combinatorial_feasible = false;
        }
    }
    rep.within_bound = rep.combinatorial_feasible &&
                       rep.max_mixed_infeasibility <= rep.guarantee_bound + tol.feas_tol;
    return rep;
}

namespace {

// Pattern-independent preparation shared by all oracle workers.
struct OraclePrep {
    const Problem* problem = nullptr;
    Tolerances tol;
    Index nb = 0;
    unsigned long long forced_mask = 0;  // patterns must contain these bits
    std::vector<char> can_off;           // block may be switched off (0 in its box)
    bool zero_objective = false;
    // Per mixed row and block: interval bounds of the block's contribution.
    struct RowBounds {
        double lin_lo = 0.0;   // min of linear share over the box
        double lin_hi = 0.0;   // max of linear share over the box
        double quad_hi = 0.0;  // upper bound of quadratic + diagonal share
    };
    std::vector<std::vector<RowBounds>> row_bounds;  // [constraint][block]
    std::vector<std::vector<RowBounds>> obj_bounds;  // [0][block]
    std::vector<Index> free_bits;  // block ids not in forced_mask, ascending
};

// Positions the t-th bit of `s` at free_bits[t]; monotone in `s`, so the
// induced visiting order over surviving patterns matches the plain counter.
unsigned long long expand_free(const OraclePrep& prep, unsigned long long s) {
    unsigned long long out = prep.forced_mask;
    for (std::size_t t = 0; t < prep.free_bits.size(); ++t)
        if (s >> t & 1) out |= 1ULL << prep.free_bits[t];
    return out;
}

OraclePrep prepare(const Problem& p, const Tolerances& tol) {
    OraclePrep prep;
    prep.problem = &p;
    prep.tol = tol;
    prep.nb = p.num_blocks();
    for (Index i = 0; i < prep.nb; ++i) {
        if (p.block_forced_on(i)) prep.forced_mask |= 1ULL << i;
        bool can = true;
        for (Index j : p.blocks[static_cast<std::size_t>(i)].variables) {
            const auto& v = p.variables[static_cast<std::size_t>(j)];
            if (v.lower > 1e-9 || v.upper < -1e-9) can = false;
        }
        prep.can_off.push_back(can ? 1 : 0);
    }

    auto bounds_of = [&](const QuadForm& form) {
        std::vector<OraclePrep::RowBounds> per_block(static_cast<std::size_t>(prep.nb));
        for (Index i = 0; i < prep.nb; ++i) {
            auto& rb = per_block[static_cast<std::size_t>(i)];
            const auto& vars = p.blocks[static_cast<std::size_t>(i)].variables;
            for (Index j : vars) {
                const auto& v = p.variables[static_cast<std::size_t>(j)];
                const double c = form.linear[j];
                rb.lin_lo += std::min(c * v.lower, c * v.upper);
                rb.lin_hi += std::max(c * v.lower, c * v.upper);
                const double mx = std::max(std::abs(v.lower), std::abs(v.upper));
                rb.quad_hi += form.diag[j] * mx * mx;
            }
            for (const auto& bq : form.quad) {
                if (bq.block != i) continue;
                for (std::size_t a = 0; a < vars.size(); ++a) {
                    const auto& va = p.variables[static_cast<std::size_t>(vars[a])];
                    const double ma = std::max(std::abs(va.lower), std::abs(va.upper));
                    for (std::size_t b = 0; b < vars.size(); ++b) {
                        const auto& vb = p.variables[static_cast<std::size_t>(vars[b])];
                        const double mb = std::max(std::abs(vb.lower), std::abs(vb.upper));
                        rb.quad_hi += std::abs(bq.matrix(static_cast<Eigen::Index>(a),
                                                         static_cast<Eigen::Index>(b))) *
                                      ma * mb;
                    }
                }
            }
        }
        return per_block;
    };

    for (Index r = 0; r < p.num_constraints(); ++r)
        prep.row_bounds.push_back(bounds_of(p.constraints[static_cast<std::size_t>(r)].form));
    prep.obj_bounds.push_back(bounds_of(p.objective));

    const auto& obj = p.objective;
    prep.zero_objective = obj.diag.cwiseAbs().sum() == 0.0 && obj.linear.cwiseAbs().sum() == 0.0 &&
                          obj.indicator.cwiseAbs().sum() == 0.0;
    for (const auto& bq : obj.quad) {
        if (bq.matrix.size() > 0 && bq.matrix.cwiseAbs().sum() != 0.0) prep.zero_objective = false;
    }

    // Fold blocks that cannot sit at zero into the forced set, then grow it
    // to a fixpoint: a block is forced on when switching it off makes some
    // row's reachable interval miss its right-hand side no matter what the
    // remaining blocks do.  Every pruned pattern is provably infeasible, so
    // restricting the scan to supersets of forced_mask is exact.
    for (Index i = 0; i < prep.nb; ++i)
        if (!prep.can_off[static_cast<std::size_t>(i)]) prep.forced_mask |= 1ULL << i;
    bool grew = true;
    while (grew) {
        grew = false;
        for (Index i = 0; i < prep.nb && !grew; ++i) {
            if (prep.forced_mask >> i & 1) continue;
            for (Index r = 0; r < p.num_constraints() && !grew; ++r) {
                const auto& con = p.constraints[static_cast<std::size_t>(r)];
                bool touches = false;
                double lo = 0.0, hi = 0.0;
                for (Index j : p.incidence[static_cast<std::size_t>(r)]) {
                    if (j == i) {
                        touches = true;
                        continue;  // the candidate is off: contributes zero
                    }
                    const auto& rb =
                        prep.row_bounds[static_cast<std::size_t>(r)][static_cast<std::size_t>(j)];
                    const double on_lo = con.form.indicator[j] + rb.lin_lo;
                    const double on_hi = con.form.indicator[j] + rb.lin_hi + rb.quad_hi;
                    if (prep.forced_mask >> j & 1) {
                        lo += on_lo;
                        hi += on_hi;
                    } else {
                        lo += std::min(0.0, on_lo);
                        hi += std::max(0.0, on_hi);
                    }
                }
                if (!touches) continue;
                const bool impossible =
                    lo > con.rhs + prep.tol.feas_tol ||
                    (con.sense == ConstraintSense::Equal && hi < con.rhs - prep.tol.feas_tol);
                if (impossible) {
                    prep.forced_mask |= 1ULL << i;
                    grew = true;
                }
            }
        }
    }
    for (Index i = 0; i < prep.nb; ++i)
        if (!(prep.forced_mask >> i & 1)) prep.free_bits.push_back(i);
    return prep;
}

// Fast screens; returns false when the pattern provably cannot be feasible
// (or cannot beat `best` when prune_value is set).
bool screens_pass(const OraclePrep& prep, unsigned long long pattern, bool prune_value,
                  double best) {
    const Problem& p = *prep.problem;
    if ((pattern & prep.forced_mask) != prep.forced_mask) return false;
    for (Index i = 0; i < prep.nb; ++i) {
        if (!(pattern >> i & 1) && !prep.can_off[static_cast<std::size_t>(i)]) return false;
    }
    for (Index r = 0; r < p.num_constraints(); ++r) {
        const auto& con = p.constraints[static_cast<std::size_t>(r)];
        if (con.kind == ConstraintKind::Combinatorial) {
            long long kappa = 0;
            for (Index i : p.incidence[static_cast<std::size_t>(r)]) {
                if (pattern >> i & 1) kappa += std::llround(con.form.indicator[i]);
            }
            if (kappa > std::llround(con.rhs)) return false;
        } else {
            double lo = 0.0, hi = 0.0;
            for (Index i : p.incidence[static_cast<std::size_t>(r)]) {
                const double vz = pattern >> i & 1 ? con.form.indicator[i] : 0.0;
                lo += vz;
                hi += vz;
                if (pattern >> i & 1) {
                    const auto& rb = prep.row_bounds[static_cast<std::size_t>(r)]
                                                    [static_cast<std::size_t>(i)];
                    lo += rb.lin_lo;  // quadratic share bounded below by 0 (PSD)
                    hi += rb.lin_hi + rb.quad_hi;
                }
            }
            if (lo > con.rhs + prep.tol.feas_tol) return false;
            if (con.sense == ConstraintSense::Equal && hi < con.rhs - prep.tol.feas_tol)
                return false;
        }
    }
    if (prune_value) {
        double obj_lo = 0.0;
        for (Index i = 0; i < prep.nb; ++i) {
            if (!(pattern >> i & 1)) continue;
            obj_lo += prep.obj_bounds[0][static_cast<std::size_t>(i)].lin_lo +
                      p.objective.indicator[i];
        }
        if (obj_lo >= best) return false;
    }
    return true;
}

struct PatternSolve {
    bool feasible = false;
    double value = 0.0;
    Eigen::VectorXd x;  // full-length, original coordinates
};

// Continuous restriction with the pattern's blocks on, shifted so the box
// starts at 0, solved by the barrier kernel (phase-1 alone when the
// objective is identically zero).
PatternSolve solve_pattern(const OraclePrep& prep, unsigned long long pattern) {
    const Problem& p = *prep.problem;
    std::vector<Index> on_vars;
    std::vector<Index> pos(static_cast<std::size_t>(p.num_variables()), -1);
    for (Index i = 0; i < prep.nb; ++i) {
        if (!(pattern >> i & 1)) continue;
        for (Index j : p.blocks[static_cast<std::size_t>(i)].variables) {
            pos[static_cast<std::size_t>(j)] = static_cast<Index>(on_vars.size());
            on_vars.push_back(j);
        }
    }
    const auto dim = static_cast<Eigen::Index>(on_vars.size());

    Eigen::VectorXd lower(dim), width(dim);
    for (Eigen::Index t = 0; t < dim; ++t) {
        const auto& v = p.variables[static_cast<std::size_t>(on_vars[static_cast<std::size_t>(t)])];
        if (!std::isfinite(v.lower) || !std::isfinite(v.upper))
            throw UnboundedVariable("oracle requires finite bounds");
        lower[t] = v.lower;
        width[t] = v.upper - v.lower;
    }

    // Assemble a form restricted to the on-blocks in shifted coordinates
    // y = x - lower:  x'Qx + c'x  =  y'Qy + (2Ql + c)'y + l'Ql + c'l.
    auto assemble = [&](const QuadForm& form, Eigen::MatrixXd& Q, Eigen::VectorXd& a, double& c0) {
        Q = Eigen::MatrixXd::Zero(dim, dim);
        a = Eigen::VectorXd::Zero(dim);
        c0 = 0.0;
        for (const auto& bq : form.quad) {
            if (!(pattern >> bq.block & 1)) continue;
            const auto& vars = p.blocks[static_cast<std::size_t>(bq.block)].variables;
            for (std::size_t aa = 0; aa < vars.size(); ++aa) {
                const Index pa = pos[static_cast<std::size_t>(vars[aa])];
                for (std::size_t bb = 0; bb < vars.size(); ++bb) {
                    const Index pb = pos[static_cast<std::size_t>(vars[bb])];
                    const double w = bq.matrix(static_cast<Eigen::Index>(aa),
                                               static_cast<Eigen::Index>(bb));
                    Q(pa, pb) += w;
                    a[pa] += w * lower[pb];
                    a[pb] += w * lower[pa];
                    c0 += w * lower[pa] * lower[pb];
                }
            }
        }
        for (Eigen::Index t = 0; t < dim; ++t) {
            const Index j = on_vars[static_cast<std::size_t>(t)];
            const double d = form.diag[j];
            Q(t, t) += d;
            a[t] += 2.0 * d * lower[t] + form.linear[j];
            c0 += d * lower[t] * lower[t] + form.linear[j] * lower[t];
        }
        for (Index i = 0; i < prep.nb; ++i) {
            if (pattern >> i & 1) c0 += form.indicator[i];
        }
    };

    BlockQcqp bq;
    double obj_c0 = 0.0;
    assemble(p.objective, bq.P, bq.q, obj_c0);
    bq.r = obj_c0;
    bq.upper = width;
    for (Index r = 0; r < p.num_constraints(); ++r) {
        const auto& con = p.constraints[static_cast<std::size_t>(r)];
        if (con.kind != ConstraintKind::MixedInteger) continue;
        Eigen::MatrixXd Q;
        Eigen::VectorXd a;
        double c0 = 0.0;
        assemble(con.form, Q, a, c0);
        const bool has_quad = Q.size() > 0 && Q.cwiseAbs().maxCoeff() > 0.0;
        if (con.sense == ConstraintSense::Equal) {
            bq.linear_rows.push_back({a, con.rhs - c0, con.rhs - c0});
        } else if (has_quad) {
            bq.rows.push_back({Q, a, con.rhs - c0});
        } else {
            bq.linear_rows.push_back({a, -kNoBound, con.rhs - c0});
        }
    }

    PatternSolve out;
    Eigen::VectorXd y;
    if (prep.zero_objective) {
        Phase1Result ph = phase1(bq);
        if (ph.t > prep.tol.feas_tol) return out;
        out.value = bq.r;
        y = ph.x.cwiseMax(Eigen::VectorXd::Zero(dim)).cwiseMin(width);
    } else {
        QcqpResult res = solve(bq);
        if (res.status == QcqpStatus::Infeasible) return out;
        out.value = res.value;
        y = res.x;
    }
    out.feasible = true;
    out.x = Eigen::VectorXd::Zero(p.num_variables());
    for (Eigen::Index t = 0; t < dim; ++t)
        out.x[on_vars[static_cast<std::size_t>(t)]] = lower[t] + y[t];
    return out;
}

struct WorkerBest {
    bool found = false;
    double value = 0.0;
    unsigned long long pattern = 0;
    Eigen::VectorXd x;
    std::size_t examined = 0;
    std::size_t solves = 0;
};

WorkerBest scan_range(const OraclePrep& prep, unsigned long long begin, unsigned long long end,
                      bool stop_at_first) {
    WorkerBest best;
    for (unsigned long long idx = begin; idx < end; ++idx) {
        // Counter order over the free blocks: bit t of the counter drives
        // free_bits[t], so lower-id blocks toggle fastest and ties in value
        // resolve to the smallest full pattern (expand_free is monotone).
        const unsigned long long pattern = expand_free(prep, idx);
        ++best.examined;
        if (!screens_pass(prep, pattern, best.found && !stop_at_first, best.value)) continue;
        ++best.solves;
        PatternSolve ps = solve_pattern(prep, pattern);
        if (!ps.feasible) continue;
        if (!best.found || ps.value < best.value) {
            best.found = true;
            best.value = ps.value;
            best.pattern = pattern;
            best.x = std::move(ps.x);
            if (stop_at_first) return best;
        }
    }
    return best;
}

}  // namespace

OracleResult oracle_solve(const Problem& problem, const OracleOptions& opts) {
    if (!problem.validated) throw std::invalid_argument("oracle_solve: problem not validated");
    if (problem.num_blocks() > 20) throw TooLarge("oracle limited to 20 blocks");

    OracleResult out;
    if (problem.trivially_infeasible) return out;
    const OraclePrep prep = prepare(problem, opts.tol);
    const unsigned long long total = 1ULL << prep.free_bits.size();

    std::vector<WorkerBest> bests;
    if (opts.threads > 1 && !opts.stop_at_first_feasible && total > 64) {
        const auto nt = static_cast<unsigned long long>(
            std::min<long long>(opts.threads, static_cast<long long>(total)));
        std::vector<std::thread> pool;
        bests.resize(nt);
        const unsigned long long chunk = (total + nt - 1) / nt;
        for (unsigned long long w = 0; w < nt; ++w) {
            const unsigned long long b = w * chunk;
            const unsigned long long e = std::min(total, b + chunk);
            pool.emplace_back([&, w, b, e] { bests[w] = scan_range(prep, b, e, false); });
        }
        for (auto& th : pool) th.join();
    } else {
        bests.push_back(scan_range(prep, 0, total, opts.stop_at_first_feasible));
    }

    const WorkerBest* winner = nullptr;
    for (const auto& wb : bests) {
        out.patterns_examined += wb.examined;
        out.continuous_solves += wb.solves;
        if (!wb.found) continue;
        if (winner == nullptr || wb.value < winner->value) winner = &wb;
    }
    if (winner == nullptr) return out;

    out.status = OracleStatus::Optimal;
    out.value = winner->value;
    out.x = winner->x;
    out.z = Eigen::VectorXi::Zero(problem.num_blocks());
    for (Index i = 0; i < problem.num_blocks(); ++i)
        out.z[i] = winner->pattern >> i & 1 ? 1 : 0;
    return out;
}

ComparisonVerdict compare(std::optional<double> solver_value, const OracleResult& oracle,
                          Index num_blocks, const Tolerances& tol) {
    if (oracle.status == OracleStatus::Infeasible)
        return {true, "oracle infeasible: no requirement on the solver"};
    if (!solver_value.has_value())
        return {false, "solver reported infeasible on an instance the oracle solved"};
    const double cap = oracle.value + static_cast<double>(num_blocks) * tol.val_tol;
    if (*solver_value <= cap)
        return {true, "solver value within the superoptimality cap"};
    return {false, "solver value " + std::to_string(*solver_value) + " exceeds oracle value " +
                       std::to_string(oracle.value) + " beyond the allowance"};
}

}  // namespace qib
