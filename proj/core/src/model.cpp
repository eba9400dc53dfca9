#include "qib/model.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>

namespace qib {

namespace {

std::string join_messages(const std::vector<std::string>& messages) {
    std::ostringstream out;
    out << "problem validation failed with " << messages.size() << " violation(s):";
    for (const auto& m : messages) out << "\n  - " << m;
    return out.str();
}

double env_double(const char* name, double fallback) {
    const char* raw = std::getenv(name);
    if (raw == nullptr || *raw == '\0') return fallback;
    char* end = nullptr;
    const double parsed = std::strtod(raw, &end);
    if (end == raw || !std::isfinite(parsed) || parsed <= 0.0) return fallback;
    return parsed;
}

bool is_zero_matrix(const Eigen::MatrixXd& m) { return m.size() == 0 || m.cwiseAbs().maxCoeff() == 0.0; }

/// Pads a form's dense vectors to full length so later code can index freely.
void pad_form(QuadForm& form, Index n, Index num_blocks, std::vector<std::string>& violations,
              const std::string& where) {
    auto fix = [&](Eigen::VectorXd& v, Index want, const char* field) {
        if (v.size() == 0) {
            v = Eigen::VectorXd::Zero(want);
        } else if (v.size() != want) {
            std::ostringstream msg;
            msg << where << ": " << field << " has length " << v.size() << ", expected " << want;
            violations.push_back(msg.str());
            v.conservativeResizeLike(Eigen::VectorXd::Zero(want));
        }
    };
    fix(form.diag, n, "diag");
    fix(form.linear, n, "linear");
    fix(form.indicator, num_blocks, "indicator");
}

bool form_has_finite_entries(const QuadForm& form) {
    for (const auto& bq : form.quad)
        if (!bq.matrix.allFinite()) return false;
    return form.diag.allFinite() && form.linear.allFinite() && form.indicator.allFinite();
}

}  // namespace

Tolerances tolerances_from_env() {
    Tolerances t;
    t.psd_tol = env_double("QIB_PSD_TOL", t.psd_tol);
    t.feas_tol = env_double("QIB_FEAS_TOL", t.feas_tol);
    t.val_tol = env_double("QIB_VAL_TOL", t.val_tol);
    t.kkt_tol = env_double("QIB_KKT_TOL", t.kkt_tol);
    t.cons_tol = env_double("QIB_CONS_TOL", t.cons_tol);
    return t;
}

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error(join_messages(violations)), violations_(std::move(violations)) {}

Problem validate_problem(const Problem& problem, const Tolerances& tol) {
    Problem p = problem;
    std::vector<std::string> bad;
    const Index n = p.num_variables();
    const Index nb = p.num_blocks();

    for (Index j = 0; j < n; ++j) {
        const Variable& v = p.variables[static_cast<std::size_t>(j)];
        if (v.id != j) {
            std::ostringstream msg;
            msg << "variable at position " << j << " has id " << v.id << "; ids must be 0.." << n - 1
                << " in order";
            bad.push_back(msg.str());
        }
        if (std::isnan(v.lower) || std::isnan(v.upper) || v.lower > v.upper) {
            std::ostringstream msg;
            msg << "variable " << j << " has invalid bounds [" << v.lower << ", " << v.upper << "]";
            bad.push_back(msg.str());
        }
        if (v.block < 0 || v.block >= nb) {
            std::ostringstream msg;
            msg << "variable " << j << " references unknown block " << v.block;
            bad.push_back(msg.str());
        }
    }

    p.block_of.assign(static_cast<std::size_t>(n), -1);
    p.position_in_block.assign(static_cast<std::size_t>(n), -1);
    for (Index i = 0; i < nb; ++i) {
        const Block& b = p.blocks[static_cast<std::size_t>(i)];
        if (b.id != i) {
            std::ostringstream msg;
            msg << "block at position " << i << " has id " << b.id << "; ids must be 0.." << nb - 1
                << " in order";
            bad.push_back(msg.str());
        }
        for (std::size_t pos = 0; pos < b.variables.size(); ++pos) {
            const Index j = b.variables[pos];
            if (j < 0 || j >= n) {
                std::ostringstream msg;
                msg << "block " << i << " lists unknown variable " << j;
                bad.push_back(msg.str());
                continue;
            }
            if (p.block_of[static_cast<std::size_t>(j)] != -1) {
                std::ostringstream msg;
                msg << "variable " << j << " appears in more than one block";
                bad.push_back(msg.str());
                continue;
            }
            p.block_of[static_cast<std::size_t>(j)] = i;
            p.position_in_block[static_cast<std::size_t>(j)] = static_cast<Index>(pos);
        }
    }
    for (Index j = 0; j < n; ++j) {
        if (p.block_of[static_cast<std::size_t>(j)] == -1) {
            std::ostringstream msg;
            msg << "variable " << j << " is not listed in any block";
            bad.push_back(msg.str());
        } else if (j < static_cast<Index>(p.variables.size()) &&
                   p.variables[static_cast<std::size_t>(j)].block != p.block_of[static_cast<std::size_t>(j)]) {
            std::ostringstream msg;
            msg << "variable " << j << " declares block " << p.variables[static_cast<std::size_t>(j)].block
                << " but block " << p.block_of[static_cast<std::size_t>(j)] << " lists it";
            bad.push_back(msg.str());
        }
    }
    if (!bad.empty()) throw ValidationError(std::move(bad));  // ids are unusable beyond this point

    // Canonicalize every form: pad vectors, symmetrize matrices, check
    // convexity requirements.
    auto check_quadratic = [&](QuadForm& form, const std::string& where, bool need_psd) {
        pad_form(form, n, nb, bad, where);
        if (!form_has_finite_entries(form)) bad.push_back(where + ": non-finite coefficient");
        std::vector<bool> seen(static_cast<std::size_t>(nb), false);
        for (auto& bq : form.quad) {
            if (bq.block < 0 || bq.block >= nb) {
                std::ostringstream msg;
                msg << where << ": quadratic term references unknown block " << bq.block;
                bad.push_back(msg.str());
                continue;
            }
            if (seen[static_cast<std::size_t>(bq.block)]) {
                std::ostringstream msg;
                msg << where << ": duplicate quadratic term for block " << bq.block;
                bad.push_back(msg.str());
            }
            seen[static_cast<std::size_t>(bq.block)] = true;
            const auto dim =
                static_cast<Eigen::Index>(p.blocks[static_cast<std::size_t>(bq.block)].variables.size());
            if (bq.matrix.rows() != dim || bq.matrix.cols() != dim) {
                std::ostringstream msg;
                msg << where << ": matrix for block " << bq.block << " is " << bq.matrix.rows() << "x"
                    << bq.matrix.cols() << ", expected " << dim << "x" << dim;
                bad.push_back(msg.str());
                continue;
            }
            bq.matrix = ((bq.matrix + bq.matrix.transpose()) / 2.0).eval();
            if (need_psd && dim > 0 && !is_zero_matrix(bq.matrix)) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(bq.matrix,
                                                                   Eigen::EigenvaluesOnly);
                if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -tol.psd_tol) {
                    std::ostringstream msg;
                    msg << where << ": matrix for block " << bq.block << " is not positive semidefinite"
                        << " (min eigenvalue "
                        << (eig.info() == Eigen::Success ? eig.eigenvalues().minCoeff()
                                                         : std::nan(""))
                        << ")";
                    bad.push_back(msg.str());
                }
            }
        }
        if (need_psd) {
            for (Index j = 0; j < n; ++j) {
                double& d = form.diag[j];
                if (d < -tol.psd_tol) {
                    std::ostringstream msg;
                    msg << where << ": diagonal coefficient for variable " << j << " is negative (" << d
                        << ")";
                    bad.push_back(msg.str());
                } else if (d < 0.0) {
                    d = 0.0;  // snap round-off level negatives
                }
            }
        }
    };

    check_quadratic(p.objective, "objective", /*need_psd=*/true);
    for (Index r = 0; r < p.num_constraints(); ++r) {
        Constraint& c = p.constraints[static_cast<std::size_t>(r)];
        std::ostringstream wh;
        wh << "constraint " << r;
        const std::string where = wh.str();
        if (c.kind == ConstraintKind::MixedInteger) {
            check_quadratic(c.form, where, /*need_psd=*/true);
            if (c.sense == ConstraintSense::Equal) {
                bool has_quad = false;
                for (const auto& bq : c.form.quad)
                    if (!is_zero_matrix(bq.matrix)) has_quad = true;
                if (c.form.diag.size() > 0 && c.form.diag.cwiseAbs().maxCoeff() != 0.0) has_quad = true;
                if (has_quad)
                    bad.push_back(where + ": equality rows must be purely linear in x");
            }
        } else {
            check_quadratic(c.form, where, /*need_psd=*/false);
            bool has_continuous = false;
            for (const auto& bq : c.form.quad)
                if (!is_zero_matrix(bq.matrix)) has_continuous = true;
            if (c.form.diag.size() > 0 && c.form.diag.cwiseAbs().maxCoeff() != 0.0) has_continuous = true;
            if (c.form.linear.size() > 0 && c.form.linear.cwiseAbs().maxCoeff() != 0.0)
                has_continuous = true;
            if (has_continuous)
                bad.push_back(where + ": combinatorial rows may not touch continuous variables");
            if (c.sense != ConstraintSense::LessEqual)
                bad.push_back(where + ": combinatorial rows must have sense <=");
            for (Index i = 0; i < nb; ++i) {
                double& v = c.form.indicator[i];
                const double snapped = std::round(v);
                if (std::abs(v - snapped) > 1e-9 || std::abs(snapped) > 1.0) {
                    std::ostringstream msg;
                    msg << where << ": indicator coefficient for block " << i << " is " << v
                        << ", expected -1, 0 or +1";
                    bad.push_back(msg.str());
                } else {
                    v = snapped;
                }
            }
            const double floored = std::floor(c.rhs + 1e-9);
            if (std::abs(c.rhs - floored) > 1e-9) {
                std::ostringstream msg;
                msg << where << ": non-integral combinatorial rhs " << c.rhs << " floored to "
                    << floored;
                p.warnings.push_back(msg.str());
            }
            c.rhs = floored;
        }
        if (std::isnan(c.rhs) || std::isinf(c.rhs)) bad.push_back(where + ": rhs is not finite");
    }

    // Incidence: a block touches a row through a nonzero quadratic term, a
    // nonzero diagonal/linear coefficient of a member variable, or a nonzero
    // indicator coefficient.
    p.incidence.assign(static_cast<std::size_t>(p.num_constraints()), {});
    for (Index r = 0; r < p.num_constraints(); ++r) {
        const Constraint& c = p.constraints[static_cast<std::size_t>(r)];
        std::vector<bool> touches(static_cast<std::size_t>(nb), false);
        for (const auto& bq : c.form.quad)
            if (!is_zero_matrix(bq.matrix)) touches[static_cast<std::size_t>(bq.block)] = true;
        for (Index j = 0; j < n; ++j) {
            if ((c.form.diag.size() > j && c.form.diag[j] != 0.0) ||
                (c.form.linear.size() > j && c.form.linear[j] != 0.0))
                touches[static_cast<std::size_t>(p.block_of[static_cast<std::size_t>(j)])] = true;
        }
        for (Index i = 0; i < nb; ++i)
            if (c.form.indicator.size() > i && c.form.indicator[i] != 0.0)
                touches[static_cast<std::size_t>(i)] = true;
        auto& inc = p.incidence[static_cast<std::size_t>(r)];
        for (Index i = 0; i < nb; ++i)
            if (touches[static_cast<std::size_t>(i)]) inc.push_back(i);
        if (inc.empty()) {
            std::ostringstream msg;
            msg << "constraint " << r << " has no nonzero coefficients";
            bad.push_back(msg.str());
        }
    }

    if (!p.forced_on.empty() && p.forced_on.size() != static_cast<std::size_t>(nb))
        bad.push_back("forced_on has wrong length");

    if (!bad.empty()) throw ValidationError(std::move(bad));
    p.validated = true;
    return p;
}

namespace detail {

double evaluate_form(const Problem& problem, const QuadForm& form, const Eigen::VectorXd& x,
                     const Eigen::VectorXd& z) {
    double value = 0.0;
    for (const auto& bq : form.quad) {
        const auto& vars = problem.blocks[static_cast<std::size_t>(bq.block)].variables;
        Eigen::VectorXd xb(static_cast<Eigen::Index>(vars.size()));
        for (std::size_t a = 0; a < vars.size(); ++a) xb[static_cast<Eigen::Index>(a)] = x[vars[a]];
        value += xb.dot(bq.matrix * xb);
    }
    if (form.diag.size() > 0) value += form.diag.dot(x.cwiseProduct(x));
    if (form.linear.size() > 0) value += form.linear.dot(x);
    if (form.indicator.size() > 0) value += form.indicator.dot(z);
    return value;
}

double coefficient_norm(const QuadForm& form) {
    double norm = 0.0;
    for (const auto& bq : form.quad) norm += bq.matrix.cwiseAbs().sum();
    if (form.diag.size() > 0) norm += form.diag.cwiseAbs().sum();
    if (form.linear.size() > 0) norm += form.linear.cwiseAbs().sum();
    if (form.indicator.size() > 0) norm += form.indicator.cwiseAbs().sum();
    return norm;
}

}  // namespace detail

double evaluate_constraint(const Problem& problem, Index r, const Eigen::VectorXd& x,
                           const Eigen::VectorXd& z) {
    return detail::evaluate_form(problem, problem.constraints[static_cast<std::size_t>(r)].form, x, z);
}

double evaluate_objective(const Problem& problem, const Eigen::VectorXd& x,
                          const Eigen::VectorXd& z) {
    return detail::evaluate_form(problem, problem.objective, x, z);
}

namespace {

/// Applies the affine substitution x_j = shift_j + scale_j * x'_{map(j)} to a
/// form; returns the rewritten form over the new variables plus the constant
/// term produced.
std::pair<QuadForm, double> substitute_form(const Problem& p, const QuadForm& form,
                                            const Eigen::VectorXd& shift,
                                            const Eigen::VectorXd& scale,
                                            const std::vector<Index>& to_norm, Index n_new,
                                            const std::vector<std::vector<Index>>& new_block_vars) {
    QuadForm out;
    out.diag = Eigen::VectorXd::Zero(n_new);
    out.linear = Eigen::VectorXd::Zero(n_new);
    out.indicator = form.indicator;
    double constant = 0.0;

    for (const auto& bq : form.quad) {
        if (is_zero_matrix(bq.matrix)) continue;
        const auto& vars = p.blocks[static_cast<std::size_t>(bq.block)].variables;
        const auto& new_vars = new_block_vars[static_cast<std::size_t>(bq.block)];
        const auto dim_old = static_cast<Eigen::Index>(vars.size());
        const auto dim_new = static_cast<Eigen::Index>(new_vars.size());
        Eigen::VectorXd s(dim_old);
        Eigen::MatrixXd map = Eigen::MatrixXd::Zero(dim_old, dim_new);
        Eigen::Index next = 0;
        for (Eigen::Index a = 0; a < dim_old; ++a) {
            const Index j = vars[static_cast<std::size_t>(a)];
            s[a] = shift[j];
            if (to_norm[static_cast<std::size_t>(j)] >= 0) map(a, next++) = scale[j];
        }
        constant += s.dot(bq.matrix * s);
        if (dim_new > 0) {
            Eigen::MatrixXd reduced = map.transpose() * bq.matrix * map;
            Eigen::VectorXd cross = 2.0 * (map.transpose() * (bq.matrix * s));
            for (Eigen::Index b = 0; b < dim_new; ++b)
                out.linear[new_vars[static_cast<std::size_t>(b)]] += cross[b];
            if (!is_zero_matrix(reduced)) out.quad.push_back({bq.block, std::move(reduced)});
        }
    }
    for (Index j = 0; j < p.num_variables(); ++j) {
        const double d = form.diag.size() > j ? form.diag[j] : 0.0;
        const double c = form.linear.size() > j ? form.linear[j] : 0.0;
        if (d == 0.0 && c == 0.0) continue;
        const Index jn = to_norm[static_cast<std::size_t>(j)];
        const double s = shift[j];
        if (jn < 0) {
            constant += d * s * s + c * s;
        } else {
            const double w = scale[j];
            out.diag[jn] += d * w * w;
            out.linear[jn] += 2.0 * d * s * w + c * w;
            constant += d * s * s + c * s;
        }
    }
    return {std::move(out), constant};
}

void scale_form(QuadForm& form, double factor) {
    for (auto& bq : form.quad) bq.matrix *= factor;
    form.diag *= factor;
    form.linear *= factor;
    form.indicator *= factor;
}

}  // namespace

NormalizedProblem normalize(const Problem& problem, const Tolerances& tol) {
    const Problem p = problem.validated ? problem : validate_problem(problem, tol);
    const Index n = p.num_variables();
    const Index nb = p.num_blocks();

    for (Index j = 0; j < n; ++j) {
        const Variable& v = p.variables[static_cast<std::size_t>(j)];
        if (std::isinf(v.lower) || std::isinf(v.upper)) {
            std::ostringstream msg;
            msg << "variable " << j << " has infinite bound(s) [" << v.lower << ", " << v.upper
                << "]; normalization requires finite bounds";
            throw UnboundedVariable(msg.str());
        }
    }

    NormalizationTransform t;
    t.shift = Eigen::VectorXd::Zero(n);
    t.scale = Eigen::VectorXd::Zero(n);
    t.to_normalized.assign(static_cast<std::size_t>(n), -1);
    for (Index j = 0; j < n; ++j) {
        const Variable& v = p.variables[static_cast<std::size_t>(j)];
        t.shift[j] = v.lower;
        if (v.upper > v.lower) {
            t.scale[j] = v.upper - v.lower;
            t.to_normalized[static_cast<std::size_t>(j)] = static_cast<Index>(t.to_original.size());
            t.to_original.push_back(j);
        }
    }
    const Index n_new = static_cast<Index>(t.to_original.size());

    Problem q;
    q.variables.reserve(static_cast<std::size_t>(n_new));
    for (Index jn = 0; jn < n_new; ++jn) {
        const Index j = t.to_original[static_cast<std::size_t>(jn)];
        q.variables.push_back({jn, 0.0, 1.0, p.block_of[static_cast<std::size_t>(j)]});
    }
    std::vector<std::vector<Index>> new_block_vars(static_cast<std::size_t>(nb));
    q.blocks.resize(static_cast<std::size_t>(nb));
    for (Index i = 0; i < nb; ++i) {
        q.blocks[static_cast<std::size_t>(i)].id = i;
        for (Index j : p.blocks[static_cast<std::size_t>(i)].variables) {
            const Index jn = t.to_normalized[static_cast<std::size_t>(j)];
            if (jn >= 0) {
                q.blocks[static_cast<std::size_t>(i)].variables.push_back(jn);
                new_block_vars[static_cast<std::size_t>(i)].push_back(jn);
            }
        }
    }

    q.forced_on.assign(static_cast<std::size_t>(nb), 0);
    for (Index j = 0; j < n; ++j) {
        if (t.to_normalized[static_cast<std::size_t>(j)] < 0 && t.shift[j] != 0.0)
            q.forced_on[static_cast<std::size_t>(p.block_of[static_cast<std::size_t>(j)])] = 1;
    }

    auto [obj, obj_const] =
        substitute_form(p, p.objective, t.shift, t.scale, t.to_normalized, n_new, new_block_vars);
    q.objective = std::move(obj);
    t.objective_offset = obj_const;

    for (Index r = 0; r < p.num_constraints(); ++r) {
        const Constraint& c = p.constraints[static_cast<std::size_t>(r)];
        if (c.kind == ConstraintKind::Combinatorial) {
            Constraint copy = c;
            copy.form.quad.clear();  // all-zero by validation; re-padded to the new size
            copy.form.diag.resize(0);
            copy.form.linear.resize(0);
            q.constraints.push_back(std::move(copy));
            t.constraint_scale.push_back(1.0);
            t.constraint_map.push_back(r);
            continue;
        }
        auto [form, constant] =
            substitute_form(p, c.form, t.shift, t.scale, t.to_normalized, n_new, new_block_vars);
        double rhs = c.rhs - constant;
        double sigma = detail::coefficient_norm(form);
        if (sigma <= 1e-14) {
            // The row no longer mentions any variable or indicator: it is a
            // plain numeric statement, either vacuous or unsatisfiable.
            const bool holds = c.sense == ConstraintSense::LessEqual ? (rhs >= -tol.feas_tol)
                                                                     : (std::abs(rhs) <= tol.feas_tol);
            if (!holds) q.trivially_infeasible = true;
            continue;
        }
        if (std::abs(sigma - 1.0) <= 1e-12) {
            sigma = 1.0;  // keep already-normalized rows bit-identical
        } else {
            scale_form(form, 1.0 / sigma);
            rhs /= sigma;
        }
        q.constraints.push_back({c.kind, c.sense, std::move(form), rhs});
        t.constraint_scale.push_back(sigma);
        t.constraint_map.push_back(r);
    }

    q.warnings = p.warnings;
    // Rescaling sends each box to [0,1], so a block that may switch off and
    // has a variable with nonzero lower bound changes meaning: its off-state
    // now pins the rescaled variable to 0, i.e. the original lower-bound
    // corner rather than the original 0.  Surface that instead of hiding it.
    for (Index i = 0; i < nb; ++i) {
        if (q.forced_on[static_cast<std::size_t>(i)]) continue;
        for (Index j : p.blocks[static_cast<std::size_t>(i)].variables) {
            if (t.to_normalized[static_cast<std::size_t>(j)] >= 0 && t.shift[j] != 0.0) {
                std::ostringstream msg;
                msg << "block " << i << ": nonzero lower bound shifted to 0; the off-state of the"
                    << " rescaled problem corresponds to the lower-bound corner of the original box";
                q.warnings.push_back(msg.str());
                break;
            }
        }
    }
    const bool infeasible_flag = q.trivially_infeasible;
    Problem validated = validate_problem(q, tol);
    validated.trivially_infeasible = infeasible_flag;
    return {std::move(validated), std::move(t)};
}

DenormalizedSolution denormalize_solution(const NormalizationTransform& transform,
                                          const Eigen::VectorXd& x_norm, double objective_norm) {
    const auto n = static_cast<Eigen::Index>(transform.to_normalized.size());
    DenormalizedSolution out;
    out.x = Eigen::VectorXd::Zero(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Index jn = transform.to_normalized[static_cast<std::size_t>(j)];
        out.x[j] = transform.shift[j] + (jn >= 0 ? transform.scale[j] * x_norm[jn] : 0.0);
    }
    out.objective = objective_norm + transform.objective_offset;
    return out;
}

Eigen::VectorXd normalize_point(const NormalizationTransform& transform,
                                const Eigen::VectorXd& x_orig) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(transform.to_original.size()));
    for (std::size_t jn = 0; jn < transform.to_original.size(); ++jn) {
        const Index j = transform.to_original[jn];
        out[static_cast<Eigen::Index>(jn)] = (x_orig[j] - transform.shift[j]) / transform.scale[j];
    }
    return out;
}

}  // namespace qib
