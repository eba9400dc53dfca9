#include "qib/pipeline.hpp"

#include <atomic>
#include <exception>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace qib {
namespace {

nlohmann::json report_json(const CheckReport& rep) {
    nlohmann::json j;
    j["objective"] = round_significant(rep.objective);
    j["max_mixed_infeasibility"] = round_significant(rep.max_mixed_infeasibility);
    j["guarantee_bound"] = round_significant(rep.guarantee_bound);
    j["combinatorial_feasible"] = rep.combinatorial_feasible;
    j["within_bound"] = rep.within_bound;
    std::vector<double> slack(rep.slack.data(), rep.slack.data() + rep.slack.size());
    for (double& s : slack) s = round_significant(s);
    j["slack"] = slack;
    return j;
}

nlohmann::json trace_json(const PipelineResult& res) {
    nlohmann::json j;
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& s : res.outcome.stats) {
        nodes.push_back({{"node", s.node},
                         {"table_size", s.table_size},
                         {"table_bound", s.table_bound}});
    }
    j["nodes"] = nodes;
    j["total_states"] = res.outcome.total_states;
    nlohmann::json sketches = nlohmann::json::array();
    for (const auto& set : res.sketch_sets) {
        sketches.push_back({{"block", set.block},
                            {"count", set.sketches.size()},
                            {"keys_examined", set.keys_examined}});
    }
    j["sketches"] = sketches;
    j["decomposition_width"] = res.rbd.width;
    j["decomposition_nodes"] = res.rbd.nodes.size();
    return j;
}

/// Rewrites a decomposition given in original row ids onto the normalized
/// instance: rows dropped during normalization leave their bags, the rest are
/// renamed.  Tree shape is preserved.
TreeDecomposition remap_supplied(const TreeDecomposition& td, Index original_rows,
                                 const NormalizationTransform& t) {
    std::vector<Index> inverse(static_cast<std::size_t>(original_rows), -1);
    for (std::size_t s = 0; s < t.constraint_map.size(); ++s)
        inverse[static_cast<std::size_t>(t.constraint_map[s])] = static_cast<Index>(s);
    TreeDecomposition out;
    out.edges = td.edges;
    out.nodes.reserve(td.nodes.size());
    for (const auto& node : td.nodes) {
        std::vector<Index> bag;
        for (Index r : node.bag) {
            if (r < 0 || r >= original_rows)
                throw InvalidDecomposition("bag of node " + std::to_string(node.id) +
                                           " references unknown constraint " + std::to_string(r));
            if (inverse[static_cast<std::size_t>(r)] >= 0)
                bag.push_back(inverse[static_cast<std::size_t>(r)]);
        }
        std::sort(bag.begin(), bag.end());
        out.nodes.push_back({node.id, std::move(bag)});
    }
    return out;
}

void enumerate_all_sketches(const Problem& np, const RunConfig& cfg,
                            std::vector<SketchSet>& out) {
    const Index nb = np.num_blocks();
    out.resize(static_cast<std::size_t>(nb));
    SketchOptions sopts;
    sopts.tol = cfg.tol;
    const int workers = std::max(1, std::min<int>(cfg.threads, static_cast<int>(nb)));
    if (workers <= 1) {
        for (Index i = 0; i < nb; ++i)
            out[static_cast<std::size_t>(i)] = enumerate_sketches(np, i, cfg.eps, sopts);
        return;
    }
    std::atomic<Index> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(nb));
    auto run = [&]() {
        for (Index i = next.fetch_add(1); i < nb; i = next.fetch_add(1)) {
            try {
                out[static_cast<std::size_t>(i)] = enumerate_sketches(np, i, cfg.eps, sopts);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& th : pool) th.join();
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);
}

}  // namespace

AuditResult audit_point(const Problem& original, const Eigen::VectorXd& x,
                        const Eigen::VectorXi& z, Epsilon eps, const Tolerances& tol) {
    AuditResult out;
    const Problem validated = original.validated ? original : validate_problem(original, tol);
    const NormalizedProblem nr = normalize(validated, tol);
    const Problem& np = nr.problem;
    out.report["epsilon"] = round_significant(eps.value());
    out.report["warnings"] = np.warnings;
    if (np.trivially_infeasible) {
        out.report["reason"] = "a constraint reduces to an unsatisfiable constant";
        return out;
    }
    if (x.size() != validated.num_variables() || z.size() != validated.num_blocks())
        throw std::invalid_argument("audit_point: dimension mismatch");

    // The guarantee bound is defined on the rescaled instance, whose rows
    // have unit coefficient 1-norm.  A point honoring the as-given off-state
    // (zeros in switched-off blocks) is judged by its as-given violations
    // divided by each row's rescaling factor -- numerically the same yard-
    // stick, without forcing the point through the off-state remapping.
    try {
        const CheckReport rep = check_solution(validated, x, z, eps, tol);
        out.report["original"] = report_json(rep);
        const auto& t = nr.transform;
        nlohmann::json scaled;
        double worst = 0.0, bound = 0.0;
        std::vector<double> sslack;
        for (std::size_t s = 0; s < t.constraint_map.size(); ++s) {
            const auto r = static_cast<std::size_t>(t.constraint_map[s]);
            const auto& con = validated.constraints[r];
            const double sl = rep.slack[r] / t.constraint_scale[s];
            sslack.push_back(round_significant(sl));
            if (con.kind != ConstraintKind::MixedInteger) continue;
            worst = std::max(worst, con.sense == ConstraintSense::Equal ? std::abs(sl)
                                                                        : std::max(-sl, 0.0));
            bound = std::max(bound, eps.value() * static_cast<double>(np.incidence[s].size()));
        }
        scaled["objective"] = round_significant(rep.objective - t.objective_offset);
        scaled["max_mixed_infeasibility"] = round_significant(worst);
        scaled["guarantee_bound"] = round_significant(bound);
        scaled["combinatorial_feasible"] = rep.combinatorial_feasible;
        scaled["within_bound"] =
            rep.combinatorial_feasible && worst <= bound + tol.feas_tol;
        scaled["slack"] = sslack;
        out.report["normalized"] = scaled;
        out.pass = scaled["within_bound"].get<bool>();
        return out;
    } catch (const IndicatorViolation&) {
        // Fall through: the point uses the rescaled off-state convention.
    }

    Eigen::VectorXd xn(np.num_variables());
    for (Index j = 0; j < validated.num_variables(); ++j) {
        const Index jn = nr.transform.to_normalized[static_cast<std::size_t>(j)];
        if (jn < 0) continue;  // fixed variable: the box precondition covered it
        const double mapped = (x[j] - nr.transform.shift[j]) / nr.transform.scale[j];
        xn[jn] = std::min(1.0, std::max(0.0, mapped));  // absorb mapping roundoff
    }
    try {
        const CheckReport repn = check_solution(np, xn, z, eps, tol);
        out.report["normalized"] = report_json(repn);
        out.pass = repn.within_bound;
    } catch (const IndicatorViolation& e) {
        out.report["normalized"] = std::string("indicator violation: ") + e.what();
    }
    out.report["original"] =
        out.pass
            ? "audit skipped: an off block sits at a shifted lower bound in original coordinates"
            : "audit skipped: the point violates the indicator semantics";
    return out;
}

PipelineResult run_pipeline(const Problem& original, const RunConfig& cfg) {
    PipelineResult res;
    const Problem validated = original.validated ? original : validate_problem(original, cfg.tol);
    res.normalized = normalize(validated, cfg.tol);
    const Problem& np = res.normalized.problem;
    const NormalizationTransform& transform = res.normalized.transform;

    res.solution.status = "infeasible";
    res.solution.report["epsilon"] = cfg.eps.value();
    res.solution.report["warnings"] = np.warnings;

    if (np.trivially_infeasible) {
        res.solution.report["reason"] = "a constraint reduces to an unsatisfiable constant";
        return res;
    }

    if (np.num_blocks() == 0) {
        // Nothing to decide: the instance is empty apart from substituted-out
        // fixed variables.
        auto den = denormalize_solution(transform, Eigen::VectorXd::Zero(0), 0.0);
        res.solution.status = "solution";
        res.solution.x = den.x;
        res.solution.z = Eigen::VectorXi::Zero(0);
        res.solution.objective = den.objective;
        res.solution.combinatorial_feasible = true;
        return res;
    }

    const IntersectionGraph graph = build_intersection_graph(np);
    std::optional<TreeDecomposition> supplied;
    if (cfg.decomposition.has_value())
        supplied = remap_supplied(*cfg.decomposition, validated.num_constraints(), transform);
    const TreeDecomposition td = tree_decomposition(graph, supplied);
    res.rbd = normalize_decomposition(td, np, graph);

    enumerate_all_sketches(np, cfg, res.sketch_sets);

    DpContext ctx{np, res.rbd, cfg.eps, cfg.tol};
    res.outcome = run_dp(ctx, res.sketch_sets);
    if (cfg.trace) res.solution.report["trace"] = trace_json(res);
    if (res.outcome.status == DpStatus::Infeasible) {
        res.solution.report["reason"] = "no consistent table state survives";
        return res;
    }

    res.certificate = extract_certificate(ctx, res.sketch_sets, res.outcome);
    const Certificate& cert = *res.certificate;
    auto den = denormalize_solution(transform, cert.x, cert.value);

    res.solution.status = "solution";
    res.solution.x = den.x;
    res.solution.z = cert.z;
    res.solution.objective = den.objective;
    res.solution.report["normalized"] = report_json(cert.report);

    // Audit the mapped-back point against the instance as given.  When a
    // shifted off block makes the point violate the original indicator
    // semantics (see the normalize warning), fall back to the rescaled-space
    // audit instead of failing the solve.
    try {
        CheckReport orig = check_solution(validated, den.x, cert.z, cfg.eps, cfg.tol);
        res.solution.max_mixed_infeasibility = orig.max_mixed_infeasibility;
        res.solution.combinatorial_feasible = orig.combinatorial_feasible;
        res.solution.report["original"] = report_json(orig);
    } catch (const IndicatorViolation&) {
        res.solution.max_mixed_infeasibility = cert.report.max_mixed_infeasibility;
        res.solution.combinatorial_feasible = cert.report.combinatorial_feasible;
        res.solution.report["original"] =
            "audit skipped: an off block sits at a shifted lower bound in original coordinates";
    }
    return res;
}

}  // namespace qib
