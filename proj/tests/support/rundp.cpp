#include "support/rundp.hpp"

namespace testsupport {

SolveRun run_solver(const qib::Problem& normalized, qib::Epsilon eps, const qib::Tolerances& tol) {
    SolveRun run;
    run.graph = qib::build_intersection_graph(normalized);
    const qib::TreeDecomposition td = qib::tree_decomposition(run.graph);
    run.rbd = qib::normalize_decomposition(td, normalized, run.graph);

    qib::SketchOptions opts;
    opts.tol = tol;
    for (qib::Index i = 0; i < normalized.num_blocks(); ++i)
        run.sketch_sets.push_back(qib::enumerate_sketches(normalized, i, eps, opts));

    const qib::DpContext ctx{normalized, run.rbd, eps, tol};
    run.outcome = qib::run_dp(ctx, run.sketch_sets);
    if (run.outcome.status == qib::DpStatus::Solution)
        run.certificate = qib::extract_certificate(ctx, run.sketch_sets, run.outcome);
    return run;
}

}  // namespace testsupport
