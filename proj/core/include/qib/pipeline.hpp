#pragma once

#include <optional>
#include <vector>

#include "qib/dp.hpp"
#include "qib/epsilon.hpp"
#include "qib/graph.hpp"
#include "qib/instance_io.hpp"
#include "qib/model.hpp"
#include "qib/sketch.hpp"
#include "qib/types.hpp"
#include "qib/verify.hpp"

namespace qib {

/// End-to-end solver configuration.
struct RunConfig {
    Epsilon eps = Epsilon::from_denominator(10);
    /// Supplied decomposition of the constraint intersection graph; when
    /// absent the min-fill heuristic builds one.
    std::optional<TreeDecomposition> decomposition;
    Tolerances tol;
    int threads = 1;
    bool trace = false;  ///< attach per-node table statistics to the report
};

/// Everything the solver produced, from the normalized model to the final
/// denormalized solution.  `solution` is always populated (status
/// "solution" or "infeasible"); the other fields hold whenever the stage
/// ran (an early infeasibility verdict leaves later stages empty).
struct PipelineResult {
    NormalizedProblem normalized;
    RootedBinaryDecomposition rbd;
    std::vector<SketchSet> sketch_sets;
    DpOutcome outcome;
    std::optional<Certificate> certificate;
    Solution solution;
};

/// Validates, normalizes, decomposes, enumerates block profiles, runs the
/// table pass, extracts and audits the certificate, and maps it back to the
/// original coordinates.  Deterministic for a fixed config.
PipelineResult run_pipeline(const Problem& original, const RunConfig& cfg);

/// Verdict of auditing a claimed point against an instance.  `pass` is the
/// discretization guarantee judged on the rescaled instance (unit row
/// coefficient 1-norms, where the bound is defined); the report also carries
/// the as-given coordinates audit, or a note when the rescaled off-state
/// makes that audit inapplicable.
struct AuditResult {
    bool pass = false;
    nlohmann::json report;
};

/// Audits (x, z) through the same rescaling pipeline the solver uses, so a
/// solution file written by the solver always passes its own audit.  Throws
/// std::invalid_argument on malformed points (sizes, boxes, non-binary z).
AuditResult audit_point(const Problem& original, const Eigen::VectorXd& x,
                        const Eigen::VectorXi& z, Epsilon eps, const Tolerances& tol = {});

}  // namespace qib
