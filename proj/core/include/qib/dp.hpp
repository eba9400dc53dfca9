#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qib/epsilon.hpp"
#include "qib/graph.hpp"
#include "qib/model.hpp"
#include "qib/sketch.hpp"
#include "qib/types.hpp"
#include "qib/verify.hpp"

namespace qib {

/// Table key at a decomposition node: per in-scope mixed row, the accumulated
/// cell-index sum of the blocks already decided below the node; per in-scope
/// combinatorial row, the accumulated integer indicator sum.  Layouts follow
/// the node's sorted mixed_rows / comb_rows lists.
struct StateKey {
    std::vector<int> k_sum;
    std::vector<int> kappa_sum;

    friend auto operator<=>(const StateKey&, const StateKey&) = default;
};

/// Provenance of a table entry, for certificate extraction.
struct Backpointer {
    enum class Kind : std::uint8_t { Leaf, OneChild, TwoChildren } kind = Kind::Leaf;
    /// Leaf: index into the block's SketchSet.
    std::size_t sketch_index = 0;
    /// OneChild / TwoChildren: minimizing child key(s).
    StateKey child;
    StateKey child2;
};

struct StateEntry {
    double value = 0.0;
    Backpointer bp;
};

struct StateTable {
    Index node = -1;
    std::map<StateKey, StateEntry> states;
};

struct DpContext {
    const Problem& problem;
    const RootedBinaryDecomposition& rbd;
    Epsilon eps;
    Tolerances tol;
};

/// Builds the leaf table from the block's sketch set: one state per sketch,
/// cell indices of rows in the leaf bag copied through, indicator sums from
/// delta; equal keys keep the smaller value.
StateTable init_leaf(const DpContext& ctx, Index node, const SketchSet& sketches);

/// Drops states that violate a row finalized at `node`: for a mixed <= row
/// the accumulated cell lower bound eps*k_sum must not exceed rhs; for a
/// mixed equality row the cell upper bound eps*(k_sum + #incident blocks)
/// must also reach rhs; combinatorial rows require kappa_sum <= rhs exactly.
StateTable filter_consistent(const DpContext& ctx, Index node, StateTable table);

/// Reindexes a child table onto node `t` (bag a superset relation in either
/// direction): rows leaving scope are projected away (min over values), rows
/// entering scope start at 0.
StateTable lift_one_child(const DpContext& ctx, Index t, const StateTable& child);

/// Combines the two child tables of `t`: value adds; cell sums of shared
/// mixed rows add with saturation at the grid floor (sums above the grid top
/// are discarded — no block assignment can realize them); indicator sums add
/// exactly.
StateTable merge_two_children(const DpContext& ctx, Index t, const StateTable& left,
                              const StateTable& right);

enum class DpStatus { Solution, Infeasible };

struct NodeStats {
    Index node = -1;
    std::size_t table_size = 0;
    double table_bound = 0.0;  ///< theoretical cap for this node's table
};

struct DpOutcome {
    DpStatus status = DpStatus::Infeasible;
    double value = 0.0;
    StateKey root_key;
    std::vector<StateTable> tables;  ///< indexed by node id
    std::vector<NodeStats> stats;    ///< per node, post-order
    std::size_t total_states = 0;
};

/// Bottom-up pass over the decomposition.  Short-circuits to Infeasible as
/// soon as some node's table filters to empty.  Table sizes are checked
/// against the theoretical bound (grid_size^#mixed * prod(#blocks+1)); an
/// excess throws std::logic_error since it indicates a broken invariant.
DpOutcome run_dp(const DpContext& ctx, const std::vector<SketchSet>& sketch_sets);

/// Walks the back-pointers from the root's best state and assembles the
/// block assignments of the chosen sketches.  Throws CorruptTable if a
/// pointer dangles.  The returned objective is the sum of the chosen sketch
/// values (indicator costs included); x/z are in ctx.problem coordinates.
struct Certificate {
    Eigen::VectorXd x;
    Eigen::VectorXi z;
    double value = 0.0;
    CheckReport report;  ///< slack audit of (x, z) against ctx.problem
};
Certificate extract_certificate(const DpContext& ctx, const std::vector<SketchSet>& sketch_sets,
                                const DpOutcome& outcome);

}  // namespace qib
