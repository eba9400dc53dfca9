#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "qib/model.hpp"
#include "qib/types.hpp"

namespace qib {

/// Constraint intersection graph: one vertex per constraint (both kinds), an
/// edge whenever two constraints share an incident block.
struct IntersectionGraph {
    Index num_constraints = 0;
    Index num_blocks = 0;
    /// neighbors[r]: sorted ids of constraints sharing a block with r.
    std::vector<std::vector<Index>> neighbors;
    /// incident_blocks[r]: sorted ids of blocks incident to constraint r.
    std::vector<std::vector<Index>> incident_blocks;
    /// constraints_of_block[i]: sorted ids of constraints incident to block i.
    /// The rows in this list are pairwise adjacent, so each list is a clique.
    std::vector<std::vector<Index>> constraints_of_block;
};

IntersectionGraph build_intersection_graph(const Problem& problem);

struct DecompositionNode {
    Index id = 0;
    std::vector<Index> bag;  ///< sorted constraint ids
};

/// An (unrooted) tree decomposition of the intersection graph.
struct TreeDecomposition {
    std::vector<DecompositionNode> nodes;  ///< ids 0..N-1 in order
    std::vector<std::pair<Index, Index>> edges;
};

/// max bag size - 1; -1 for a decomposition with no or only empty bags.
int width(const TreeDecomposition& td);

/// Checks the three decomposition properties (vertex coverage, edge coverage,
/// connected per-vertex subtrees) plus tree shape.  Throws
/// InvalidDecomposition with a description of the first failure.
void validate_decomposition(const TreeDecomposition& td, const IntersectionGraph& graph);

/// Returns the supplied decomposition after validating it, or builds one with
/// the min-fill elimination heuristic (deterministic: ties broken by smallest
/// vertex id).
TreeDecomposition tree_decomposition(const IntersectionGraph& graph,
                                     const std::optional<TreeDecomposition>& supplied = {});

/// Node of the rooted, binarized working form used by the dynamic program.
struct RootedNode {
    Index id = 0;
    std::vector<Index> bag;  ///< sorted constraint ids
    std::vector<Index> children;
    Index parent = -1;
    /// For leaves: the block this leaf is designated to; -1 for inner nodes.
    Index leaf_block = -1;
    std::vector<Index> mixed_rows;  ///< mixed-integer rows in bag, sorted
    std::vector<Index> comb_rows;   ///< combinatorial rows in bag, sorted
    /// Rows whose bag-subtree ends here (in bag, absent from the parent's).
    std::vector<Index> finalized;
};

/// Rooted binary working form: every leaf is designated to exactly one block
/// (bijectively), every node has at most two children, and bags still form a
/// valid decomposition of the intersection graph.
struct RootedBinaryDecomposition {
    std::vector<RootedNode> nodes;  ///< ids 0..N-1 in order
    Index root = -1;
    std::vector<Index> designated_leaf;  ///< block id -> leaf node id
    std::vector<Index> post_order;       ///< children listed before parents
    int width = -1;
};

/// Rewrites a validated decomposition into the rooted binary working form:
/// contracts bags contained in a neighbor, roots the tree, attaches one
/// designated leaf per block with bag equal to that block's constraint
/// clique, binarizes, and prunes non-designated leaves.  Deterministic.
RootedBinaryDecomposition normalize_decomposition(const TreeDecomposition& td,
                                                  const Problem& problem,
                                                  const IntersectionGraph& graph);

}  // namespace qib
