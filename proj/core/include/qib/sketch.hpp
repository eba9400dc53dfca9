#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "qib/epsilon.hpp"
#include "qib/model.hpp"
#include "qib/qcqp.hpp"
#include "qib/types.hpp"

namespace qib {

/// Rounded profile of one block: the on/off choice delta plus, for every
/// mixed-integer row touching the block, the grid cell its contribution is
/// confined to.  k is aligned with SketchSet::mixed_rows.
struct SketchKey {
    std::uint8_t delta = 0;
    std::vector<int> k;

    friend bool operator==(const SketchKey&, const SketchKey&) = default;
};

/// One admissible profile together with the cheapest block assignment
/// realizing it.
struct Sketch {
    SketchKey key;
    double value = 0.0;           ///< optimal block objective under the profile
    Eigen::VectorXd certificate;  ///< minimizing x over the block's variables
};

/// All admissible profiles of one block.
struct SketchSet {
    Index block = -1;
    /// Sorted mixed-integer rows incident to the block; defines the k layout.
    std::vector<Index> mixed_rows;
    std::vector<Sketch> sketches;
    /// Number of candidate keys examined (grid points + the off profile).
    std::size_t keys_examined = 0;
};

struct SketchOptions {
    Tolerances tol;
    QcqpOptions qcqp;
};

/// Optimal block value under profile `key`: minimizes the block's share of
/// the objective over its box subject to, per incident mixed row r with cell
/// index k_r, block-contribution + v_r * delta <= eps*(k_r+1), two-sided
/// (also >= eps*k_r) when r is an equality row.  delta=0 pins x to 0 and has
/// value 0 (feasible for every row: a zero contribution lies in cell -1 or 0,
/// both admissible for rhs eps*(0+1)).  Returns Infeasible status when the
/// cell system admits no point.
struct SketchValue {
    bool feasible = false;
    double value = 0.0;
    Eigen::VectorXd certificate;
};
SketchValue sketch_value(const Problem& problem, Index block,
                         const std::vector<Index>& mixed_rows, const SketchKey& key, Epsilon eps,
                         const SketchOptions& opts = {});

/// Enumerates every admissible profile of `block` over delta in {0,1} and the
/// full cell grid [-ceil(1/eps), ceil(1/eps)-1]^|rows|.  Provably infeasible
/// cells are skipped by sound interval bounds; cells beyond a row's reachable
/// range share one solve.  The off profile is included unless the block is
/// forced on.  Deterministic; profiles are listed in grid order.
SketchSet enumerate_sketches(const Problem& problem, Index block, Epsilon eps,
                             const SketchOptions& opts = {});

}  // namespace qib
