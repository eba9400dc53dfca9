#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "qib/epsilon.hpp"
#include "qib/model.hpp"
#include "qib/sketch.hpp"
#include "qib/verify.hpp"
#include "support/build.hpp"
#include "support/factory.hpp"

using namespace qib;
using namespace testsupport;

namespace {

/// One variable in [0,1], objective `lin`*x, one unit-norm row x <= rhs.
Problem one_var_row(double lin, double rhs, bool equality = false) {
    Problem p = singletons(1);
    p.objective.linear[0] = lin;
    QuadForm f = zform(1, 1);
    f.linear[0] = 1.0;
    p.constraints.push_back(equality ? row_eq(f, rhs) : row_le(f, rhs));
    return validate_problem(p);
}

const Sketch* find_key(const SketchSet& s, int delta, const std::vector<int>& k) {
    for (const auto& sk : s.sketches) {
        if (sk.key.delta == delta && sk.key.k == k) return &sk;
    }
    return nullptr;
}

}  // namespace

TEST_SUITE("sketch") {

TEST_CASE("the off profile always has value zero") {
    const Problem p = one_var_row(-1.0, 1.0);
    const Epsilon eps = Epsilon::from_denominator(2);
    for (int k : {-1, 0}) {
        SketchKey key;
        key.delta = 0;
        key.k = {k};
        const SketchValue sv = sketch_value(p, 0, {0}, key, eps);
        CHECK(sv.feasible);
        CHECK(sv.value == 0.0);
        CHECK(sv.certificate.isZero(0.0));
    }
}

TEST_CASE("the top cell reproduces the box-only optimum") {
    // min -x over [0,1] with row x <= 1 at eps = 1/2: cell k=1 demands
    // x <= eps*(k+1) = 1, so the cell optimum is the box optimum x = 1.
    const Problem p = one_var_row(-1.0, 1.0);
    const Epsilon eps = Epsilon::from_denominator(2);
    SketchKey key;
    key.delta = 1;
    key.k = {1};
    const SketchValue sv = sketch_value(p, 0, {0}, key, eps);
    REQUIRE(sv.feasible);
    CHECK(sv.value == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(sv.certificate[0] == doctest::Approx(1.0).epsilon(1e-5));

    key.k = {0};  // x <= 1/2
    const SketchValue mid = sketch_value(p, 0, {0}, key, eps);
    REQUIRE(mid.feasible);
    CHECK(mid.value == doctest::Approx(-0.5).epsilon(1e-5));
}

TEST_CASE("cells are one-sided for <= rows and two-sided for equalities") {
    const Epsilon eps = Epsilon::from_denominator(2);

    // <= row: the k=-2 cell demands x <= -1/2, impossible over [0,1].
    const Problem ple = one_var_row(1.0, 1.0);
    SketchKey key;
    key.delta = 1;
    key.k = {-2};
    CHECK_FALSE(sketch_value(ple, 0, {0}, key, eps).feasible);

    // equality row: cell [eps*k, eps*(k+1)] is an interval.
    const Problem peq = one_var_row(0.0, 0.6, true);
    Problem pobj = peq;
    pobj.objective.diag[0] = 1.0;  // min x^2
    const Problem v = validate_problem(pobj);
    key.k = {1};
    const SketchValue top = sketch_value(v, 0, {0}, key, eps);
    REQUIRE(top.feasible);
    CHECK(top.certificate[0] == doctest::Approx(0.5).epsilon(1e-4));
    CHECK(top.value == doctest::Approx(0.25).epsilon(1e-4));
    key.k = {-1};  // [-1/2, 0] intersects the box only at 0
    const SketchValue low = sketch_value(v, 0, {0}, key, eps);
    REQUIRE(low.feasible);
    CHECK(std::abs(low.certificate[0]) <= 1e-5);
    key.k = {-2};  // [-1, -1/2] misses the box entirely
    CHECK_FALSE(sketch_value(v, 0, {0}, key, eps).feasible);
}

TEST_CASE("enumeration covers the grid and includes one off profile") {
    const Problem p = one_var_row(-1.0, 1.0);
    const Epsilon eps = Epsilon::from_denominator(2);
    const SketchSet s = enumerate_sketches(p, 0, eps);

    CHECK(s.block == 0);
    CHECK(s.mixed_rows == std::vector<Index>{0});
    // Candidates: the off profile plus the admissible window k in [-1, 1]
    // (the k = -2 cell demands x <= -1/2 and is screened out up front).
    CHECK(s.keys_examined == 4);
    std::size_t off_count = 0;
    for (const auto& sk : s.sketches) {
        if (sk.key.delta == 0) ++off_count;
    }
    CHECK(off_count == 1);
    CHECK(find_key(s, 1, {1}) != nullptr);
    CHECK(find_key(s, 1, {0}) != nullptr);
    CHECK(find_key(s, 1, {-1}) != nullptr);
    CHECK(find_key(s, 1, {-2}) == nullptr);  // provably infeasible cell
}

TEST_CASE("blocks in no mixed row have exactly two profiles") {
    Problem p = singletons(1);
    p.objective.linear[0] = -1.0;
    QuadForm f = zform(1, 1);
    f.indicator[0] = 1.0;
    p.constraints.push_back(row_comb(f, 1.0));
    const Problem v = validate_problem(p);
    const SketchSet s = enumerate_sketches(v, 0, Epsilon::from_denominator(4));
    REQUIRE(s.sketches.size() == 2);
    CHECK(s.mixed_rows.empty());
    const Sketch* off = find_key(s, 0, {});
    const Sketch* on = find_key(s, 1, {});
    REQUIRE(off != nullptr);
    REQUIRE(on != nullptr);
    CHECK(off->value == 0.0);
    CHECK(on->value == doctest::Approx(-1.0).epsilon(1e-6));
}

TEST_CASE("forced-on blocks lose the off profile") {
    Problem p;
    Variable fixed;
    fixed.id = 0;
    fixed.lower = 0.5;
    fixed.upper = 0.5;
    fixed.block = 0;
    Variable free;
    free.id = 1;
    free.lower = 0.0;
    free.upper = 1.0;
    free.block = 0;
    p.variables = {fixed, free};
    Block b;
    b.id = 0;
    b.variables = {0, 1};
    p.blocks.push_back(b);
    p.objective = zform(2, 1);
    QuadForm f = zform(2, 1);
    f.linear[1] = 1.0;
    p.constraints.push_back(row_le(f, 0.8));
    const NormalizedProblem np = normalize(validate_problem(p));
    REQUIRE(np.problem.block_forced_on(0));

    const SketchSet s = enumerate_sketches(np.problem, 0, Epsilon::from_denominator(2));
    CHECK(!s.sketches.empty());
    for (const auto& sk : s.sketches) CHECK(sk.key.delta == 1);
}

TEST_CASE("values are monotone across nested <= cells") {
    const Problem p = one_var_row(-1.0, 1.0);
    const Epsilon eps = Epsilon::from_denominator(4);
    const SketchSet s = enumerate_sketches(p, 0, eps);
    for (const auto& a : s.sketches) {
        for (const auto& b : s.sketches) {
            if (a.key.delta != 1 || b.key.delta != 1) continue;
            if (a.key.k[0] <= b.key.k[0]) CHECK(a.value >= b.value - 1e-7);
        }
    }
}

TEST_CASE("certificates satisfy their own cell system") {
    std::mt19937_64 rng(1212);
    const Epsilon eps = Epsilon::from_denominator(4);
    for (int trial = 0; trial < 6; ++trial) {
        FactoryConfig cfg;
        cfg.min_rows = 2;
        const Problem raw = random_problem(rng, cfg);
        const NormalizedProblem np = normalize(raw);
        if (np.problem.trivially_infeasible) continue;
        const Problem& p = np.problem;

        for (Index i = 0; i < p.num_blocks(); ++i) {
            const SketchSet s = enumerate_sketches(p, i, eps);
            // Theoretical caps on enumeration work and output size.
            const std::size_t grid = static_cast<std::size_t>(eps.grid_size());
            std::size_t cap = 1;
            for (std::size_t r = 0; r < s.mixed_rows.size(); ++r) cap *= grid;
            CHECK(s.keys_examined <= 2 * cap);
            CHECK(s.sketches.size() <= s.keys_examined);

            Eigen::VectorXd x = Eigen::VectorXd::Zero(p.num_variables());
            for (const auto& sk : s.sketches) {
                // Scatter the block certificate into a full point.
                const auto& members = p.blocks[static_cast<std::size_t>(i)].variables;
                REQUIRE(sk.certificate.size() == static_cast<Eigen::Index>(members.size()));
                for (std::size_t a = 0; a < members.size(); ++a)
                    x[members[a]] = sk.certificate[static_cast<Eigen::Index>(a)];

                if (sk.key.delta == 0) {
                    CHECK(sk.certificate.isZero(1e-12));
                    CHECK(sk.value == 0.0);
                    continue;
                }
                for (double xv : sk.certificate) {
                    CHECK(xv >= -1e-8);
                    CHECK(xv <= 1.0 + 1e-8);
                }
                // Cell membership of every incident row's contribution.
                for (std::size_t rix = 0; rix < s.mixed_rows.size(); ++rix) {
                    const Index r = s.mixed_rows[rix];
                    const auto& con = p.constraints[static_cast<std::size_t>(r)];
                    double contrib = block_contribution(p, con.form, i, x);
                    if (con.form.indicator.size() > i) contrib += con.form.indicator[i];
                    const int k = sk.key.k[rix];
                    CHECK(contrib <= eps.value() * (k + 1) + 1e-7);
                    if (con.sense == ConstraintSense::Equal)
                        CHECK(contrib >= eps.value() * k - 1e-7);
                }
                // The sketch value is the block's objective share at the
                // certificate, indicator cost included.
                double obj = block_contribution(p, p.objective, i, x);
                if (p.objective.indicator.size() > i) obj += p.objective.indicator[i];
                CHECK(sk.value == doctest::Approx(obj).epsilon(1e-6));
                for (std::size_t a = 0; a < members.size(); ++a) x[members[a]] = 0.0;
            }
        }
    }
}

TEST_CASE("profiles of an optimal point are always enumerated") {
    std::mt19937_64 rng(1313);
    const Epsilon eps = Epsilon::from_denominator(4);
    int solved = 0;
    for (int trial = 0; trial < 12 && solved < 5; ++trial) {
        FactoryConfig cfg;
        cfg.min_rows = 2;
        cfg.max_blocks = 4;
        cfg.max_vars = 8;
        const Problem raw = random_problem(rng, cfg);
        const NormalizedProblem np = normalize(raw);
        if (np.problem.trivially_infeasible) continue;
        const Problem& p = np.problem;
        const OracleResult oracle = oracle_solve(p);
        if (oracle.status != OracleStatus::Optimal) continue;
        ++solved;

        for (Index i = 0; i < p.num_blocks(); ++i) {
            if (oracle.z[i] == 0) continue;
            const SketchSet s = enumerate_sketches(p, i, eps);
            // Reconstruct the cell profile the optimal point occupies.
            SketchKey key;
            key.delta = 1;
            for (Index r : s.mixed_rows) {
                const auto& con = p.constraints[static_cast<std::size_t>(r)];
                double contrib = block_contribution(p, con.form, i, oracle.x);
                if (con.form.indicator.size() > i) contrib += con.form.indicator[i];
                int k = static_cast<int>(std::floor(contrib / eps.value() + 1e-9));
                k = std::clamp(k, eps.k_min(), eps.k_max());
                key.k.push_back(k);
            }
            const Sketch* sk = find_key(s, 1, key.k);
            REQUIRE(sk != nullptr);
            double obj = block_contribution(p, p.objective, i, oracle.x);
            if (p.objective.indicator.size() > i) obj += p.objective.indicator[i];
            CHECK(sk->value <= obj + 1e-6);
        }
    }
    CHECK(solved == 5);
}

}  // TEST_SUITE
