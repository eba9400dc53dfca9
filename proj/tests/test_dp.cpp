#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <random>
#include <vector>

#include "qib/dp.hpp"
#include "qib/epsilon.hpp"
#include "qib/model.hpp"
#include "qib/sketch.hpp"
#include "qib/verify.hpp"
#include "support/build.hpp"
#include "support/factory.hpp"
#include "support/reference.hpp"
#include "support/rundp.hpp"

using namespace qib;
using namespace testsupport;

namespace {

StateKey make_key(std::vector<int> k, std::vector<int> kappa) {
    StateKey key;
    key.k_sum = std::move(k);
    key.kappa_sum = std::move(kappa);
    return key;
}

StateTable make_table(Index node, const std::vector<std::pair<StateKey, double>>& entries) {
    StateTable t;
    t.node = node;
    for (const auto& [key, value] : entries) t.states[key] = StateEntry{value, {}};
    return t;
}

/// Two singleton blocks, one two-block mixed row (0.5 x0 + 0.5 x1, sense as
/// requested) and one combinatorial row z0 + z1 <= 1.
Problem two_block_problem(bool equality, double rhs) {
    Problem p = singletons(2);
    QuadForm f = zform(2, 2);
    f.linear[0] = 0.5;
    f.linear[1] = 0.5;
    p.constraints.push_back(equality ? row_eq(f, rhs) : row_le(f, rhs));
    QuadForm g = zform(2, 2);
    g.indicator[0] = 1.0;
    g.indicator[1] = 1.0;
    p.constraints.push_back(row_comb(g, 1.0));
    return validate_problem(p);
}

/// Hand-rooted working form over two_block_problem: designated leaves 0 and 1
/// (bag {0,1} each), a join finalizing the mixed row, and a root finalizing
/// the combinatorial row.
RootedBinaryDecomposition hand_rbd() {
    RootedBinaryDecomposition rbd;
    auto node = [&](Index id, std::vector<Index> bag, std::vector<Index> children, Index parent,
                    Index leaf_block, std::vector<Index> mixed, std::vector<Index> comb,
                    std::vector<Index> finalized) {
        RootedNode n;
        n.id = id;
        n.bag = std::move(bag);
        n.children = std::move(children);
        n.parent = parent;
        n.leaf_block = leaf_block;
        n.mixed_rows = std::move(mixed);
        n.comb_rows = std::move(comb);
        n.finalized = std::move(finalized);
        rbd.nodes.push_back(std::move(n));
    };
    node(0, {0, 1}, {}, 2, 0, {0}, {1}, {});
    node(1, {0, 1}, {}, 2, 1, {0}, {1}, {});
    node(2, {0, 1}, {0, 1}, 3, -1, {0}, {1}, {0});
    node(3, {1}, {2}, -1, -1, {}, {1}, {1});
    rbd.root = 3;
    rbd.designated_leaf = {0, 1};
    rbd.post_order = {0, 1, 2, 3};
    rbd.width = 1;
    return rbd;
}

}  // namespace

TEST_SUITE("dp") {

TEST_CASE("init_leaf keeps the cheaper of colliding profiles") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(2), Tolerances{}};

    SketchSet s;
    s.block = 0;
    s.mixed_rows = {0};
    s.sketches.push_back({SketchKey{1, {0}}, 5.0, Eigen::VectorXd::Constant(1, 0.3)});
    s.sketches.push_back({SketchKey{1, {0}}, 3.0, Eigen::VectorXd::Constant(1, 0.1)});
    s.sketches.push_back({SketchKey{0, {0}}, 0.0, Eigen::VectorXd::Zero(1)});

    const StateTable t = init_leaf(ctx, 0, s);
    REQUIRE(t.states.size() == 2);
    const auto on = t.states.find(make_key({0}, {1}));
    REQUIRE(on != t.states.end());
    CHECK(on->second.value == 3.0);
    CHECK(on->second.bp.sketch_index == 1);
    const auto off = t.states.find(make_key({0}, {0}));
    REQUIRE(off != t.states.end());
    CHECK(off->second.value == 0.0);
}

TEST_CASE("merge adds values, saturates at the grid floor, discards above the top") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(8), Tolerances{}};  // k in [-8, 7]

    const StateTable left = make_table(0, {
                                              {make_key({1}, {1}), 1.0},
                                              {make_key({-6}, {0}), 10.0},
                                              {make_key({-7}, {0}), 6.0},
                                              {make_key({6}, {0}), 1.0},
                                          });
    const StateTable right = make_table(1, {
                                               {make_key({1}, {0}), 2.0},
                                               {make_key({2}, {0}), 1.0},
                                               {make_key({-5}, {1}), 20.0},
                                           });

    const StateTable merged = merge_two_children(ctx, 2, left, right);
    const std::map<std::pair<int, int>, double> expect = {
        {{2, 1}, 3.0},    // (1,1)+(1,0)
        {{3, 1}, 2.0},    // (1,1)+(2,0)
        {{-4, 2}, 21.0},  // (1,1)+(-5,1)
        {{-5, 0}, 7.0},   // min of (-6,0)+(1,0)=12 and (-7,0)+(2,0)=7
        {{-4, 0}, 11.0},  // (-6,0)+(2,0)
        {{-6, 0}, 8.0},   // (-7,0)+(1,0)
        {{-8, 1}, 26.0},  // -11 and -12 saturate to the floor -8; min(30, 26)
        {{7, 0}, 3.0},    // (6,0)+(1,0)
        {{1, 1}, 21.0},   // (6,0)+(-5,1)
    };                    // (6,0)+(2,0) sums to 8 > 7 and is discarded
    REQUIRE(merged.states.size() == expect.size());
    for (const auto& [kk, value] : expect) {
        const auto it = merged.states.find(make_key({kk.first}, {kk.second}));
        REQUIRE(it != merged.states.end());
        CHECK(it->second.value == value);
    }
}

TEST_CASE("filter enforces the one-sided bound of <= rows") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(4), Tolerances{}};

    StateTable t = make_table(2, {
                                     {make_key({1}, {0}), 1.0},  // eps*1 = 0.25 <= 0.5
                                     {make_key({2}, {0}), 2.0},  // boundary 0.5 <= 0.5
                                     {make_key({3}, {1}), 3.0},  // 0.75 > 0.5: dropped
                                 });
    const StateTable f = filter_consistent(ctx, 2, std::move(t));
    CHECK(f.states.size() == 2);
    CHECK(f.states.count(make_key({1}, {0})) == 1);
    CHECK(f.states.count(make_key({2}, {0})) == 1);
    CHECK(f.states.count(make_key({3}, {1})) == 0);
}

TEST_CASE("filter demands equality rows be reachable from both sides") {
    const Problem p = two_block_problem(true, 0.5);  // 2 incident blocks
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(4), Tolerances{}};

    StateTable t = make_table(2, {
                                     {make_key({-1}, {0}), 1.0},  // upper eps*(-1+2)=0.25 < 0.5
                                     {make_key({0}, {0}), 2.0},   // upper 0.5, lower 0: kept
                                     {make_key({2}, {0}), 3.0},   // lower 0.5 <= 0.5: kept
                                     {make_key({3}, {0}), 4.0},   // lower 0.75 > 0.5: dropped
                                 });
    const StateTable f = filter_consistent(ctx, 2, std::move(t));
    CHECK(f.states.size() == 2);
    CHECK(f.states.count(make_key({0}, {0})) == 1);
    CHECK(f.states.count(make_key({2}, {0})) == 1);
}

TEST_CASE("filter applies combinatorial rows exactly") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(4), Tolerances{}};

    StateTable t = make_table(3, {
                                     {make_key({}, {0}), 1.0},
                                     {make_key({}, {1}), 0.5},
                                     {make_key({}, {2}), -3.0},  // 2 > rhs 1: dropped
                                 });
    const StateTable f = filter_consistent(ctx, 3, std::move(t));
    CHECK(f.states.size() == 2);
    CHECK(f.states.count(make_key({}, {2})) == 0);
}

TEST_CASE("lift projects departing rows by minimization") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(4), Tolerances{}};

    // Child at the join (rows {mixed 0, comb 1}); parent keeps only the comb row.
    const StateTable child = make_table(2, {
                                               {make_key({1}, {0}), 5.0},
                                               {make_key({2}, {0}), 3.0},
                                               {make_key({1}, {1}), 4.0},
                                           });
    const StateTable lifted = lift_one_child(ctx, 3, child);
    REQUIRE(lifted.states.size() == 2);
    CHECK(lifted.states.at(make_key({}, {0})).value == 3.0);
    CHECK(lifted.states.at(make_key({}, {1})).value == 4.0);
    // Back-pointers record the minimizing child key.
    CHECK(lifted.states.at(make_key({}, {0})).bp.child == make_key({2}, {0}));
}

TEST_CASE("lift starts entering rows at zero") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(4), Tolerances{}};

    // A table shaped like the root (comb row only) lifted onto the join.
    const StateTable child = make_table(3, {
                                               {make_key({}, {0}), 1.0},
                                               {make_key({}, {1}), 2.0},
                                           });
    const StateTable lifted = lift_one_child(ctx, 2, child);
    REQUIRE(lifted.states.size() == 2);
    CHECK(lifted.states.at(make_key({0}, {0})).value == 1.0);
    CHECK(lifted.states.at(make_key({0}, {1})).value == 2.0);
}

TEST_CASE("lift is the identity between equal bags") {
    const Problem p = two_block_problem(false, 0.5);
    const RootedBinaryDecomposition rbd = hand_rbd();
    const DpContext ctx{p, rbd, Epsilon::from_denominator(4), Tolerances{}};

    const StateTable child = make_table(0, {
                                               {make_key({1}, {1}), 1.5},
                                               {make_key({-2}, {0}), 0.5},
                                           });
    const StateTable lifted = lift_one_child(ctx, 2, child);
    REQUIRE(lifted.states.size() == 2);
    CHECK(lifted.states.at(make_key({1}, {1})).value == 1.5);
    CHECK(lifted.states.at(make_key({-2}, {0})).value == 0.5);
}

TEST_CASE("an all-off optimum solves exactly") {
    // Switching on costs 0.5 per block and a cardinality row forbids any
    // active block, so the optimum is everything off at value 0.
    Problem p = singletons(2);
    p.objective.indicator[0] = 0.5;
    p.objective.indicator[1] = 0.5;
    p.objective.linear[0] = 1.0;
    p.objective.linear[1] = 1.0;
    QuadForm g = zform(2, 2);
    g.indicator[0] = 1.0;
    g.indicator[1] = 1.0;
    p.constraints.push_back(row_comb(g, 0.0));
    const Problem v = validate_problem(p);

    const SolveRun run = run_solver(v, Epsilon::from_denominator(4));
    REQUIRE(run.outcome.status == DpStatus::Solution);
    CHECK(run.outcome.value == doctest::Approx(0.0));
    REQUIRE(run.certificate.has_value());
    CHECK(run.certificate->z[0] == 0);
    CHECK(run.certificate->z[1] == 0);
    CHECK(run.certificate->x.isZero(1e-12));
    CHECK(run.certificate->report.combinatorial_feasible);
    CHECK(run.certificate->report.within_bound);

    const OracleResult oracle = oracle_solve(v);
    REQUIRE(oracle.status == OracleStatus::Optimal);
    CHECK(oracle.value == doctest::Approx(0.0));
}

TEST_CASE("a single-block equality instance rounds to the expected cell") {
    // min x^2 s.t. x = 0.6 at eps = 1/4: only the cell [0.5, 0.75] passes the
    // two-sided filter, so the program returns x = 0.5 with value 0.25 - a
    // superoptimal point whose equality violation 0.1 is within 1 * eps.
    Problem p = singletons(1);
    p.objective.diag[0] = 1.0;
    QuadForm f = zform(1, 1);
    f.linear[0] = 1.0;
    p.constraints.push_back(row_eq(f, 0.6));
    const Problem v = validate_problem(p);

    const SolveRun run = run_solver(v, Epsilon::from_denominator(4));
    REQUIRE(run.outcome.status == DpStatus::Solution);
    CHECK(run.outcome.value == doctest::Approx(0.25).epsilon(1e-6));
    CHECK(run.outcome.root_key.k_sum == std::vector<int>{2});
    REQUIRE(run.certificate.has_value());
    CHECK(run.certificate->x[0] == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(run.certificate->z[0] == 1);
    CHECK(run.certificate->report.max_mixed_infeasibility == doctest::Approx(0.1).epsilon(1e-4));
    CHECK(run.certificate->report.guarantee_bound == doctest::Approx(0.25));
    CHECK(run.certificate->report.within_bound);

    // The exact optimum is 0.36; the rounded program may undercut it.
    CHECK(run.outcome.value <= 0.36 + 1e-9);
}

TEST_CASE("provably infeasible instances short-circuit to Infeasible") {
    SUBCASE("equality right-hand side beyond the unit row range") {
        Problem p = singletons(1);
        QuadForm f = zform(1, 1);
        f.linear[0] = 1.0;
        p.constraints.push_back(row_eq(f, 2.0));
        const Problem v = validate_problem(p);
        const SolveRun run = run_solver(v, Epsilon::from_denominator(4));
        CHECK(run.outcome.status == DpStatus::Infeasible);
        CHECK(oracle_solve(v).status == OracleStatus::Infeasible);
    }
    SUBCASE("equality row conflicting with an all-off cardinality row") {
        Problem p = singletons(1);
        QuadForm f = zform(1, 1);
        f.linear[0] = 1.0;
        p.constraints.push_back(row_eq(f, 0.8));
        QuadForm g = zform(1, 1);
        g.indicator[0] = 1.0;
        p.constraints.push_back(row_comb(g, 0.0));
        const Problem v = validate_problem(p);
        const SolveRun run = run_solver(v, Epsilon::from_denominator(4));
        CHECK(run.outcome.status == DpStatus::Infeasible);
        CHECK(oracle_solve(v).status == OracleStatus::Infeasible);
    }
}

TEST_CASE("the program is superoptimal and eps-feasible on random instances") {
    std::mt19937_64 rng(3030);
    int infeasible_dp = 0;
    int compared = 0;
    for (int trial = 0; trial < 20; ++trial) {
        FactoryConfig cfg;
        cfg.min_rows = 2;
        const NormalizedProblem np = normalize(random_problem(rng, cfg));
        if (np.problem.trivially_infeasible) continue;
        const Problem& p = np.problem;
        const OracleResult oracle = oracle_solve(p);

        for (int denom : {2, 4}) {
            const Epsilon eps = Epsilon::from_denominator(denom);
            const SolveRun run = run_solver(p, eps);

            if (run.outcome.status == DpStatus::Infeasible) {
                // The filters only drop provably violated profiles, so an
                // infeasible program certifies an infeasible instance.
                CHECK(oracle.status == OracleStatus::Infeasible);
                ++infeasible_dp;
                continue;
            }
            REQUIRE(run.certificate.has_value());
            const CheckReport& report = run.certificate->report;
            CHECK(report.combinatorial_feasible);
            CHECK(report.within_bound);
            CHECK(report.guarantee_bound <= 3 * eps.value() + 1e-12);

            if (oracle.status == OracleStatus::Optimal) {
                CHECK(run.outcome.value <=
                      oracle.value + p.num_blocks() * Tolerances{}.val_tol);
                ++compared;
            }

            // Table sizes respect the per-node cap.
            std::size_t total = 0;
            for (const NodeStats& ns : run.outcome.stats) {
                total += ns.table_size;
                CHECK(static_cast<double>(ns.table_size) <= ns.table_bound);
                const auto& node = run.rbd.nodes[static_cast<std::size_t>(ns.node)];
                double cap = 1.0;
                for (std::size_t i = 0; i < node.mixed_rows.size(); ++i)
                    cap *= static_cast<double>(eps.grid_size());
                for (Index c : node.comb_rows)
                    cap *= static_cast<double>(p.incidence[static_cast<std::size_t>(c)].size() + 1);
                CHECK(ns.table_bound <= cap + 1e-9);
            }
            CHECK(total == run.outcome.total_states);
        }
    }
    CHECK(compared >= 10);  // the suite must actually exercise the comparison
    (void)infeasible_dp;
}

TEST_CASE("combinatorial-only instances solve exactly") {
    std::mt19937_64 rng(3131);
    int checked = 0;
    for (int trial = 0; trial < 10; ++trial) {
        FactoryConfig cfg;
        cfg.combinatorial_only = true;
        cfg.min_rows = 2;
        const NormalizedProblem np = normalize(random_problem(rng, cfg));
        if (np.problem.trivially_infeasible) continue;
        const Problem& p = np.problem;
        const SolveRun run = run_solver(p, Epsilon::from_denominator(2));
        const OracleResult oracle = oracle_solve(p);
        if (oracle.status == OracleStatus::Optimal) {
            REQUIRE(run.outcome.status == DpStatus::Solution);
            CHECK(std::abs(run.outcome.value - oracle.value) <=
                  p.num_blocks() * Tolerances{}.val_tol);
            ++checked;
        } else {
            CHECK(run.outcome.status == DpStatus::Infeasible);
        }
    }
    CHECK(checked >= 5);
}

TEST_CASE("the table minimum matches exhaustive profile enumeration") {
    std::mt19937_64 rng(3232);
    const Epsilon eps = Epsilon::from_denominator(2);
    int compared = 0;
    for (int trial = 0; trial < 10; ++trial) {
        FactoryConfig cfg;
        cfg.max_blocks = 3;
        cfg.max_vars = 6;
        cfg.min_rows = 2;
        cfg.max_rows = 4;
        cfg.max_blocks_per_mixed_row = 1;  // keeps grid sums inside one block's range
        const NormalizedProblem np = normalize(random_problem(rng, cfg));
        if (np.problem.trivially_infeasible) continue;
        const Problem& p = np.problem;
        const SolveRun run = run_solver(p, eps);
        const refimpl::EnsembleResult ens = refimpl::ensemble_brute_force(p, run.sketch_sets, eps);
        if (ens.feasible) {
            REQUIRE(run.outcome.status == DpStatus::Solution);
            CHECK(run.outcome.value == doctest::Approx(ens.value).epsilon(1e-9));
            ++compared;
        } else {
            CHECK(run.outcome.status == DpStatus::Infeasible);
        }
    }
    CHECK(compared >= 5);
}

TEST_CASE("certificates assemble the chosen sketch assignments") {
    std::mt19937_64 rng(3333);
    for (int trial = 0; trial < 6; ++trial) {
        FactoryConfig cfg;
        cfg.min_rows = 2;
        const NormalizedProblem np = normalize(random_problem(rng, cfg));
        if (np.problem.trivially_infeasible) continue;
        const Problem& p = np.problem;
        const SolveRun run = run_solver(p, Epsilon::from_denominator(4));
        if (run.outcome.status != DpStatus::Solution) continue;
        REQUIRE(run.certificate.has_value());
        const Certificate& cert = *run.certificate;

        // The certificate value re-evaluates to the objective at (x, z).
        Eigen::VectorXd zf(p.num_blocks());
        for (Index i = 0; i < p.num_blocks(); ++i) zf[i] = cert.z[i];
        CHECK(cert.value == doctest::Approx(evaluate_objective(p, cert.x, zf)).epsilon(1e-7));
        CHECK(cert.value == doctest::Approx(run.outcome.value).epsilon(1e-9));
        // Off blocks carry zero assignments.
        for (Index i = 0; i < p.num_blocks(); ++i) {
            if (cert.z[i] == 1) continue;
            for (Index j : p.blocks[static_cast<std::size_t>(i)].variables)
                CHECK(cert.x[j] == 0.0);
        }
    }
}

TEST_CASE("the whole pipeline is deterministic") {
    std::mt19937_64 rng(3434);
    FactoryConfig cfg;
    cfg.min_rows = 2;
    const NormalizedProblem np = normalize(random_problem(rng, cfg));
    REQUIRE_FALSE(np.problem.trivially_infeasible);
    const Epsilon eps = Epsilon::from_denominator(4);
    const SolveRun a = run_solver(np.problem, eps);
    const SolveRun b = run_solver(np.problem, eps);
    REQUIRE(a.outcome.status == b.outcome.status);
    if (a.outcome.status == DpStatus::Solution) {
        CHECK(a.outcome.value == b.outcome.value);  // bitwise
        CHECK(a.outcome.root_key == b.outcome.root_key);
        REQUIRE(a.certificate.has_value());
        REQUIRE(b.certificate.has_value());
        CHECK((a.certificate->x.array() == b.certificate->x.array()).all());
        CHECK((a.certificate->z.array() == b.certificate->z.array()).all());
    }
    CHECK(a.outcome.total_states == b.outcome.total_states);
}

}  // TEST_SUITE
