#include "qib/dp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace qib {
namespace {

// Position of `row` in the sorted list, or -1.
int position_of(const std::vector<Index>& rows, Index row) {
    auto it = std::lower_bound(rows.begin(), rows.end(), row);
    if (it == rows.end() || *it != row) return -1;
    return static_cast<int>(it - rows.begin());
}

double table_bound(const DpContext& ctx, Index node) {
    const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(node)];
    double bound = 1.0;
    for (std::size_t t = 0; t < nd.mixed_rows.size(); ++t)
        bound *= static_cast<double>(ctx.eps.grid_size());
    for (Index r : nd.comb_rows)
        bound *= static_cast<double>(ctx.problem.incidence[static_cast<std::size_t>(r)].size() + 1);
    return bound;
}

void insert_min(StateTable& table, StateKey key, double value, Backpointer bp) {
    auto [it, inserted] = table.states.try_emplace(std::move(key), StateEntry{value, bp});
    if (!inserted && value < it->second.value) it->second = StateEntry{value, std::move(bp)};
}

}  // namespace

StateTable init_leaf(const DpContext& ctx, Index node, const SketchSet& sketches) {
    const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(node)];
    if (nd.leaf_block < 0) throw std::logic_error("init_leaf: node has no block");
    const Index block = nd.leaf_block;

    // Map the node's mixed rows onto the sketch key layout.
    std::vector<int> pos(nd.mixed_rows.size());
    for (std::size_t t = 0; t < nd.mixed_rows.size(); ++t)
        pos[t] = position_of(sketches.mixed_rows, nd.mixed_rows[t]);

    std::vector<int> comb_sign(nd.comb_rows.size(), 0);
    for (std::size_t t = 0; t < nd.comb_rows.size(); ++t) {
        const auto& con = ctx.problem.constraints[static_cast<std::size_t>(nd.comb_rows[t])];
        const double v = con.form.indicator[block];
        comb_sign[t] = v > 0.5 ? 1 : (v < -0.5 ? -1 : 0);
    }

    StateTable table;
    table.node = node;
    for (std::size_t si = 0; si < sketches.sketches.size(); ++si) {
        const Sketch& s = sketches.sketches[si];
        StateKey key;
        key.k_sum.resize(nd.mixed_rows.size());
        key.kappa_sum.resize(nd.comb_rows.size());
        for (std::size_t t = 0; t < nd.mixed_rows.size(); ++t)
            key.k_sum[t] = pos[t] >= 0 ? s.key.k[static_cast<std::size_t>(pos[t])] : 0;
        for (std::size_t t = 0; t < nd.comb_rows.size(); ++t)
            key.kappa_sum[t] = comb_sign[t] * static_cast<int>(s.key.delta);
        Backpointer bp;
        bp.kind = Backpointer::Kind::Leaf;
        bp.sketch_index = si;
        insert_min(table, std::move(key), s.value, std::move(bp));
    }
    return table;
}

StateTable filter_consistent(const DpContext& ctx, Index node, StateTable table) {
    const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(node)];
    if (nd.finalized.empty()) return table;
    const double e = ctx.eps.value();
    const double ct = ctx.tol.cons_tol;

    for (auto it = table.states.begin(); it != table.states.end();) {
        bool ok = true;
        for (Index r : nd.finalized) {
            const auto& con = ctx.problem.constraints[static_cast<std::size_t>(r)];
            if (con.kind == ConstraintKind::MixedInteger) {
                const int p = position_of(nd.mixed_rows, r);
                if (p < 0) throw std::logic_error("filter_consistent: finalized row not in bag");
                const int khat = it->first.k_sum[static_cast<std::size_t>(p)];
                if (e * khat > con.rhs + ct) ok = false;
                if (ok && con.sense == ConstraintSense::Equal) {
                    const auto support =
                        static_cast<double>(ctx.problem.incidence[static_cast<std::size_t>(r)].size());
                    if (e * (khat + support) < con.rhs - ct) ok = false;
                }
            } else {
                const int p = position_of(nd.comb_rows, r);
                if (p < 0) throw std::logic_error("filter_consistent: finalized row not in bag");
                const auto kappa =
                    static_cast<long long>(it->first.kappa_sum[static_cast<std::size_t>(p)]);
                if (kappa > std::llround(con.rhs)) ok = false;
            }
            if (!ok) break;
        }
        it = ok ? std::next(it) : table.states.erase(it);
    }
    return table;
}

StateTable lift_one_child(const DpContext& ctx, Index t, const StateTable& child) {
    const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(t)];
    const auto& cd = ctx.rbd.nodes[static_cast<std::size_t>(child.node)];

    std::vector<int> mpos(nd.mixed_rows.size()), cpos(nd.comb_rows.size());
    for (std::size_t i = 0; i < nd.mixed_rows.size(); ++i)
        mpos[i] = position_of(cd.mixed_rows, nd.mixed_rows[i]);
    for (std::size_t i = 0; i < nd.comb_rows.size(); ++i)
        cpos[i] = position_of(cd.comb_rows, nd.comb_rows[i]);

    StateTable table;
    table.node = t;
    for (const auto& [ckey, centry] : child.states) {
        StateKey key;
        key.k_sum.resize(nd.mixed_rows.size());
        key.kappa_sum.resize(nd.comb_rows.size());
        for (std::size_t i = 0; i < nd.mixed_rows.size(); ++i)
            key.k_sum[i] = mpos[i] >= 0 ? ckey.k_sum[static_cast<std::size_t>(mpos[i])] : 0;
        for (std::size_t i = 0; i < nd.comb_rows.size(); ++i)
            key.kappa_sum[i] = cpos[i] >= 0 ? ckey.kappa_sum[static_cast<std::size_t>(cpos[i])] : 0;
        Backpointer bp;
        bp.kind = Backpointer::Kind::OneChild;
        bp.child = ckey;
        insert_min(table, std::move(key), centry.value, std::move(bp));
    }
    return table;
}

StateTable merge_two_children(const DpContext& ctx, Index t, const StateTable& left,
                              const StateTable& right) {
    const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(t)];
    const auto& ld = ctx.rbd.nodes[static_cast<std::size_t>(left.node)];
    const auto& rd = ctx.rbd.nodes[static_cast<std::size_t>(right.node)];
    const int kmin = ctx.eps.k_min();
    const int kmax = ctx.eps.k_max();

    std::vector<int> ml(nd.mixed_rows.size()), mr(nd.mixed_rows.size());
    std::vector<int> cl(nd.comb_rows.size()), cr(nd.comb_rows.size());
    for (std::size_t i = 0; i < nd.mixed_rows.size(); ++i) {
        ml[i] = position_of(ld.mixed_rows, nd.mixed_rows[i]);
        mr[i] = position_of(rd.mixed_rows, nd.mixed_rows[i]);
    }
    for (std::size_t i = 0; i < nd.comb_rows.size(); ++i) {
        cl[i] = position_of(ld.comb_rows, nd.comb_rows[i]);
        cr[i] = position_of(rd.comb_rows, nd.comb_rows[i]);
    }

    StateTable table;
    table.node = t;
    for (const auto& [lkey, lentry] : left.states) {
        for (const auto& [rkey, rentry] : right.states) {
            StateKey key;
            key.k_sum.resize(nd.mixed_rows.size());
            key.kappa_sum.resize(nd.comb_rows.size());
            bool keep = true;
            for (std::size_t i = 0; i < nd.mixed_rows.size() && keep; ++i) {
                const int a = ml[i] >= 0 ? lkey.k_sum[static_cast<std::size_t>(ml[i])] : 0;
                const int b = mr[i] >= 0 ? rkey.k_sum[static_cast<std::size_t>(mr[i])] : 0;
                int k = a + b;
                if (ml[i] >= 0 && mr[i] >= 0) {
                    // Contributions from both subtrees: saturate below (safe
                    // for upper-bounded rows), discard above (unrealizable).
                    if (k > kmax) keep = false;
                    if (k < kmin) k = kmin;
                }
                key.k_sum[i] = k;
            }
            if (!keep) continue;
            for (std::size_t i = 0; i < nd.comb_rows.size(); ++i) {
                const int a = cl[i] >= 0 ? lkey.kappa_sum[static_cast<std::size_t>(cl[i])] : 0;
                const int b = cr[i] >= 0 ? rkey.kappa_sum[static_cast<std::size_t>(cr[i])] : 0;
                key.kappa_sum[i] = a + b;
            }
            Backpointer bp;
            bp.kind = Backpointer::Kind::TwoChildren;
            bp.child = lkey;
            bp.child2 = rkey;
            insert_min(table, std::move(key), lentry.value + rentry.value, std::move(bp));
        }
    }
    return table;
}

DpOutcome run_dp(const DpContext& ctx, const std::vector<SketchSet>& sketch_sets) {
    DpOutcome out;
    out.tables.resize(ctx.rbd.nodes.size());
    out.stats.reserve(ctx.rbd.post_order.size());

    for (Index node : ctx.rbd.post_order) {
        const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(node)];
        StateTable table;
        if (nd.leaf_block >= 0) {
            table = init_leaf(ctx, node, sketch_sets[static_cast<std::size_t>(nd.leaf_block)]);
        } else if (nd.children.size() == 1) {
            table = lift_one_child(ctx, node, out.tables[static_cast<std::size_t>(nd.children[0])]);
        } else if (nd.children.size() == 2) {
            table = merge_two_children(ctx, node,
                                       out.tables[static_cast<std::size_t>(nd.children[0])],
                                       out.tables[static_cast<std::size_t>(nd.children[1])]);
        } else {
            throw std::logic_error("run_dp: internal node without children");
        }
        table = filter_consistent(ctx, node, std::move(table));

        const double bound = table_bound(ctx, node);
        if (static_cast<double>(table.states.size()) > bound)
            throw std::logic_error("run_dp: state table exceeds its size bound");
        out.stats.push_back({node, table.states.size(), bound});
        out.total_states += table.states.size();

        if (table.states.empty()) {
            out.status = DpStatus::Infeasible;
            return out;
        }
        out.tables[static_cast<std::size_t>(node)] = std::move(table);
    }

    const auto& root_table = out.tables[static_cast<std::size_t>(ctx.rbd.root)];
    out.status = DpStatus::Solution;
    bool first = true;
    for (const auto& [key, entry] : root_table.states) {
        if (first || entry.value < out.value) {
            out.value = entry.value;
            out.root_key = key;
            first = false;
        }
    }
    return out;
}

Certificate extract_certificate(const DpContext& ctx, const std::vector<SketchSet>& sketch_sets,
                                const DpOutcome& outcome) {
    if (outcome.status != DpStatus::Solution)
        throw std::invalid_argument("extract_certificate: no solution to extract");

    Certificate cert;
    cert.x = Eigen::VectorXd::Zero(ctx.problem.num_variables());
    cert.z = Eigen::VectorXi::Zero(ctx.problem.num_blocks());
    std::vector<char> assigned(static_cast<std::size_t>(ctx.problem.num_blocks()), 0);

    std::vector<std::pair<Index, StateKey>> stack;
    stack.emplace_back(ctx.rbd.root, outcome.root_key);
    while (!stack.empty()) {
        auto [node, key] = std::move(stack.back());
        stack.pop_back();
        const auto& table = outcome.tables[static_cast<std::size_t>(node)];
        auto it = table.states.find(key);
        if (it == table.states.end()) throw CorruptTable("dangling state reference");
        const auto& nd = ctx.rbd.nodes[static_cast<std::size_t>(node)];
        const Backpointer& bp = it->second.bp;
        switch (bp.kind) {
            case Backpointer::Kind::Leaf: {
                if (nd.leaf_block < 0) throw CorruptTable("leaf pointer at internal node");
                const auto bi = static_cast<std::size_t>(nd.leaf_block);
                if (assigned[bi]) throw CorruptTable("block assigned twice");
                assigned[bi] = 1;
                const auto& set = sketch_sets[bi];
                if (bp.sketch_index >= set.sketches.size())
                    throw CorruptTable("sketch index out of range");
                const Sketch& s = set.sketches[bp.sketch_index];
                cert.z[nd.leaf_block] = s.key.delta;
                const auto& vars = ctx.problem.blocks[bi].variables;
                for (std::size_t j = 0; j < vars.size(); ++j)
                    cert.x[vars[j]] = s.certificate[static_cast<Eigen::Index>(j)];
                cert.value += s.value;
                break;
            }
            case Backpointer::Kind::OneChild:
                if (nd.children.size() != 1) throw CorruptTable("child arity mismatch");
                stack.emplace_back(nd.children[0], bp.child);
                break;
            case Backpointer::Kind::TwoChildren:
                if (nd.children.size() != 2) throw CorruptTable("child arity mismatch");
                stack.emplace_back(nd.children[0], bp.child);
                stack.emplace_back(nd.children[1], bp.child2);
                break;
        }
    }
    for (char a : assigned) {
        if (!a) throw CorruptTable("block never assigned");
    }

    cert.report = check_solution(ctx.problem, cert.x, cert.z, ctx.eps, ctx.tol);
    return cert;
}

}  // namespace qib
