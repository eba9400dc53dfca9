#include "qib/graph.hpp"

#include <algorithm>
#include <cassert>
#include <functional>
#include <queue>
#include <set>
#include <sstream>

namespace qib {

namespace {

std::string describe(const char* what, Index id) {
    std::ostringstream out;
    out << what << " " << id;
    return out.str();
}

}  // namespace

IntersectionGraph build_intersection_graph(const Problem& problem) {
    if (!problem.validated)
        throw std::invalid_argument("build_intersection_graph requires a validated problem");
    IntersectionGraph g;
    g.num_constraints = problem.num_constraints();
    g.num_blocks = problem.num_blocks();
    g.incident_blocks = problem.incidence;
    g.constraints_of_block.assign(static_cast<std::size_t>(g.num_blocks), {});
    for (Index r = 0; r < g.num_constraints; ++r)
        for (Index i : g.incident_blocks[static_cast<std::size_t>(r)])
            g.constraints_of_block[static_cast<std::size_t>(i)].push_back(r);

    std::vector<std::set<Index>> nbr(static_cast<std::size_t>(g.num_constraints));
    for (const auto& clique : g.constraints_of_block)
        for (std::size_t a = 0; a < clique.size(); ++a)
            for (std::size_t b = a + 1; b < clique.size(); ++b) {
                nbr[static_cast<std::size_t>(clique[a])].insert(clique[b]);
                nbr[static_cast<std::size_t>(clique[b])].insert(clique[a]);
            }
    g.neighbors.reserve(nbr.size());
    for (auto& s : nbr) g.neighbors.emplace_back(s.begin(), s.end());
    return g;
}

int width(const TreeDecomposition& td) {
    int w = -1;
    for (const auto& node : td.nodes) w = std::max(w, static_cast<int>(node.bag.size()) - 1);
    return w;
}

void validate_decomposition(const TreeDecomposition& td, const IntersectionGraph& graph) {
    const auto n_nodes = static_cast<Index>(td.nodes.size());
    if (n_nodes == 0) throw InvalidDecomposition("decomposition has no nodes");
    for (Index t = 0; t < n_nodes; ++t) {
        if (td.nodes[static_cast<std::size_t>(t)].id != t)
            throw InvalidDecomposition("node ids must be 0..N-1 in order, offending position " +
                                       std::to_string(t));
        for (Index r : td.nodes[static_cast<std::size_t>(t)].bag)
            if (r < 0 || r >= graph.num_constraints)
                throw InvalidDecomposition(describe("bag of node", t) + " references unknown " +
                                           describe("constraint", r));
    }
    if (static_cast<Index>(td.edges.size()) != n_nodes - 1)
        throw InvalidDecomposition("a tree on " + std::to_string(n_nodes) + " nodes needs " +
                                   std::to_string(n_nodes - 1) + " edges, got " +
                                   std::to_string(td.edges.size()));

    std::vector<std::vector<Index>> adj(static_cast<std::size_t>(n_nodes));
    for (const auto& [u, v] : td.edges) {
        if (u < 0 || u >= n_nodes || v < 0 || v >= n_nodes || u == v)
            throw InvalidDecomposition("invalid edge (" + std::to_string(u) + ", " +
                                       std::to_string(v) + ")");
        adj[static_cast<std::size_t>(u)].push_back(v);
        adj[static_cast<std::size_t>(v)].push_back(u);
    }
    std::vector<char> seen(static_cast<std::size_t>(n_nodes), 0);
    std::queue<Index> bfs;
    bfs.push(0);
    seen[0] = 1;
    Index reached = 1;
    while (!bfs.empty()) {
        const Index u = bfs.front();
        bfs.pop();
        for (Index v : adj[static_cast<std::size_t>(u)])
            if (!seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(v)] = 1;
                ++reached;
                bfs.push(v);
            }
    }
    if (reached != n_nodes) throw InvalidDecomposition("decomposition nodes are not connected");

    // Vertex and edge coverage.
    std::vector<std::vector<Index>> holding(static_cast<std::size_t>(graph.num_constraints));
    for (Index t = 0; t < n_nodes; ++t)
        for (Index r : td.nodes[static_cast<std::size_t>(t)].bag)
            holding[static_cast<std::size_t>(r)].push_back(t);
    for (Index r = 0; r < graph.num_constraints; ++r)
        if (holding[static_cast<std::size_t>(r)].empty())
            throw InvalidDecomposition(describe("constraint", r) + " appears in no bag");
    for (Index r = 0; r < graph.num_constraints; ++r) {
        std::vector<char> in_bag(static_cast<std::size_t>(n_nodes), 0);
        for (Index t : holding[static_cast<std::size_t>(r)]) in_bag[static_cast<std::size_t>(t)] = 1;
        for (Index s : graph.neighbors[static_cast<std::size_t>(r)]) {
            if (s < r) continue;
            bool together = false;
            for (Index t : holding[static_cast<std::size_t>(s)])
                if (in_bag[static_cast<std::size_t>(t)]) {
                    together = true;
                    break;
                }
            if (!together)
                throw InvalidDecomposition("adjacent constraints " + std::to_string(r) + " and " +
                                           std::to_string(s) + " share no bag");
        }
        // Connectivity of the set of bags holding r.
        std::vector<char> vis(static_cast<std::size_t>(n_nodes), 0);
        std::queue<Index> q;
        q.push(holding[static_cast<std::size_t>(r)].front());
        vis[static_cast<std::size_t>(holding[static_cast<std::size_t>(r)].front())] = 1;
        Index count = 1;
        while (!q.empty()) {
            const Index u = q.front();
            q.pop();
            for (Index v : adj[static_cast<std::size_t>(u)])
                if (in_bag[static_cast<std::size_t>(v)] && !vis[static_cast<std::size_t>(v)]) {
                    vis[static_cast<std::size_t>(v)] = 1;
                    ++count;
                    q.push(v);
                }
        }
        if (count != static_cast<Index>(holding[static_cast<std::size_t>(r)].size()))
            throw InvalidDecomposition("bags holding " + describe("constraint", r) +
                                       " do not form a connected subtree");
    }
}

TreeDecomposition tree_decomposition(const IntersectionGraph& graph,
                                     const std::optional<TreeDecomposition>& supplied) {
    if (supplied.has_value()) {
        validate_decomposition(*supplied, graph);
        return *supplied;
    }

    const Index m = graph.num_constraints;
    TreeDecomposition td;
    if (m == 0) {
        td.nodes.push_back({0, {}});
        return td;
    }

    // Min-fill elimination: repeatedly remove the vertex whose neighborhood
    // needs the fewest fill edges to become a clique, smallest id on ties.
    std::vector<std::set<Index>> adj(static_cast<std::size_t>(m));
    for (Index r = 0; r < m; ++r)
        adj[static_cast<std::size_t>(r)] = {graph.neighbors[static_cast<std::size_t>(r)].begin(),
                                            graph.neighbors[static_cast<std::size_t>(r)].end()};
    std::vector<char> active(static_cast<std::size_t>(m), 1);
    std::vector<Index> position(static_cast<std::size_t>(m), -1);
    std::vector<std::vector<Index>> bags;
    bags.reserve(static_cast<std::size_t>(m));

    for (Index step = 0; step < m; ++step) {
        Index best = -1;
        long best_fill = -1;
        for (Index v = 0; v < m; ++v) {
            if (!active[static_cast<std::size_t>(v)]) continue;
            long fill = 0;
            const auto& nb = adj[static_cast<std::size_t>(v)];
            for (auto it = nb.begin(); it != nb.end(); ++it)
                for (auto jt = std::next(it); jt != nb.end(); ++jt)
                    if (!adj[static_cast<std::size_t>(*it)].count(*jt)) ++fill;
            if (best == -1 || fill < best_fill) {
                best = v;
                best_fill = fill;
            }
        }
        position[static_cast<std::size_t>(best)] = step;
        std::vector<Index> bag(adj[static_cast<std::size_t>(best)].begin(),
                               adj[static_cast<std::size_t>(best)].end());
        bag.push_back(best);
        std::sort(bag.begin(), bag.end());
        bags.push_back(std::move(bag));

        const auto nb = adj[static_cast<std::size_t>(best)];
        for (auto it = nb.begin(); it != nb.end(); ++it)
            for (auto jt = std::next(it); jt != nb.end(); ++jt) {
                adj[static_cast<std::size_t>(*it)].insert(*jt);
                adj[static_cast<std::size_t>(*jt)].insert(*it);
            }
        for (Index u : nb) adj[static_cast<std::size_t>(u)].erase(best);
        adj[static_cast<std::size_t>(best)].clear();
        active[static_cast<std::size_t>(best)] = 0;
    }

    // Bag for the vertex eliminated at step s connects to the bag of the
    // earliest-eliminated other vertex in it; bags without one are component
    // roots and get chained together afterwards.
    std::vector<Index> order(static_cast<std::size_t>(m));
    for (Index v = 0; v < m; ++v) order[static_cast<std::size_t>(position[static_cast<std::size_t>(v)])] = v;
    std::vector<Index> roots;
    for (Index s = 0; s < m; ++s) {
        td.nodes.push_back({s, bags[static_cast<std::size_t>(s)]});
        Index parent_step = -1;
        for (Index r : bags[static_cast<std::size_t>(s)]) {
            const Index pos = position[static_cast<std::size_t>(r)];
            if (pos > s && (parent_step == -1 || pos < parent_step)) parent_step = pos;
        }
        if (parent_step >= 0)
            td.edges.emplace_back(s, parent_step);
        else
            roots.push_back(s);
    }
    for (std::size_t i = 1; i < roots.size(); ++i) td.edges.emplace_back(roots[i - 1], roots[i]);
    validate_decomposition(td, graph);
    return td;
}

namespace {

/// Mutable scratch node used while rewriting a decomposition.
struct WorkNode {
    std::vector<Index> bag;  // sorted
    std::vector<Index> children;
    Index parent = -1;
    Index leaf_block = -1;
    bool alive = true;
};

bool subset_of(const std::vector<Index>& small, const std::vector<Index>& big) {
    return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

}  // namespace

RootedBinaryDecomposition normalize_decomposition(const TreeDecomposition& td,
                                                  const Problem& problem,
                                                  const IntersectionGraph& graph) {
    validate_decomposition(td, graph);
    const Index n0 = static_cast<Index>(td.nodes.size());

    // Contract edges whose lower bag is contained in the other endpoint; this
    // caps the node count before leaves are attached.
    std::vector<std::vector<Index>> bags(static_cast<std::size_t>(n0));
    std::vector<std::set<Index>> adj(static_cast<std::size_t>(n0));
    for (Index t = 0; t < n0; ++t) bags[static_cast<std::size_t>(t)] = td.nodes[static_cast<std::size_t>(t)].bag;
    for (auto& b : bags) std::sort(b.begin(), b.end());
    for (const auto& [u, v] : td.edges) {
        adj[static_cast<std::size_t>(u)].insert(v);
        adj[static_cast<std::size_t>(v)].insert(u);
    }
    std::vector<char> alive(static_cast<std::size_t>(n0), 1);
    bool changed = true;
    while (changed) {
        changed = false;
        for (Index u = 0; u < n0 && !changed; ++u) {
            if (!alive[static_cast<std::size_t>(u)]) continue;
            for (Index v : adj[static_cast<std::size_t>(u)]) {
                if (!subset_of(bags[static_cast<std::size_t>(u)], bags[static_cast<std::size_t>(v)]))
                    continue;
                for (Index w : adj[static_cast<std::size_t>(u)]) {
                    if (w == v) continue;
                    adj[static_cast<std::size_t>(w)].erase(u);
                    adj[static_cast<std::size_t>(w)].insert(v);
                    adj[static_cast<std::size_t>(v)].insert(w);
                }
                adj[static_cast<std::size_t>(v)].erase(u);
                adj[static_cast<std::size_t>(u)].clear();
                alive[static_cast<std::size_t>(u)] = 0;
                changed = true;
                break;
            }
        }
    }

    // Root the contracted tree at the smallest surviving id.
    std::vector<WorkNode> work;
    std::vector<Index> compact(static_cast<std::size_t>(n0), -1);
    for (Index t = 0; t < n0; ++t)
        if (alive[static_cast<std::size_t>(t)]) {
            compact[static_cast<std::size_t>(t)] = static_cast<Index>(work.size());
            WorkNode wn;
            wn.bag = bags[static_cast<std::size_t>(t)];
            work.push_back(std::move(wn));
        }
    Index root = 0;
    {
        std::vector<std::vector<Index>> cadj(work.size());
        for (Index t = 0; t < n0; ++t)
            if (alive[static_cast<std::size_t>(t)])
                for (Index u : adj[static_cast<std::size_t>(t)])
                    cadj[static_cast<std::size_t>(compact[static_cast<std::size_t>(t)])].push_back(
                        compact[static_cast<std::size_t>(u)]);
        for (auto& list : cadj) std::sort(list.begin(), list.end());
        std::queue<Index> q;
        std::vector<char> seen(work.size(), 0);
        q.push(root);
        seen[static_cast<std::size_t>(root)] = 1;
        while (!q.empty()) {
            const Index u = q.front();
            q.pop();
            for (Index v : cadj[static_cast<std::size_t>(u)])
                if (!seen[static_cast<std::size_t>(v)]) {
                    seen[static_cast<std::size_t>(v)] = 1;
                    work[static_cast<std::size_t>(u)].children.push_back(v);
                    work[static_cast<std::size_t>(v)].parent = u;
                    q.push(v);
                }
        }
    }

    // Attach one designated leaf per block.  Each block's constraint set is a
    // clique of the intersection graph, so some bag contains it.
    const Index nb = problem.num_blocks();
    for (Index i = 0; i < nb; ++i) {
        std::vector<Index> clique = graph.constraints_of_block[static_cast<std::size_t>(i)];
        std::sort(clique.begin(), clique.end());
        Index host = -1;
        for (std::size_t t = 0; t < work.size(); ++t) {
            if (work[t].leaf_block >= 0) continue;
            if (subset_of(clique, work[t].bag)) {
                host = static_cast<Index>(t);
                break;
            }
        }
        if (host < 0)
            throw InvalidDecomposition("no bag contains the constraint clique of block " +
                                       std::to_string(i));
        WorkNode leaf;
        leaf.bag = std::move(clique);
        leaf.leaf_block = i;
        leaf.parent = host;
        const Index leaf_id = static_cast<Index>(work.size());
        work.push_back(std::move(leaf));
        work[static_cast<std::size_t>(host)].children.push_back(leaf_id);
    }

    // Binarize: a node with more than two children keeps its first child and
    // delegates the rest to a fresh copy of itself.
    for (std::size_t t = 0; t < work.size(); ++t) {
        while (work[t].children.size() > 2) {
            WorkNode copy;
            copy.bag = work[t].bag;
            copy.parent = static_cast<Index>(t);
            copy.children.assign(work[t].children.begin() + 1, work[t].children.end());
            const Index copy_id = static_cast<Index>(work.size());
            for (Index c : copy.children) work[c].parent = copy_id;
            work[t].children.erase(work[t].children.begin() + 1, work[t].children.end());
            work[t].children.push_back(copy_id);
            work.push_back(std::move(copy));
        }
    }

    // Prune undesignated leaves; their bags are covered by designated ones.
    bool pruned = true;
    while (pruned) {
        pruned = false;
        for (std::size_t t = 0; t < work.size(); ++t) {
            if (!work[t].alive || work[t].leaf_block >= 0 || !work[t].children.empty()) continue;
            if (work[t].parent < 0) continue;  // keep a degenerate root
            auto& siblings = work[static_cast<std::size_t>(work[t].parent)].children;
            siblings.erase(std::remove(siblings.begin(), siblings.end(), static_cast<Index>(t)),
                           siblings.end());
            work[t].alive = false;
            pruned = true;
        }
    }

    // Renumber in depth-first preorder from the root.
    RootedBinaryDecomposition out;
    std::vector<Index> new_id(work.size(), -1);
    {
        std::vector<Index> stack{root};
        while (!stack.empty()) {
            const Index t = stack.back();
            stack.pop_back();
            new_id[static_cast<std::size_t>(t)] = static_cast<Index>(out.nodes.size());
            RootedNode node;
            node.bag = work[static_cast<std::size_t>(t)].bag;
            node.leaf_block = work[static_cast<std::size_t>(t)].leaf_block;
            out.nodes.push_back(std::move(node));
            const auto& ch = work[static_cast<std::size_t>(t)].children;
            for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
        }
        for (std::size_t t = 0; t < work.size(); ++t) {
            if (new_id[t] < 0) continue;
            RootedNode& node = out.nodes[static_cast<std::size_t>(new_id[t])];
            node.id = new_id[t];
            node.parent = work[t].parent >= 0 ? new_id[static_cast<std::size_t>(work[t].parent)] : -1;
            for (Index c : work[t].children) node.children.push_back(new_id[static_cast<std::size_t>(c)]);
        }
    }
    out.root = new_id[static_cast<std::size_t>(root)];

    out.designated_leaf.assign(static_cast<std::size_t>(nb), -1);
    for (const auto& node : out.nodes)
        if (node.leaf_block >= 0) out.designated_leaf[static_cast<std::size_t>(node.leaf_block)] = node.id;
    for (Index i = 0; i < nb; ++i)
        if (out.designated_leaf[static_cast<std::size_t>(i)] < 0)
            throw InvalidDecomposition("block " + std::to_string(i) + " lost its designated leaf");
    for (const auto& node : out.nodes)
        if (node.children.empty() && node.leaf_block < 0 && node.parent >= 0)
            throw InvalidDecomposition("undesignated leaf survived normalization");

    for (auto& node : out.nodes) {
        for (Index r : node.bag) {
            if (problem.constraints[static_cast<std::size_t>(r)].kind == ConstraintKind::MixedInteger)
                node.mixed_rows.push_back(r);
            else
                node.comb_rows.push_back(r);
        }
        const RootedNode* parent = node.parent >= 0 ? &out.nodes[static_cast<std::size_t>(node.parent)] : nullptr;
        for (Index r : node.bag)
            if (parent == nullptr ||
                !std::binary_search(parent->bag.begin(), parent->bag.end(), r))
                node.finalized.push_back(r);
        out.width = std::max(out.width, static_cast<int>(node.bag.size()) - 1);
    }

    // Post-order traversal (children before parents).
    {
        std::vector<std::pair<Index, std::size_t>> stack{{out.root, 0}};
        while (!stack.empty()) {
            auto& [t, next] = stack.back();
            const auto& ch = out.nodes[static_cast<std::size_t>(t)].children;
            if (next < ch.size()) {
                const Index c = ch[next++];
                stack.emplace_back(c, 0);
            } else {
                out.post_order.push_back(t);
                stack.pop_back();
            }
        }
    }
    return out;
}

}  // namespace qib
