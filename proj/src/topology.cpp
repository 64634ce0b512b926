#include "qcirc/topology.hpp"

#include <algorithm>
#include <deque>
#include <set>

namespace qcirc {

bool SpanningForest::in_tree(const std::string& id) const {
    return std::find(tree_branches.begin(), tree_branches.end(), id) != tree_branches.end();
}

const ClosureLoop* SpanningForest::closure(const std::string& id) const {
    for (const auto& cl : closures)
        if (cl.branch == id) return &cl;
    return nullptr;
}

namespace {

// Node slot: 0 is ground, k+1 is c.nodes[k].
struct Graph {
    std::vector<std::vector<int>> adj;  // slot -> branch indices (inductive only)
    std::vector<int> from, to;          // per branch index into c.branches
};

Graph inductive_graph(const Circuit& c) {
    Graph g;
    g.adj.resize(c.nodes.size() + 1);
    g.from.resize(c.branches.size(), -1);
    g.to.resize(c.branches.size(), -1);
    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& b = c.branches[k];
        g.from[k] = c.node_index(b.from) + 1;
        g.to[k] = c.node_index(b.to) + 1;
        if (!b.inductive()) continue;
        g.adj[g.from[k]].push_back(static_cast<int>(k));
        g.adj[g.to[k]].push_back(static_cast<int>(k));
    }
    return g;
}

std::vector<std::vector<int>> components(const Graph& g) {
    const int n = static_cast<int>(g.adj.size());
    std::vector<int> comp(n, -1);
    std::vector<std::vector<int>> out;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::vector<int> members{s};
        comp[s] = static_cast<int>(out.size());
        for (std::size_t i = 0; i < members.size(); ++i) {
            int u = members[i];
            for (int b : g.adj[u]) {
                int v = g.from[b] == u ? g.to[b] : g.from[b];
                if (comp[v] < 0) {
                    comp[v] = comp[s];
                    members.push_back(v);
                }
            }
        }
        std::sort(members.begin(), members.end());
        out.push_back(std::move(members));
    }
    return out;
}

}  // namespace

std::vector<Island> find_islands(const Circuit& c) {
    Graph g = inductive_graph(c);
    std::vector<Island> out;
    for (const auto& comp : components(g)) {
        if (comp.front() == 0) continue;  // contains ground
        Island isl;
        for (int s : comp) isl.nodes.push_back(c.nodes[s - 1]);
        isl.virtual_ground = isl.nodes.front();
        out.push_back(std::move(isl));
    }
    return out;
}

SpanningForest build_spanning_forest(const Circuit& c, const ForestOptions& opt) {
    Graph g = inductive_graph(c);
    const int n = static_cast<int>(g.adj.size());
    SpanningForest f;
    f.islands = find_islands(c);
    for (auto& isl : f.islands) {
        for (const auto& [member, vg] : opt.virtual_ground) {
            bool hit = std::binary_search(isl.nodes.begin(), isl.nodes.end(), member, id_less);
            if (!hit) continue;
            if (!std::binary_search(isl.nodes.begin(), isl.nodes.end(), vg, id_less))
                throw std::invalid_argument("virtual ground '" + vg + "' is not in the island of '" + member + "'");
            isl.virtual_ground = vg;
        }
    }

    auto better = [&](int a, int b) {
        const auto& A = c.branches[a];
        const auto& B = c.branches[b];
        if (A.kind != B.kind) {
            bool ai = A.kind == BranchKind::inductor;
            return opt.prefer_inductors ? ai : !ai;
        }
        return opt.ascending_ids ? id_less(A.id, B.id) : id_less(B.id, A.id);
    };

    std::vector<int> parent_branch(n, -1);
    std::vector<int> depth(n, -1);
    std::vector<char> in_tree(c.branches.size(), 0);

    std::vector<int> roots{0};
    for (const auto& isl : f.islands) roots.push_back(c.node_index(isl.virtual_ground) + 1);

    for (int root : roots) {
        if (depth[root] >= 0) continue;
        depth[root] = 0;
        std::deque<int> queue{root};
        while (!queue.empty()) {
            int u = queue.front();
            queue.pop_front();
            std::vector<int> cand = g.adj[u];
            std::sort(cand.begin(), cand.end(), better);
            for (int b : cand) {
                int v = g.from[b] == u ? g.to[b] : g.from[b];
                if (depth[v] >= 0) continue;
                depth[v] = depth[u] + 1;
                parent_branch[v] = b;
                in_tree[b] = 1;
                f.tree_branches.push_back(c.branches[b].id);
                queue.push_back(v);
            }
        }
    }

    // Path from slot u up to its root as (branch, sign) steps walking u -> parent.
    auto up_path = [&](int u) {
        std::vector<std::pair<int, int>> steps;  // (branch, node reached)
        while (parent_branch[u] >= 0) {
            int b = parent_branch[u];
            int p = g.from[b] == u ? g.to[b] : g.from[b];
            steps.push_back({b, u});
            u = p;
        }
        return steps;
    };

    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& b = c.branches[k];
        if (!b.inductive() || in_tree[k]) continue;
        ClosureLoop cl;
        cl.branch = b.id;
        if (auto it = opt.fluxoids.find(b.id); it != opt.fluxoids.end()) cl.fluxoid = it->second;
        // Walk to -> lca -> from along tree edges.
        int a = g.to[k], z = g.from[k];
        auto pa = up_path(a), pz = up_path(z);
        std::set<int> za;
        {
            int u = z;
            za.insert(u);
            for (auto& s : pz) {
                int bb = s.first;
                u = g.from[bb] == s.second ? g.to[bb] : g.from[bb];
                za.insert(u);
            }
        }
        int u = a;
        std::vector<LoopStep> path;
        std::size_t ia = 0;
        while (!za.count(u)) {
            int bb = pa[ia++].first;
            int p = g.from[bb] == u ? g.to[bb] : g.from[bb];
            path.push_back({c.branches[bb].id, g.from[bb] == u ? +1 : -1});
            u = p;
        }
        int lca = u;
        std::vector<LoopStep> down;
        u = z;
        std::size_t iz = 0;
        while (u != lca) {
            int bb = pz[iz++].first;
            int p = g.from[bb] == u ? g.to[bb] : g.from[bb];
            // traversed p -> u on the way down
            down.push_back({c.branches[bb].id, g.from[bb] == p ? +1 : -1});
            u = p;
        }
        std::reverse(down.begin(), down.end());
        path.insert(path.end(), down.begin(), down.end());
        cl.path = std::move(path);
        f.closures.push_back(std::move(cl));
    }
    return f;
}

BranchMatrix branch_matrix(const Circuit& c, const SpanningForest&) {
    BranchMatrix bm;
    std::vector<const Branch*> rows;
    for (const auto& b : c.branches)
        if (b.inductive()) rows.push_back(&b);
    bm.R = Eigen::MatrixXi::Zero(static_cast<int>(rows.size()), static_cast<int>(c.nodes.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        bm.branch_ids.push_back(rows[r]->id);
        int i = c.node_index(rows[r]->from), j = c.node_index(rows[r]->to);
        if (i >= 0) bm.R(static_cast<int>(r), i) += 1;
        if (j >= 0) bm.R(static_cast<int>(r), j) -= 1;
    }
    return bm;
}

}  // namespace qcirc
