#include "qcirc/hierarchy.hpp"

#include "qcirc/parallel.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qcirc {

PartitionNode partition_from_json(const nlohmann::json& j) {
    PartitionNode p;
    p.label = j.value("label", std::string{});
    if (j.contains("modes")) p.modes = j.at("modes").get<std::vector<std::string>>();
    if (j.contains("children"))
        for (const auto& c : j.at("children")) p.children.push_back(partition_from_json(c));
    p.retain = j.value("retain", 0);
    p.extra = j.value("extra", 0);
    p.window_ghz = j.value("window_ghz", 0.0);
    if (!p.modes.empty() && !p.children.empty())
        throw std::invalid_argument("partition node '" + p.label + "' has both modes and children");
    if (p.retain < 0 || p.extra < 0) throw std::invalid_argument("partition counts must be nonnegative");
    return p;
}

nlohmann::json partition_to_json(const PartitionNode& p) {
    nlohmann::json j;
    j["label"] = p.label;
    if (p.leaf()) j["modes"] = p.modes;
    if (p.retain) j["retain"] = p.retain;
    if (p.extra) j["extra"] = p.extra;
    if (p.window_ghz > 0) j["window_ghz"] = p.window_ghz;
    if (!p.leaf()) {
        j["children"] = nlohmann::json::array();
        for (const auto& c : p.children) j["children"].push_back(partition_to_json(c));
    }
    return j;
}

std::vector<const PartitionNode*> check_partition(const PartitionNode& root, const ModeTransform& mt) {
    std::vector<const PartitionNode*> leaves;
    std::vector<int> seen(mt.size(), 0);
    std::function<void(const PartitionNode&)> walk = [&](const PartitionNode& p) {
        if (p.leaf()) {
            if (p.modes.empty()) throw std::invalid_argument("partition leaf '" + p.label + "' has no modes");
            for (const auto& m : p.modes) {
                int k = mt.find(m);
                if (k < 0) throw std::invalid_argument("partition names unknown mode '" + m + "'");
                if (seen[k]++) throw std::invalid_argument("mode '" + m + "' assigned more than once");
            }
            leaves.push_back(&p);
        } else {
            for (const auto& c : p.children) walk(c);
        }
    };
    walk(root);
    for (std::size_t k = 0; k < mt.size(); ++k)
        if (!seen[k]) throw std::invalid_argument("mode '" + mt.names[k] + "' is not assigned to a subsystem");
    return leaves;
}

PartitionNode suggest_partition(const ModeTransform& mt, const std::vector<JunctionDecomposition>& jd) {
    const int n = static_cast<int>(mt.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    auto add = [&](const Eigen::MatrixXd& M, int i, int j) {
        double s = std::sqrt(std::abs(M(i, i) * M(j, j)));
        if (s > 0) w(i, j) += std::abs(M(i, j)) / s;
    };
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) {
                add(mt.C_inv, i, j);
                add(mt.L_inv, i, j);
            }
    for (const auto& d : jd) {
        std::vector<int> ms;
        for (auto [m, a] : d.a) ms.push_back(m);
        for (auto [m, c] : d.n) ms.push_back(m);
        for (int x : ms)
            for (int y : ms)
                if (x != y) w(x, y) += 1.0;
    }
    std::vector<int> side(n);
    for (int i = 0; i < n; ++i) side[i] = i < (n + 1) / 2 ? 0 : 1;
    auto gain = [&](int i) {
        double g = 0;
        for (int j = 0; j < n; ++j) g += (side[j] != side[i] ? 1 : -1) * w(i, j);
        return g;
    };
    // Swap pairs across the cut while that lowers the cut weight.
    for (int pass = 0; pass < n * n; ++pass) {
        double best = 1e-12;
        int bi = -1, bj = -1;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (side[i] == 0 && side[j] == 1) {
                    double g = gain(i) + gain(j) - 2 * w(i, j);
                    if (g > best) {
                        best = g;
                        bi = i;
                        bj = j;
                    }
                }
        if (bi < 0) break;
        std::swap(side[bi], side[bj]);
    }
    PartitionNode root;
    root.label = "root";
    for (int s = 0; s < 2; ++s) {
        PartitionNode leaf;
        leaf.label = s == 0 ? "A" : "B";
        for (int i = 0; i < n; ++i)
            if (side[i] == s) leaf.modes.push_back(mt.names[i]);
        if (!leaf.modes.empty()) root.children.push_back(leaf);
    }
    return root;
}

Eigen::MatrixXd SplitMatrices::merge_C(const ModeTransform& mt) const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(mt.size(), mt.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t a = 0; a < groups[g].size(); ++a)
            for (std::size_t b = 0; b < groups[g].size(); ++b) M(groups[g][a], groups[g][b]) = C_blocks[g](a, b);
    for (const auto& x : cross)
        if (x.kind == 'Q') M(x.i, x.j) = M(x.j, x.i) = x.value;
    return M;
}

Eigen::MatrixXd SplitMatrices::merge_L(const ModeTransform& mt) const {
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(mt.size(), mt.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t a = 0; a < groups[g].size(); ++a)
            for (std::size_t b = 0; b < groups[g].size(); ++b) M(groups[g][a], groups[g][b]) = L_blocks[g](a, b);
    for (const auto& x : cross)
        if (x.kind == 'F') M(x.i, x.j) = M(x.j, x.i) = x.value;
    return M;
}

SplitMatrices split_matrices(const ModeTransform& mt, const std::vector<std::vector<int>>& groups) {
    SplitMatrices s;
    s.groups = groups;
    std::vector<int> owner(mt.size(), -1);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (int m : groups[g]) {
            if (m < 0 || m >= static_cast<int>(mt.size()) || owner[m] >= 0)
                throw std::invalid_argument("groups must assign each mode once");
            owner[m] = static_cast<int>(g);
        }
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& idx = groups[g];
        Eigen::MatrixXd C(idx.size(), idx.size()), L(idx.size(), idx.size());
        for (std::size_t a = 0; a < idx.size(); ++a)
            for (std::size_t b = 0; b < idx.size(); ++b) {
                C(a, b) = mt.C_inv(idx[a], idx[b]);
                L(a, b) = mt.L_inv(idx[a], idx[b]);
            }
        s.C_blocks.push_back(C);
        s.L_blocks.push_back(L);
    }
    for (std::size_t i = 0; i < mt.size(); ++i)
        for (std::size_t j = i + 1; j < mt.size(); ++j) {
            if (owner[i] < 0 || owner[j] < 0 || owner[i] == owner[j]) continue;
            if (mt.C_inv(i, j) != 0.0)
                s.cross.push_back({'Q', int(i), int(j), owner[i], owner[j], mt.C_inv(i, j)});
            if (mt.L_inv(i, j) != 0.0)
                s.cross.push_back({'F', int(i), int(j), owner[i], owner[j], mt.L_inv(i, j)});
        }
    return s;
}

namespace {

Spectrum lowest_dense(const Eigen::MatrixXcd& H, int k, const SolverOptions& opt) {
    if (H.rows() <= opt.dense_limit) return eigensolve_lowest(H, k, opt);
    LinearOperator op = [&H](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = H * x; };
    return eigensolve_lowest(op, H.rows(), gershgorin(H), k, opt);
}

SubsystemSpectrum finish_subsystem(const Spectrum& s, int retain, int extra, long long dim, double norm,
                                   const std::string& label) {
    SubsystemSpectrum out;
    out.label = label;
    out.retain = retain;
    out.extra = extra;
    out.dimension = dim;
    out.energies = s.values.head(retain + extra);
    out.vectors = s.vectors.leftCols(retain + extra);
    if (!s.converged) out.warnings.push_back("subsystem '" + label + "': eigensolver did not reach tolerance");
    if (retain < s.values.size() && s.values(retain) - s.values(retain - 1) <= 1e-9 * std::max(norm, 1.0))
        out.warnings.push_back("subsystem '" + label + "': retained levels split a degenerate block");
    return out;
}

template <class Solve>
SubsystemSpectrum diagonalize_generic(Solve&& solve, long long dim, int retain, int extra, double window,
                                      const std::string& label) {
    if (window > 0) {
        int k = static_cast<int>(std::min<long long>(dim, 16));
        while (true) {
            Spectrum s = solve(k);
            int inside = 0;
            while (inside < k && s.values(inside) - s.values(0) <= window) ++inside;
            if (inside < k || k == dim) {
                retain = inside;
                break;
            }
            k = static_cast<int>(std::min<long long>(dim, 2LL * k));
        }
    }
    if (retain < 1) throw std::invalid_argument("subsystem '" + label + "' must retain at least one level");
    if (retain + extra > dim)
        throw std::invalid_argument("subsystem '" + label + "' has dimension " + std::to_string(dim) +
                                    ", cannot keep " + std::to_string(retain + extra) + " levels");
    int k = static_cast<int>(std::min<long long>(dim, retain + extra + 1));
    Spectrum s = solve(k);
    return finish_subsystem(s, retain, extra, dim, s.norm, label);
}

// Applies (x)_c ops[c] (nullptr = identity) to every column of X, row index with factor 0 most significant.
Eigen::MatrixXcd kron_apply(const std::vector<const Eigen::MatrixXcd*>& ops, const std::vector<int>& dims,
                            Eigen::MatrixXcd X) {
    long long D = 1;
    for (int d : dims) D *= d;
    long long stride = D;
    Eigen::VectorXcd v, y;
    for (std::size_t c = 0; c < dims.size(); ++c) {
        const int d = dims[c];
        stride /= d;
        if (!ops[c]) continue;
        const auto& A = *ops[c];
        const long long outer = D / (d * stride);
        v.resize(d);
        for (Eigen::Index col = 0; col < X.cols(); ++col)
            for (long long o = 0; o < outer; ++o)
                for (long long t = 0; t < stride; ++t) {
                    const long long base = o * d * stride + t;
                    for (int i = 0; i < d; ++i) v(i) = X(base + i * stride, col);
                    y.noalias() = A * v;
                    for (int i = 0; i < d; ++i) X(base + i * stride, col) = y(i);
                }
    }
    return X;
}

std::string factor_key(const std::vector<Factor>& fs, const BasisSpec& global) {
    std::ostringstream os;
    os.precision(12);
    for (std::size_t i = 0; i < fs.size(); ++i) {
        if (i) os << " ";
        os << to_string(fs[i].op.type);
        if (fs[i].op.param != 0.0) os << "(" << fs[i].op.param << ")";
        os << "@" << global.modes[fs[i].mode].name;
    }
    return os.str();
}

struct LeafOp {
    int leaf = 0;
    std::string key;
    std::shared_ptr<const Eigen::MatrixXcd> m;  // kept x kept
};

struct BlockTerm {
    cplx coeff;
    std::vector<LeafOp> ops;  // sorted by leaf
    std::string origin;
};

struct Leaf {
    const PartitionNode* p = nullptr;
    std::vector<int> modes;
    std::map<int, int> local;
    BasisSpec basis;
    std::vector<HamiltonianTerm> terms;
    SubsystemSpectrum spec;
};

struct Node {
    const PartitionNode* p = nullptr;
    int leaf = -1;
    int parent = -1;
    std::vector<int> children;
    std::set<int> leaves;
    int n_g = 0, n_keep = 0;
    Eigen::VectorXd energies;
    Eigen::MatrixXcd W;     // internal: product space x kept
    std::vector<int> dims;  // internal: child g dimensions
};

class Solver {
public:
    Solver(const CircuitModel& model, const PartitionNode& root, const HierarchyOptions& opt, OperatorCache& cache)
        : model_(model), opt_(opt), cache_(cache) {
        check_partition(root, model.transform);
        if (root.leaf()) {
            wrapped_.label = "root";
            wrapped_.children.push_back(root);
            flatten(wrapped_, -1);
        } else {
            flatten(root, -1);
        }
    }

    HierarchyResult run() {
        HierarchyResult res;
        split_terms();
        solve_leaves(res);
        std::vector<BlockTerm> blocks = project_cross();
        if (opt_.corrections) add_corrections(blocks, res);
        assign(blocks);
        solve_node(0, res, true);
        res.effective_dimension = 1;
        for (int d : nodes_[0].dims) res.effective_dimension *= d;
        for (const auto& l : leaves_) {
            res.leaves.push_back(l.spec);
            for (const auto& w : l.spec.warnings) res.warnings.push_back(w);
        }
        res.expectation = [this](int mode, const OpDesc& op, int k) { return expectation(mode, op, k); };
        return res;
    }

private:
    int flatten(const PartitionNode& p, int parent) {
        int id = static_cast<int>(nodes_.size());
        nodes_.emplace_back();
        nodes_[id].p = &p;
        nodes_[id].parent = parent;
        if (p.leaf()) {
            Leaf l;
            l.p = &p;
            for (const auto& m : p.modes) l.modes.push_back(model_.transform.find(m));
            std::sort(l.modes.begin(), l.modes.end());
            for (std::size_t i = 0; i < l.modes.size(); ++i) {
                l.local[l.modes[i]] = static_cast<int>(i);
                l.basis.modes.push_back(model_.basis.modes[l.modes[i]]);
            }
            nodes_[id].leaf = static_cast<int>(leaves_.size());
            nodes_[id].leaves.insert(nodes_[id].leaf);
            leaf_node_.push_back(id);
            leaves_.push_back(std::move(l));
            for (int m : leaves_.back().modes) mode_leaf_[m] = nodes_[id].leaf;
        } else {
            for (const auto& c : p.children) {
                int cid = flatten(c, id);
                nodes_[id].children.push_back(cid);
                nodes_[id].leaves.insert(nodes_[cid].leaves.begin(), nodes_[cid].leaves.end());
            }
        }
        return id;
    }

    struct CrossTerm {
        cplx coeff;
        std::vector<std::pair<int, std::vector<Factor>>> parts;  // leaf -> global factors
        std::string origin;
    };

    void split_terms() {
        for (const auto& t : model_.terms) {
            std::map<int, std::vector<Factor>> parts;
            for (const auto& f : t.factors) parts[mode_leaf_.at(f.mode)].push_back(f);
            if (parts.size() == 1) {
                auto& leaf = leaves_[parts.begin()->first];
                HamiltonianTerm lt = t;
                for (auto& f : lt.factors) f.mode = leaf.local.at(f.mode);
                leaf.terms.push_back(std::move(lt));
            } else if (parts.size() > 1) {
                cross_.push_back({t.coeff, {parts.begin(), parts.end()}, t.origin});
            }
        }
    }

    void solve_leaves(HierarchyResult& res) {
        (void)res;
        parallel_for(static_cast<int>(leaves_.size()), opt_.threads, [&](int i) {
            auto& l = leaves_[i];
            const auto& p = *l.p;
            AssembledHamiltonian H = assemble(l.terms, l.basis, cache_, default_dimension_cap, 1);
            int extra = opt_.corrections ? p.extra : 0;
            int retain = p.retain;
            if (retain == 0 && p.window_ghz <= 0) retain = static_cast<int>(std::min<long long>(H.dim, 1 << 30));
            l.spec = diagonalize_subsystem(H.H, retain, extra, opt_.solver, p.window_ghz, p.label);
            auto& node = nodes_[leaf_node_[i]];
            node.n_g = l.spec.retain;
            node.n_keep = l.spec.kept();
            node.energies = l.spec.energies;
        });
    }

    std::shared_ptr<const Eigen::MatrixXcd> leaf_operator(int leaf, const std::vector<Factor>& global_factors) {
        auto& l = leaves_[leaf];
        std::string key = factor_key(global_factors, model_.basis);
        auto it = leaf_ops_.find({leaf, key});
        if (it != leaf_ops_.end()) return it->second;
        HamiltonianTerm t;
        t.coeff = 1.0;
        t.factors = global_factors;
        for (auto& f : t.factors) f.mode = l.local.at(f.mode);
        SparseH M = term_matrix(t, l.basis, cache_);
        Eigen::MatrixXcd MW = M * l.spec.vectors;
        auto P = std::make_shared<const Eigen::MatrixXcd>(l.spec.vectors.adjoint() * MW);
        leaf_ops_.emplace(std::make_pair(leaf, key), P);
        return P;
    }

    std::vector<BlockTerm> project_cross() {
        std::vector<BlockTerm> out;
        for (const auto& ct : cross_) {
            BlockTerm b;
            b.coeff = ct.coeff;
            b.origin = ct.origin;
            for (const auto& [leaf, fs] : ct.parts)
                b.ops.push_back({leaf, factor_key(fs, model_.basis), leaf_operator(leaf, fs)});
            out.push_back(std::move(b));
        }
        return out;
    }

    void add_corrections(std::vector<BlockTerm>& blocks, HierarchyResult& res) {
        std::map<std::pair<int, int>, std::vector<PairTerm>> pairs;
        for (const auto& b : blocks) {
            if (b.ops.size() != 2) continue;
            const auto& x = b.ops[0];
            const auto& y = b.ops[1];
            pairs[{x.leaf, y.leaf}].push_back({b.coeff, x.key, y.key, *x.m, *y.m, b.origin});
        }
        for (auto& [key, terms] : pairs) {
            const auto& A = leaves_[key.first].spec;
            const auto& B = leaves_[key.second].spec;
            Projection proj = make_projection(A, B, opt_.energy_ceiling);
            CorrectionReport rep = corrected_interaction(A, B, terms, proj);
            if (opt_.self_consistent) {
                const int ga = proj.g_a, gb = proj.g_b;
                Eigen::MatrixXcd Hg = rep.corrected();
                for (int k = 0; k < ga; ++k)
                    for (int l = 0; l < gb; ++l) Hg(k * gb + l, k * gb + l) += A.energies(k) + B.energies(l);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (Hg + Hg.adjoint()), Eigen::EigenvaluesOnly);
                proj.E = es.eigenvalues()(0);
                rep = corrected_interaction(A, B, terms, proj);
            }
            Eigen::MatrixXcd total = Eigen::MatrixXcd::Zero(proj.g_a * proj.g_b, proj.g_a * proj.g_b);
            for (const auto& ch : rep.channels) total += ch.matrix;
            factor_into(blocks, key.first, key.second, proj.g_a, proj.g_b, total, A.kept(), B.kept());
            res.reports.push_back(std::move(rep));
        }
    }

    // Operator-Schmidt decomposition of a matrix on g_a (x) g_b into block terms.
    static void factor_into(std::vector<BlockTerm>& blocks, int la, int lb, int ga, int gb,
                            const Eigen::MatrixXcd& M, int keep_a, int keep_b) {
        Eigen::MatrixXcd R(ga * ga, gb * gb);
        for (int k1 = 0; k1 < ga; ++k1)
            for (int l1 = 0; l1 < gb; ++l1)
                for (int k3 = 0; k3 < ga; ++k3)
                    for (int l3 = 0; l3 < gb; ++l3) R(k1 * ga + k3, l1 * gb + l3) = M(k1 * gb + l1, k3 * gb + l3);
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const auto& sv = svd.singularValues();
        if (sv.size() == 0 || sv(0) == 0.0) return;
        for (Eigen::Index s = 0; s < sv.size(); ++s) {
            if (sv(s) <= 1e-13 * sv(0)) break;
            auto A = std::make_shared<Eigen::MatrixXcd>(Eigen::MatrixXcd::Zero(keep_a, keep_a));
            auto B = std::make_shared<Eigen::MatrixXcd>(Eigen::MatrixXcd::Zero(keep_b, keep_b));
            for (int k1 = 0; k1 < ga; ++k1)
                for (int k3 = 0; k3 < ga; ++k3) (*A)(k1, k3) = svd.matrixU()(k1 * ga + k3, s);
            for (int l1 = 0; l1 < gb; ++l1)
                for (int l3 = 0; l3 < gb; ++l3) (*B)(l1, l3) = std::conj(svd.matrixV()(l1 * gb + l3, s));
            std::string tag = "correction#" + std::to_string(s);
            blocks.push_back({sv(s), {{la, tag, A}, {lb, tag, B}}, tag});
        }
    }

    int lca(const std::vector<int>& leaves) const {
        std::vector<int> path;
        for (int n = leaf_node_[leaves[0]]; n >= 0; n = nodes_[n].parent) path.push_back(n);
        for (int n : path) {
            bool all = true;
            for (int l : leaves) all = all && nodes_[n].leaves.count(l);
            if (all) return n;
        }
        return 0;
    }

    void assign(std::vector<BlockTerm>& blocks) {
        for (auto& b : blocks) {
            std::vector<int> ls;
            for (const auto& o : b.ops) ls.push_back(o.leaf);
            node_terms_[lca(ls)].push_back(std::move(b));
        }
    }

    // Projection of a product of leaf operators into the kept space of `node`.
    Eigen::MatrixXcd project(int node, const std::map<int, const Eigen::MatrixXcd*>& ops) const {
        const auto& n = nodes_[node];
        if (n.leaf >= 0) return *ops.at(n.leaf);
        std::vector<Eigen::MatrixXcd> store(n.children.size());
        std::vector<const Eigen::MatrixXcd*> factors(n.children.size(), nullptr);
        for (std::size_t c = 0; c < n.children.size(); ++c) {
            std::map<int, const Eigen::MatrixXcd*> sub;
            for (const auto& [leaf, m] : ops)
                if (nodes_[n.children[c]].leaves.count(leaf)) sub[leaf] = m;
            if (sub.empty()) continue;
            int g = nodes_[n.children[c]].n_g;
            store[c] = project(n.children[c], sub).topLeftCorner(g, g);
            factors[c] = &store[c];
        }
        return n.W.adjoint() * kron_apply(factors, n.dims, n.W);
    }

    void solve_node(int id, HierarchyResult& res, bool top) {
        auto& n = nodes_[id];
        if (n.leaf >= 0) return;
        for (int c : n.children) solve_node(c, res, false);
        std::vector<Eigen::VectorXd> energies;
        n.dims.clear();
        for (int c : n.children) {
            n.dims.push_back(nodes_[c].n_g);
            energies.push_back(nodes_[c].energies.head(nodes_[c].n_g));
        }
        std::vector<std::vector<Eigen::MatrixXcd>> store;
        std::vector<ProductTerm> terms;
        store.reserve(node_terms_[id].size());
        for (const auto& b : node_terms_[id]) {
            store.emplace_back(n.children.size());
            ProductTerm t;
            t.coeff = b.coeff;
            t.ops.assign(n.children.size(), nullptr);
            for (std::size_t c = 0; c < n.children.size(); ++c) {
                std::map<int, const Eigen::MatrixXcd*> sub;
                for (const auto& o : b.ops)
                    if (nodes_[n.children[c]].leaves.count(o.leaf)) sub[o.leaf] = o.m.get();
                if (sub.empty()) continue;
                int g = nodes_[n.children[c]].n_g;
                store.back()[c] = project(n.children[c], sub).topLeftCorner(g, g);
                t.ops[c] = &store.back()[c];
            }
            terms.push_back(t);
        }
        Eigen::MatrixXcd H = assemble_effective(energies, n.dims, terms);
        const long long D = H.rows();
        res.node_dimensions.push_back(D);
        if (top) {
            int k = static_cast<int>(std::min<long long>(D, opt_.levels));
            if (k < opt_.levels) res.warnings.push_back("top level holds only " + std::to_string(D) + " states");
            Spectrum sp = lowest_dense(H, k, opt_.solver);
            if (!sp.converged) res.warnings.push_back("top level: eigensolver did not reach tolerance");
            n.n_g = n.n_keep = k;
            n.energies = sp.values;
            n.W = sp.vectors;
            res.spectrum = std::move(sp);
            return;
        }
        int k = n.p->retain > 0 ? n.p->retain : static_cast<int>(D);
        auto solve = [&](int kk) { return lowest_dense(H, kk, opt_.solver); };
        SubsystemSpectrum s = diagonalize_generic(solve, D, k, 0, n.p->window_ghz, n.p->label);
        for (const auto& w : s.warnings) res.warnings.push_back(w);
        n.n_g = s.retain;
        n.n_keep = s.kept();
        n.energies = s.energies;
        n.W = s.vectors;
    }

    cplx expectation(int mode, const OpDesc& op, int k) {
        int leaf = mode_leaf_.at(mode);
        auto P = leaf_operator(leaf, {{mode, op}});
        Eigen::MatrixXcd top = project(0, {{leaf, P.get()}});
        return top(k, k);
    }

    const CircuitModel& model_;
    HierarchyOptions opt_;
    OperatorCache& cache_;
    PartitionNode wrapped_;
    std::vector<Node> nodes_;
    std::vector<Leaf> leaves_;
    std::vector<int> leaf_node_;
    std::map<int, int> mode_leaf_;
    std::vector<CrossTerm> cross_;
    std::map<int, std::vector<BlockTerm>> node_terms_;
    std::map<std::pair<int, std::string>, std::shared_ptr<const Eigen::MatrixXcd>> leaf_ops_;
};

}  // namespace

SubsystemSpectrum diagonalize_subsystem(const SparseH& H, int retain, int extra, const SolverOptions& opt,
                                        double window_ghz, const std::string& label) {
    auto solve = [&](int k) { return eigensolve_lowest(H, k, opt); };
    return diagonalize_generic(solve, H.rows(), retain, extra, window_ghz, label);
}

Eigen::MatrixXcd assemble_effective(const std::vector<Eigen::VectorXd>& energies, const std::vector<int>& dims,
                                    const std::vector<ProductTerm>& terms) {
    long long D = 1;
    for (int d : dims) D *= d;
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(D, D);
    std::vector<long long> stride(dims.size());
    long long acc = 1;
    for (int c = static_cast<int>(dims.size()) - 1; c >= 0; --c) {
        stride[c] = acc;
        acc *= dims[c];
    }
    for (long long r = 0; r < D; ++r) {
        double e = 0;
        for (std::size_t c = 0; c < dims.size(); ++c) e += energies[c]((r / stride[c]) % dims[c]);
        H(r, r) = e;
    }
    for (const auto& t : terms) {
        Eigen::MatrixXcd K = Eigen::MatrixXcd::Constant(1, 1, t.coeff);
        for (std::size_t c = 0; c < dims.size(); ++c) {
            Eigen::MatrixXcd f = t.ops[c] ? *t.ops[c] : Eigen::MatrixXcd::Identity(dims[c], dims[c]);
            K = Eigen::kroneckerProduct(K, f).eval();
        }
        H += K;
    }
    return 0.5 * (H + H.adjoint());
}

HierarchyResult iterate_levels(const CircuitModel& model, const PartitionNode& root, const HierarchyOptions& opt,
                               OperatorCache& cache) {
    auto solver = std::make_shared<Solver>(model, root, opt, cache);
    HierarchyResult res = solver->run();
    auto inner = res.expectation;
    res.expectation = [solver, inner](int mode, const OpDesc& op, int k) { return inner(mode, op, k); };
    return res;
}

}  // namespace qcirc
