#include "qcirc/modes.hpp"

#include "qcirc/units.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qcirc {

const char* to_string(ModeKind k) {
    switch (k) {
        case ModeKind::oscillator: return "oscillator";
        case ModeKind::island: return "island";
        case ModeKind::josephson: return "josephson";
    }
    return "?";
}

ModeKind mode_kind_from_string(const std::string& s) {
    if (s == "oscillator" || s == "O") return ModeKind::oscillator;
    if (s == "island" || s == "I") return ModeKind::island;
    if (s == "josephson" || s == "J") return ModeKind::josephson;
    throw std::invalid_argument("unknown mode kind '" + s + "'");
}

double parse_rational(const std::string& s) {
    auto slash = s.find('/');
    std::size_t used = 0;
    if (slash == std::string::npos) {
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument("bad number '" + s + "'");
        return v;
    }
    std::string num = s.substr(0, slash), den = s.substr(slash + 1);
    double a = std::stod(num, &used);
    if (used != num.size()) throw std::invalid_argument("bad rational '" + s + "'");
    double b = std::stod(den, &used);
    if (used != den.size() || b == 0.0) throw std::invalid_argument("bad rational '" + s + "'");
    return a / b;
}

std::vector<int> ModeTransform::indices(ModeKind k) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < kinds.size(); ++i)
        if (kinds[i] == k) out.push_back(static_cast<int>(i));
    return out;
}

int ModeTransform::find(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name) return static_cast<int>(i);
    return -1;
}

NodeMatrices build_node_matrices(const Circuit& c, const BranchMatrix& bm) {
    const int n = static_cast<int>(c.nodes.size());
    NodeMatrices nm;
    nm.C_n = Eigen::MatrixXd::Zero(n, n);
    for (const auto& b : c.branches) {
        if (b.capacitance == 0.0) continue;
        int i = c.node_index(b.from), j = c.node_index(b.to);
        if (i >= 0) nm.C_n(i, i) += b.capacitance;
        if (j >= 0) nm.C_n(j, j) += b.capacitance;
        if (i >= 0 && j >= 0) {
            nm.C_n(i, j) -= b.capacitance;
            nm.C_n(j, i) -= b.capacitance;
        }
    }
    for (int i = 0; i < n; ++i) {
        if (nm.C_n(i, i) == 0.0) {
            nm.C_n(i, i) = regularizing_capacitance;
            nm.regularized_nodes.push_back(c.nodes[i]);
        }
    }

    std::vector<int> rows;
    for (std::size_t r = 0; r < bm.branch_ids.size(); ++r) {
        const Branch* b = c.find_branch(bm.branch_ids[r]);
        if (b && b->kind == BranchKind::inductor) {
            rows.push_back(static_cast<int>(r));
            nm.inductor_ids.push_back(b->id);
        }
    }
    const int m = static_cast<int>(rows.size());
    nm.R_ind = Eigen::MatrixXd::Zero(m, n);
    nm.L_full = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) {
        nm.R_ind.row(k) = bm.R.row(rows[k]).cast<double>();
        nm.L_full(k, k) = c.find_branch(nm.inductor_ids[k])->inductance;
    }
    auto pos = [&](const std::string& id) {
        return static_cast<int>(std::find(nm.inductor_ids.begin(), nm.inductor_ids.end(), id) - nm.inductor_ids.begin());
    };
    for (const auto& mu : c.mutuals) {
        int a = pos(mu.a), b = pos(mu.b);
        if (a >= m || b >= m) throw std::invalid_argument("mutual '" + mu.id + "' references a non-inductor");
        nm.L_full(a, b) += mu.inductance;
        nm.L_full(b, a) += mu.inductance;
    }
    if (m > 0) {
        Eigen::LLT<Eigen::MatrixXd> llt(nm.L_full);
        if (llt.info() != Eigen::Success) throw std::runtime_error("inductance matrix L_b + M is singular");
        nm.L_n_inv = nm.R_ind.transpose() * llt.solve(nm.R_ind);
        nm.L_n_inv = 0.5 * (nm.L_n_inv + nm.L_n_inv.transpose()).eval();
    } else {
        nm.L_n_inv = Eigen::MatrixXd::Zero(n, n);
    }
    return nm;
}

namespace {

// Components of the inductor-only graph over non-ground nodes; the component
// that touches ground is reported separately.
struct InductorComponents {
    std::vector<std::vector<int>> floating;  // node indices, sorted
    std::vector<int> comp_of;                // -1 for nodes tied to ground
};

InductorComponents inductor_components(const Circuit& c) {
    const int n = static_cast<int>(c.nodes.size());
    std::vector<int> parent(n + 1);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& b : c.branches) {
        if (b.kind != BranchKind::inductor) continue;
        int i = c.node_index(b.from) + 1, j = c.node_index(b.to) + 1;
        parent[find(i)] = find(j);
    }
    InductorComponents out;
    out.comp_of.assign(n, -1);
    std::vector<int> label(n + 1, -1);
    for (int i = 1; i <= n; ++i) {
        int r = find(i);
        if (r == find(0)) continue;
        if (label[r] < 0) {
            label[r] = static_cast<int>(out.floating.size());
            out.floating.emplace_back();
        }
        out.floating[label[r]].push_back(i - 1);
        out.comp_of[i - 1] = label[r];
    }
    return out;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
    Eigen::Index k;
    v.cwiseAbs().maxCoeff(&k);
    if (v(k) < 0) v = -v;
}

void finish_transform(const Circuit& c, const NodeMatrices& nm, const SpanningForest& f, ModeTransform& mt) {
    const int n = static_cast<int>(c.nodes.size());
    const auto& S = mt.Rinv;
    const double lscale = std::max(nm.L_n_inv.cwiseAbs().maxCoeff(), 1e-300);

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(nm.C_n);
    Eigen::MatrixXd Cn_inv = lu.inverse();
    mt.C_inv = mt.R * Cn_inv * mt.R.transpose();
    mt.C_inv = 0.5 * (mt.C_inv + mt.C_inv.transpose()).eval();
    mt.L_inv = S.transpose() * nm.L_n_inv * S;
    mt.L_inv = 0.5 * (mt.L_inv + mt.L_inv.transpose()).eval();

    auto osc = mt.indices(ModeKind::oscillator);
    mt.n_osc = static_cast<int>(osc.size());
    mt.n_isl = static_cast<int>(mt.indices(ModeKind::island).size());
    mt.n_jos = static_cast<int>(mt.indices(ModeKind::josephson).size());

    // Inductive energy must live entirely in the oscillator block.
    double lnorm = std::max(mt.L_inv.cwiseAbs().maxCoeff(), lscale);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            bool both_osc = mt.kinds[i] == ModeKind::oscillator && mt.kinds[j] == ModeKind::oscillator;
            if (!both_osc && std::abs(mt.L_inv(i, j)) > 1e-9 * lnorm)
                throw std::runtime_error("transform leaves inductive energy on non-oscillator mode '" +
                                         mt.names[i == j || mt.kinds[i] != ModeKind::oscillator ? i : j] + "'");
        }
    mt.L_inv_O.resize(mt.n_osc, mt.n_osc);
    for (int a = 0; a < mt.n_osc; ++a)
        for (int b = 0; b < mt.n_osc; ++b) mt.L_inv_O(a, b) = mt.L_inv(osc[a], osc[b]);
    if (mt.n_osc > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mt.L_inv_O, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 1e-10 * es.eigenvalues().maxCoeff())
            throw std::runtime_error("oscillator inductance block is not positive definite");
    }

    // Junction flux expansions: zero on islands, integer on Josephson modes.
    for (const auto& b : c.branches) {
        if (b.kind != BranchKind::junction) continue;
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
        int i = c.node_index(b.from), j = c.node_index(b.to);
        if (i >= 0) r(i) += 1;
        if (j >= 0) r(j) -= 1;
        Eigen::RowVectorXd coef = r * S;
        for (int k = 0; k < n; ++k) {
            if (mt.kinds[k] == ModeKind::island && std::abs(coef(k)) > 1e-9)
                throw std::runtime_error("junction '" + b.id + "' depends on island coordinate '" + mt.names[k] + "'");
            if (mt.kinds[k] == ModeKind::josephson) {
                double rnd = std::round(coef(k));
                if (std::abs(coef(k) - rnd) > 1e-9)
                    throw std::runtime_error("junction '" + b.id + "' has non-integer coefficient on Josephson mode '" +
                                             mt.names[k] + "'");
                if (std::abs(rnd) > 1)
                    mt.warnings.push_back("junction '" + b.id + "' displaces Josephson mode '" + mt.names[k] + "' by " +
                                          std::to_string(static_cast<int>(rnd)) + " Cooper pairs");
            }
        }
    }

    // Periodic columns must form a lattice basis of the inductor-component indicators.
    auto comps = inductor_components(c);
    std::vector<int> periodic;
    for (int k = 0; k < n; ++k)
        if (mt.kinds[k] != ModeKind::oscillator) periodic.push_back(k);
    const int p = static_cast<int>(periodic.size());
    if (p != static_cast<int>(comps.floating.size()))
        throw std::runtime_error("transform has " + std::to_string(p) + " island/Josephson modes but the circuit has " +
                                 std::to_string(comps.floating.size()) + " flat directions");
    if (p > 0) {
        Eigen::MatrixXd B(p, p);
        for (int col = 0; col < p; ++col) {
            const auto s = S.col(periodic[col]);
            for (int node = 0; node < n; ++node)
                if (comps.comp_of[node] < 0 && std::abs(s(node)) > 1e-9)
                    throw std::runtime_error("mode '" + mt.names[periodic[col]] + "' moves a grounded node");
            for (int k = 0; k < p; ++k) {
                const auto& members = comps.floating[k];
                double v = s(members.front());
                for (int node : members)
                    if (std::abs(s(node) - v) > 1e-9)
                        throw std::runtime_error("mode '" + mt.names[periodic[col]] + "' is not flat for the inductors");
                if (std::abs(v - std::round(v)) > 1e-9)
                    throw std::runtime_error("mode '" + mt.names[periodic[col]] + "' has a non-integer charge row");
                B(k, col) = std::round(v);
            }
        }
        double det = B.fullPivLu().determinant();
        if (std::abs(std::abs(det) - 1.0) > 1e-9)
            throw std::runtime_error("island/Josephson charge rows do not generate the Cooper-pair lattice (|det| = " +
                                     std::to_string(std::abs(det)) + ")");
    }
    for (const auto& isl : f.islands) {
        bool found = false;
        for (int k = 0; k < n && !found; ++k) {
            if (mt.kinds[k] != ModeKind::island) continue;
            bool ok = true;
            for (int node = 0; node < n; ++node) {
                bool member = std::binary_search(isl.nodes.begin(), isl.nodes.end(), c.nodes[node], id_less);
                if (std::abs(S(node, k) - (member ? 1.0 : 0.0)) > 1e-9) ok = false;
            }
            found = ok;
        }
        if (!found)
            throw std::runtime_error("no island mode carries the total charge of the island containing '" +
                                     isl.virtual_ground + "'");
    }

    mt.freq = Eigen::VectorXd::Zero(n);
    mt.Z = Eigen::VectorXd::Zero(n);
    mt.z = Eigen::VectorXd::Zero(n);
    for (int k : osc) {
        double ci = mt.C_inv(k, k), li = mt.L_inv(k, k);
        if (!(ci > 0 && li > 0)) throw std::runtime_error("oscillator '" + mt.names[k] + "' has no frequency");
        mt.freq(k) = std::sqrt(units::charge_energy * ci * units::flux_energy * li) / (2.0 * std::numbers::pi);
        mt.Z(k) = units::impedance_unit * std::sqrt(ci / li);
        mt.z(k) = std::numbers::pi * mt.Z(k) / units::R_Q;
    }

    auto bo = bias_offsets(c, nm, f, mt);
    mt.dQ = bo.dQ;
    mt.dPhi = bo.dPhi;
}

}  // namespace

ModeTransform build_mode_transform(const Circuit& c, const NodeMatrices& nm, const SpanningForest& f,
                                   const UserTransform* user) {
    const int n = static_cast<int>(c.nodes.size());
    ModeTransform mt;
    if (n == 0) {
        mt.R = mt.Rinv = mt.C_inv = mt.L_inv = mt.L_inv_O = Eigen::MatrixXd(0, 0);
        mt.freq = mt.Z = mt.z = mt.dQ = mt.dPhi = Eigen::VectorXd(0);
        return mt;
    }

    if (user) {
        if (static_cast<int>(user->rows.size()) != n)
            throw std::invalid_argument("user transform has " + std::to_string(user->rows.size()) + " rows, circuit has " +
                                        std::to_string(n) + " nodes");
        mt.R = Eigen::MatrixXd::Zero(n, n);
        for (int r = 0; r < n; ++r) {
            const auto& row = user->rows[r];
            mt.names.push_back(row.name);
            mt.kinds.push_back(row.kind);
            for (const auto& [node, v] : row.coeffs) {
                int idx = c.node_index(node);
                if (idx < 0) throw std::invalid_argument("user transform row '" + row.name + "' references ground");
                mt.R(r, idx) += v;
            }
        }
        Eigen::FullPivLU<Eigen::MatrixXd> lu(mt.R);
        if (lu.rank() < n) throw std::runtime_error("user transform is singular");
        mt.Rinv = lu.inverse();
        double rank_expected = 0;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(nm.L_n_inv, Eigen::EigenvaluesOnly);
        double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
        for (int k = 0; k < n; ++k)
            if (lmax > 0 && es.eigenvalues()(k) > 1e-10 * lmax) rank_expected += 1;
        int n_osc = static_cast<int>(std::count(mt.kinds.begin(), mt.kinds.end(), ModeKind::oscillator));
        if (n_osc != static_cast<int>(rank_expected))
            throw std::runtime_error("user transform declares " + std::to_string(n_osc) + " oscillators, L_n_inv has rank " +
                                     std::to_string(static_cast<int>(rank_expected)));
        int n_isl = static_cast<int>(std::count(mt.kinds.begin(), mt.kinds.end(), ModeKind::island));
        if (n_isl != static_cast<int>(f.islands.size()))
            throw std::runtime_error("user transform declares " + std::to_string(n_isl) + " island modes, circuit has " +
                                     std::to_string(f.islands.size()));
        finish_transform(c, nm, f, mt);
        return mt;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(nm.L_n_inv);
    const auto& ev = es.eigenvalues();
    double lmax = ev.cwiseAbs().maxCoeff();
    std::vector<int> osc_dirs;
    for (int k = n - 1; k >= 0; --k)
        if (lmax > 0 && ev(k) > 1e-10 * lmax) osc_dirs.push_back(k);
    std::reverse(osc_dirs.begin(), osc_dirs.end());

    auto comps = inductor_components(c);
    if (n - static_cast<int>(osc_dirs.size()) != static_cast<int>(comps.floating.size()))
        throw std::runtime_error("automatic transform: null space of L_n_inv does not match inductor components");

    std::vector<Eigen::VectorXd> cols;
    int counter = 0;
    for (int k : osc_dirs) {
        Eigen::VectorXd v = es.eigenvectors().col(k);
        fix_sign(v);
        cols.push_back(v);
        mt.kinds.push_back(ModeKind::oscillator);
        mt.names.push_back("O" + std::to_string(++counter));
    }
    std::vector<char> excluded(comps.floating.size(), 0);
    counter = 0;
    for (const auto& isl : f.islands) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        for (const auto& node : isl.nodes) v(c.node_index(node)) = 1.0;
        cols.push_back(v);
        mt.kinds.push_back(ModeKind::island);
        mt.names.push_back("I" + std::to_string(++counter));
        excluded[comps.comp_of[c.node_index(isl.virtual_ground)]] = 1;
    }
    counter = 0;
    for (std::size_t k = 0; k < comps.floating.size(); ++k) {
        if (excluded[k]) continue;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
        for (int node : comps.floating[k]) v(node) = 1.0;
        cols.push_back(v);
        mt.kinds.push_back(ModeKind::josephson);
        mt.names.push_back("J" + std::to_string(++counter));
    }
    if (static_cast<int>(cols.size()) != n) throw std::runtime_error("automatic transform: wrong mode count");
    mt.Rinv.resize(n, n);
    for (int k = 0; k < n; ++k) mt.Rinv.col(k) = cols[k];
    Eigen::FullPivLU<Eigen::MatrixXd> lu(mt.Rinv);
    if (lu.rank() < n) throw std::runtime_error("automatic transform: mode columns are dependent");
    mt.R = lu.inverse();
    finish_transform(c, nm, f, mt);
    return mt;
}

BiasOffsets bias_offsets(const Circuit& c, const NodeMatrices& nm, const SpanningForest& f, const ModeTransform& mt) {
    const int n = static_cast<int>(c.nodes.size());
    BiasOffsets out;
    Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
    for (const auto& [node, v] : c.charge_offsets) q(c.node_index(node)) += v;
    out.dQ = mt.Rinv.transpose() * q;
    out.dPhi = Eigen::VectorXd::Zero(n);

    const int m = static_cast<int>(nm.inductor_ids.size());
    if (m == 0 || mt.n_osc == 0) return out;
    Eigen::VectorXd phix(m);
    for (int k = 0; k < m; ++k) {
        phix(k) = c.find_branch(nm.inductor_ids[k])->external_flux;
        if (const auto* cl = f.closure(nm.inductor_ids[k])) phix(k) -= cl->fluxoid;
    }
    if (phix.isZero(0.0)) return out;
    Eigen::VectorXd current = nm.L_full.llt().solve(phix);  // 1/pH * Phi0
    Eigen::VectorXd drive = nm.R_ind.transpose() * current;
    auto osc = mt.indices(ModeKind::oscillator);
    Eigen::VectorXd b(mt.n_osc);
    for (int a = 0; a < mt.n_osc; ++a) b(a) = mt.Rinv.col(osc[a]).dot(drive);
    Eigen::VectorXd x = mt.L_inv_O.llt().solve(b);
    for (int a = 0; a < mt.n_osc; ++a) out.dPhi(osc[a]) = x(a);
    return out;
}

}  // namespace qcirc
