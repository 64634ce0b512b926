#include "qcirc/hamiltonian.hpp"

#include "qcirc/units.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace qcirc {

namespace {
constexpr double pi = std::numbers::pi;

double wrap_phase(double x) {
    double w = std::remainder(x, 2 * pi);
    return w <= -pi ? w + 2 * pi : w;
}
}  // namespace

std::vector<JunctionDecomposition> junction_phase_decomposition(const Circuit& c, const ModeTransform& mt,
                                                                const SpanningForest& f, Eigen::VectorXd* gauge) {
    const int n = static_cast<int>(mt.size());
    const auto jos = mt.indices(ModeKind::josephson);
    struct Raw {
        JunctionDecomposition d;
        double base = 0.0;  // Phi0, before the Josephson gauge shift
        bool tree = false;
    };
    std::vector<Raw> raw;
    for (const auto& b : c.branches) {
        if (b.kind != BranchKind::junction) continue;
        Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(n);
        int i = c.node_index(b.from), j = c.node_index(b.to);
        if (i >= 0) r(i) += 1;
        if (j >= 0) r(j) -= 1;
        Eigen::RowVectorXd coef = n > 0 ? Eigen::RowVectorXd(r * mt.Rinv) : r;
        Raw w;
        w.d.branch = b.id;
        w.d.ej = b.ej;
        for (int k = 0; k < n; ++k) {
            double v = coef(k);
            switch (mt.kinds[k]) {
                case ModeKind::oscillator:
                    if (std::abs(v) > 1e-12) {
                        w.d.a.emplace_back(k, v);
                        w.base += v * mt.dPhi(k);
                    }
                    break;
                case ModeKind::island:
                    if (std::abs(v) > 1e-9) throw std::logic_error("junction '" + b.id + "' depends on an island mode");
                    break;
                case ModeKind::josephson: {
                    double rnd = std::round(v);
                    if (std::abs(v - rnd) > 1e-9)
                        throw std::logic_error("junction '" + b.id + "' has a non-integer Josephson coefficient");
                    if (rnd != 0.0) w.d.n.emplace_back(k, static_cast<int>(rnd));
                    break;
                }
            }
        }
        if (const auto* cl = f.closure(b.id)) w.base += cl->fluxoid;
        w.tree = f.in_tree(b.id);
        raw.push_back(std::move(w));
    }

    Eigen::VectorXd nu = Eigen::VectorXd::Zero(jos.size());
    std::vector<int> rows;
    for (std::size_t k = 0; k < raw.size(); ++k)
        if (raw[k].tree && !raw[k].d.n.empty()) rows.push_back(static_cast<int>(k));
    if (!jos.empty() && !rows.empty()) {
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(rows.size(), jos.size());
        Eigen::VectorXd rhs(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            const auto& w = raw[rows[r]];
            for (auto [mode, cnt] : w.d.n) {
                auto it = std::find(jos.begin(), jos.end(), mode);
                A(r, it - jos.begin()) = cnt;
            }
            rhs(r) = -w.base;
        }
        nu = A.completeOrthogonalDecomposition().solve(rhs);
    }
    std::vector<JunctionDecomposition> out;
    for (auto& w : raw) {
        double ph = w.base;
        for (auto [mode, cnt] : w.d.n) ph += cnt * nu(std::find(jos.begin(), jos.end(), mode) - jos.begin());
        w.d.dphi = wrap_phase(2 * pi * ph);
        if (std::abs(w.d.dphi) < 1e-13) w.d.dphi = 0.0;
        out.push_back(std::move(w.d));
    }
    if (gauge) {
        *gauge = Eigen::VectorXd::Zero(n);
        for (std::size_t k = 0; k < jos.size(); ++k) (*gauge)(jos[k]) = nu(k);
    }
    return out;
}

long long BasisSpec::dimension() const {
    long long d = 1;
    for (const auto& m : modes) {
        if (d > (1LL << 62) / std::max(1, m.size())) throw std::overflow_error("basis dimension overflows");
        d *= m.size();
    }
    return d;
}

std::vector<long long> BasisSpec::strides() const {
    std::vector<long long> s(modes.size());
    long long acc = 1;
    for (int k = static_cast<int>(modes.size()) - 1; k >= 0; --k) {
        s[k] = acc;
        acc *= modes[k].size();
    }
    return s;
}

BasisSpec make_basis(const ModeTransform& mt, const std::map<std::string, int>& trunc, int default_nu,
                     int default_q) {
    for (const auto& [name, v] : trunc)
        if (mt.find(name) < 0) throw std::invalid_argument("basis names unknown mode '" + name + "'");
    BasisSpec b;
    for (std::size_t k = 0; k < mt.size(); ++k) {
        ModeBasis m;
        m.name = mt.names[k];
        m.kind = mt.kinds[k];
        auto it = trunc.find(m.name);
        m.trunc = it != trunc.end() ? it->second : (m.kind == ModeKind::oscillator ? default_nu : default_q);
        if (m.trunc < 1) throw std::invalid_argument("truncation of mode '" + m.name + "' must be >= 1");
        m.z = mt.z(k);
        b.modes.push_back(m);
    }
    return b;
}

const char* to_string(OpType t) {
    switch (t) {
        case OpType::flux: return "flux";
        case OpType::charge: return "charge";
        case OpType::flux_sq: return "flux_sq";
        case OpType::charge_sq: return "charge_sq";
        case OpType::displacement: return "displacement";
        case OpType::shift: return "shift";
    }
    return "?";
}

OpType op_type_from_string(const std::string& s) {
    for (auto t : {OpType::flux, OpType::charge, OpType::flux_sq, OpType::charge_sq, OpType::displacement, OpType::shift})
        if (s == to_string(t)) return t;
    throw std::invalid_argument("unknown operator '" + s + "'");
}

std::shared_ptr<const OperatorMatrix> factor_matrix(OperatorCache& cache, const ModeBasis& mb, const OpDesc& op) {
    if (mb.kind == ModeKind::oscillator) {
        switch (op.type) {
            case OpType::flux: return cache.oscillator(OscOp::flux, mb.trunc, mb.z);
            case OpType::charge: return cache.oscillator(OscOp::charge, mb.trunc, mb.z);
            case OpType::flux_sq: return cache.oscillator(OscOp::flux_sq, mb.trunc, mb.z);
            case OpType::charge_sq: return cache.oscillator(OscOp::charge_sq, mb.trunc, mb.z);
            case OpType::displacement: return cache.oscillator(OscOp::displacement, mb.trunc, mb.z, op.param);
            case OpType::shift: break;
        }
        throw std::invalid_argument("shift is not defined on oscillator mode '" + mb.name + "'");
    }
    switch (op.type) {
        case OpType::flux: return cache.periodic(PeriodicOp::flux, mb.trunc);
        case OpType::charge: return cache.periodic(PeriodicOp::charge, mb.trunc, op.param);
        case OpType::charge_sq: return cache.periodic(PeriodicOp::charge_sq, mb.trunc, op.param);
        case OpType::shift: {
            int steps = static_cast<int>(std::lround(op.param));
            auto one = cache.periodic(steps >= 0 ? PeriodicOp::raise : PeriodicOp::lower, mb.trunc);
            if (std::abs(steps) == 1) return one;
            Eigen::MatrixXcd m = Eigen::MatrixXcd::Identity(one->size(), one->size());
            for (int k = 0; k < std::abs(steps); ++k) m = m * one->m;
            return std::make_shared<const OperatorMatrix>(OperatorMatrix::make(std::move(m)));
        }
        case OpType::flux_sq:
        case OpType::displacement: break;
    }
    throw std::invalid_argument(std::string(to_string(op.type)) + " is not defined on periodic mode '" + mb.name + "'");
}

HamiltonianTerm adjoint(const HamiltonianTerm& t) {
    HamiltonianTerm h = t;
    h.coeff = std::conj(t.coeff);
    for (auto& f : h.factors)
        if (f.op.type == OpType::displacement || f.op.type == OpType::shift) f.op.param = -f.op.param;
    return h;
}

std::vector<HamiltonianTerm> build_terms(const Circuit& c, const ModeTransform& mt,
                                         const std::vector<JunctionDecomposition>& jd, const BasisSpec& basis) {
    (void)c;
    const int n = static_cast<int>(mt.size());
    if (static_cast<int>(basis.modes.size()) != n) throw std::invalid_argument("basis does not match transform");
    std::vector<HamiltonianTerm> terms;
    auto osc = [&](int k) { return mt.kinds[k] == ModeKind::oscillator; };
    auto charge_op = [&](int k, bool sq) {
        OpDesc d{sq ? OpType::charge_sq : OpType::charge, osc(k) ? 0.0 : mt.dQ(k)};
        if (d.param == 0.0) d.param = 0.0;  // normalize -0
        return d;
    };
    auto negligible = [](const Eigen::MatrixXd& M, int i, int j) {
        double s = std::sqrt(std::abs(M(i, i) * M(j, j)));
        return std::abs(M(i, j)) <= 1e-12 * s;
    };

    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            if (i == j ? mt.C_inv(i, i) == 0.0 : negligible(mt.C_inv, i, j)) continue;
            HamiltonianTerm t;
            t.origin = "C_inv[" + mt.names[i] + "," + mt.names[j] + "]";
            if (i == j) {
                t.coeff = 0.5 * units::charge_energy * mt.C_inv(i, i);
                t.factors = {{i, charge_op(i, true)}};
            } else {
                t.coeff = units::charge_energy * mt.C_inv(i, j);
                t.factors = {{i, charge_op(i, false)}, {j, charge_op(j, false)}};
            }
            terms.push_back(std::move(t));
        }
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            if (!osc(i) || !osc(j)) continue;
            if (i == j ? mt.L_inv(i, i) == 0.0 : negligible(mt.L_inv, i, j)) continue;
            HamiltonianTerm t;
            t.origin = "L_inv[" + mt.names[i] + "," + mt.names[j] + "]";
            if (i == j) {
                t.coeff = 0.5 * units::flux_energy * mt.L_inv(i, i);
                t.factors = {{i, {OpType::flux_sq, 0.0}}};
            } else {
                t.coeff = units::flux_energy * mt.L_inv(i, j);
                t.factors = {{i, {OpType::flux, 0.0}}, {j, {OpType::flux, 0.0}}};
            }
            terms.push_back(std::move(t));
        }
    for (const auto& d : jd) {
        HamiltonianTerm t;
        t.origin = d.branch;
        t.coeff = std::polar(-0.5 * d.ej, d.dphi);
        for (auto [mode, a] : d.a) t.factors.push_back({mode, {OpType::displacement, a}});
        for (auto [mode, cnt] : d.n) t.factors.push_back({mode, {OpType::shift, double(cnt)}});
        if (t.factors.empty()) continue;  // constant
        std::sort(t.factors.begin(), t.factors.end(), [](const Factor& x, const Factor& y) { return x.mode < y.mode; });
        auto h = adjoint(t);
        h.origin += "^+";
        terms.push_back(std::move(t));
        terms.push_back(std::move(h));
    }
    return terms;
}

namespace {

struct CompiledFactor {
    long long stride = 1;
    int size = 1;
    // per row digit: (column offset, value)
    std::vector<std::vector<std::pair<long long, cplx>>> rows;
};

struct CompiledTerm {
    cplx coeff;
    std::vector<CompiledFactor> factors;
};

std::vector<CompiledTerm> compile(const std::vector<HamiltonianTerm>& terms, const BasisSpec& basis,
                                  OperatorCache& cache) {
    auto strides = basis.strides();
    std::vector<CompiledTerm> out;
    for (const auto& t : terms) {
        if (t.coeff == cplx(0)) continue;
        CompiledTerm ct;
        ct.coeff = t.coeff;
        int last = -1;
        for (const auto& f : t.factors) {
            if (f.mode < 0 || f.mode >= static_cast<int>(basis.modes.size()))
                throw std::out_of_range("term factor references mode outside the basis");
            if (f.mode <= last) throw std::invalid_argument("term factors must be sorted with one factor per mode");
            last = f.mode;
            auto m = factor_matrix(cache, basis.modes[f.mode], f.op);
            CompiledFactor cf;
            cf.stride = strides[f.mode];
            cf.size = m->size();
            cf.rows.resize(cf.size);
            for (int r = 0; r < cf.size; ++r)
                for (int col = 0; col < cf.size; ++col)
                    if (m->m(r, col) != cplx(0)) cf.rows[r].emplace_back((col - r) * cf.stride, m->m(r, col));
            ct.factors.push_back(std::move(cf));
        }
        out.push_back(std::move(ct));
    }
    return out;
}

// Worst-case entries per row; band-limited factors keep this small.
long long row_bound(const std::vector<CompiledTerm>& ct) {
    long long total = 0;
    for (const auto& t : ct) {
        long long p = 1;
        for (const auto& f : t.factors) {
            std::size_t w = 0;
            for (const auto& r : f.rows) w = std::max(w, r.size());
            p *= static_cast<long long>(w);
        }
        total += p;
    }
    return total;
}

struct RowBlock {
    std::vector<long long> counts;
    std::vector<long long> cols;
    std::vector<cplx> vals;
};

void fill_rows(const std::vector<CompiledTerm>& ct, long long begin, long long end, RowBlock& out) {
    std::vector<std::pair<long long, cplx>> buf, cur, next;
    for (long long r = begin; r < end; ++r) {
        buf.clear();
        for (const auto& t : ct) {
            cur.assign(1, {0, t.coeff});
            for (const auto& f : t.factors) {
                int d = static_cast<int>((r / f.stride) % f.size);
                const auto& entries = f.rows[d];
                next.clear();
                for (const auto& [o, v] : cur)
                    for (const auto& [dc, mv] : entries) next.emplace_back(o + dc, v * mv);
                cur.swap(next);
                if (cur.empty()) break;
            }
            for (const auto& [o, v] : cur) buf.emplace_back(r + o, v);
        }
        std::sort(buf.begin(), buf.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        long long count = 0;
        for (std::size_t k = 0; k < buf.size();) {
            long long col = buf[k].first;
            cplx s = 0;
            for (; k < buf.size() && buf[k].first == col; ++k) s += buf[k].second;
            if (s != cplx(0)) {
                out.cols.push_back(col);
                out.vals.push_back(s);
                ++count;
            }
        }
        out.counts.push_back(count);
    }
}

SparseH build_rows(const std::vector<CompiledTerm>& ct, long long dim, int threads) {
    if (threads <= 0) threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    threads = static_cast<int>(std::min<long long>(threads, std::max<long long>(1, dim / 256)));
    std::vector<RowBlock> blocks(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
        long long b = dim * t / threads, e = dim * (t + 1) / threads;
        if (threads == 1)
            fill_rows(ct, b, e, blocks[t]);
        else
            pool.emplace_back(fill_rows, std::cref(ct), b, e, std::ref(blocks[t]));
    }
    for (auto& th : pool) th.join();

    long long nnz = 0;
    for (const auto& b : blocks) nnz += static_cast<long long>(b.vals.size());
    if (nnz > dim * row_bound(ct)) throw std::logic_error("assembled matrix exceeds the band-limited nonzero bound");
    SparseH H(dim, dim);
    H.reserve(nnz);
    long long row = 0;
    for (const auto& b : blocks) {
        std::size_t k = 0;
        for (long long cnt : b.counts) {
            H.startVec(row);
            for (long long e = 0; e < cnt; ++e, ++k) H.insertBack(row, b.cols[k]) = b.vals[k];
            ++row;
        }
    }
    H.finalize();
    return H;
}

}  // namespace

AssembledHamiltonian assemble(const std::vector<HamiltonianTerm>& terms, const BasisSpec& basis, OperatorCache& cache,
                              long long cap, int threads) {
    AssembledHamiltonian out;
    out.basis = basis;
    out.dim = basis.dimension();
    if (out.dim > cap)
        throw std::length_error("Hilbert space dimension " + std::to_string(out.dim) + " exceeds cap " +
                                std::to_string(cap));
    auto ct = compile(terms, basis, cache);
    SparseH H = build_rows(ct, out.dim, threads);
    SparseH Ht = H.adjoint();
    out.H = 0.5 * (H + Ht);
    out.H.makeCompressed();
    return out;
}

SparseH term_matrix(const HamiltonianTerm& t, const BasisSpec& basis, OperatorCache& cache) {
    auto ct = compile({t}, basis, cache);
    return build_rows(ct, basis.dimension(), 1);
}

cplx expectation(const HamiltonianTerm& op, const Eigen::VectorXcd& state, const BasisSpec& basis,
                 OperatorCache& cache) {
    if (state.size() != basis.dimension()) throw std::invalid_argument("state dimension does not match basis");
    SparseH m = term_matrix(op, basis, cache);
    Eigen::VectorXcd y = m * state;
    return state.dot(y);
}

cplx expectation(int mode, const OpDesc& op, const Eigen::VectorXcd& state, const BasisSpec& basis,
                 OperatorCache& cache) {
    HamiltonianTerm t;
    t.coeff = 1.0;
    t.factors = {{mode, op}};
    return expectation(t, state, basis, cache);
}

nlohmann::json terms_to_json(const std::vector<HamiltonianTerm>& terms, const BasisSpec& basis) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : terms) {
        nlohmann::json f = nlohmann::json::array();
        for (const auto& fac : t.factors)
            f.push_back({{"mode", basis.modes[fac.mode].name}, {"op", to_string(fac.op.type)}, {"param", fac.op.param}});
        arr.push_back({{"coeff", {t.coeff.real(), t.coeff.imag()}}, {"origin", t.origin}, {"factors", f}});
    }
    return arr;
}

}  // namespace qcirc
