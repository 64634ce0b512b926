#include "qcirc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace qcirc {

GershgorinBounds gershgorin(const SparseH& H) {
    GershgorinBounds g{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (long long r = 0; r < H.outerSize(); ++r) {
        double diag = 0.0, radius = 0.0;
        for (SparseH::InnerIterator it(H, r); it; ++it) {
            if (it.col() == r)
                diag = it.value().real();
            else
                radius += std::abs(it.value());
        }
        g.lower = std::min(g.lower, diag - radius);
        g.upper = std::max(g.upper, diag + radius);
    }
    if (H.outerSize() == 0) g = {0.0, 0.0};
    return g;
}

GershgorinBounds gershgorin(const Eigen::MatrixXcd& H) {
    GershgorinBounds g{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (Eigen::Index r = 0; r < H.rows(); ++r) {
        double radius = H.row(r).cwiseAbs().sum() - std::abs(H(r, r));
        g.lower = std::min(g.lower, H(r, r).real() - radius);
        g.upper = std::max(g.upper, H(r, r).real() + radius);
    }
    if (H.rows() == 0) g = {0.0, 0.0};
    return g;
}

std::vector<std::pair<int, int>> degenerate_blocks(const Eigen::VectorXd& values, double tol) {
    std::vector<std::pair<int, int>> out;
    const int n = static_cast<int>(values.size());
    for (int i = 0; i < n;) {
        int j = i + 1;
        while (j < n && values(j) - values(j - 1) <= tol) ++j;
        out.emplace_back(i, j);
        i = j;
    }
    return out;
}

namespace {

struct Run {
    Eigen::VectorXd theta;
    Eigen::MatrixXcd X;
    int matvecs = 0;
    bool ok = false;
};

Eigen::VectorXcd random_vector(long long n, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXcd v(n);
    for (long long i = 0; i < n; ++i) {
        double re = g(rng);
        double im = g(rng);
        v(i) = cplx(re, im);
    }
    return v;
}

void project_out(Eigen::VectorXcd& w, const Eigen::MatrixXcd& Y) {
    if (Y.cols() == 0) return;
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= Y * (Y.adjoint() * w);
}

// Thick-restart Lanczos on A = H - shift with explicit projected matrix,
// restricted to the orthogonal complement of the locked columns Y.
Run thick_restart(const LinearOperator& op, long long n, double shift, double norm, int k, const Eigen::MatrixXcd& Y,
                  const SolverOptions& opt, std::mt19937_64& rng, int budget) {
    Run run;
    const long long avail = n - Y.cols();
    int m = opt.krylov_dim > 0 ? opt.krylov_dim : std::max(2 * k + 20, 48);
    m = static_cast<int>(std::min<long long>(m, avail));
    if (m <= k && m < avail) m = k + 1;
    if (k > avail) throw std::invalid_argument("requested more eigenpairs than the space holds");

    Eigen::MatrixXcd V(n, m);
    Eigen::MatrixXcd T = Eigen::MatrixXcd::Zero(m, m);
    Eigen::VectorXcd w(n), f(n);
    double fb = 0.0;

    auto fresh = [&](int cols) {
        for (int attempt = 0; attempt < 5; ++attempt) {
            Eigen::VectorXcd v = random_vector(n, rng);
            project_out(v, Y);
            if (cols > 0)
                for (int pass = 0; pass < 2; ++pass) v.noalias() -= V.leftCols(cols) * (V.leftCols(cols).adjoint() * v);
            double nv = v.norm();
            if (nv > 1e-8) return Eigen::VectorXcd(v / nv);
        }
        throw std::runtime_error("could not extend Krylov basis");
    };

    V.col(0) = fresh(0);
    int p = 0;
    while (true) {
        for (int j = p; j < m; ++j) {
            op(V.col(j), w);
            w.noalias() -= shift * V.col(j);
            ++run.matvecs;
            project_out(w, Y);
            Eigen::VectorXcd h = V.leftCols(j + 1).adjoint() * w;
            w.noalias() -= V.leftCols(j + 1) * h;
            Eigen::VectorXcd h2 = V.leftCols(j + 1).adjoint() * w;
            w.noalias() -= V.leftCols(j + 1) * h2;
            h += h2;
            for (int i = 0; i <= j; ++i) {
                T(i, j) = h(i);
                T(j, i) = std::conj(h(i));
            }
            T(j, j) = T(j, j).real();
            double beta = w.norm();
            if (j + 1 < m) {
                if (beta <= 1e-13 * std::max(norm, 1e-300)) {
                    V.col(j + 1) = fresh(j + 1);
                } else {
                    V.col(j + 1) = w / beta;
                }
            } else {
                f = w;
                fb = beta;
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(T);
        const auto& theta = es.eigenvalues();
        const auto& S = es.eigenvectors();
        bool all = true;
        for (int i = 0; i < k && all; ++i)
            if (fb * std::abs(S(m - 1, i)) > opt.tol * norm) all = false;
        if (all || m == avail || run.matvecs >= budget) {
            run.theta = theta.head(k);
            run.X = V * S.leftCols(k);
            run.ok = all || m == avail;
            return run;
        }
        p = std::min(k + (m - k) / 2, m - 1);
        Eigen::MatrixXcd keep = V * S.leftCols(p);
        V.leftCols(p) = keep;
        T.setZero();
        for (int i = 0; i < p; ++i) T(i, i) = theta(i);
        if (fb <= 1e-13 * std::max(norm, 1e-300))
            V.col(p) = fresh(p);
        else
            V.col(p) = f / fb;
    }
}

// Rayleigh-Ritz on span(X); returns ascending values and orthonormal vectors.
void rayleigh_ritz(const LinearOperator& op, double shift, Eigen::MatrixXcd& X, Eigen::VectorXd& theta, int keep) {
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(X);
    Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(X.rows(), X.cols());
    Eigen::MatrixXcd AQ(X.rows(), X.cols());
    Eigen::VectorXcd y(X.rows());
    for (Eigen::Index c = 0; c < Q.cols(); ++c) {
        op(Q.col(c), y);
        AQ.col(c) = y - shift * Q.col(c);
    }
    Eigen::MatrixXcd P = Q.adjoint() * AQ;
    P = 0.5 * (P + P.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(P);
    X = Q * es.eigenvectors().leftCols(keep);
    theta = es.eigenvalues().head(keep);
}

}  // namespace

Spectrum eigensolve_lowest(const Eigen::MatrixXcd& H, int k, const SolverOptions& opt) {
    const long long n = H.rows();
    if (H.cols() != n) throw std::invalid_argument("matrix must be square");
    if (k < 1 || k > n) throw std::invalid_argument("eigenpair count out of range");
    Eigen::MatrixXcd Hs = 0.5 * (H + H.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(Hs);
    Spectrum s;
    s.method = "dense";
    s.norm = gershgorin(Hs).norm();
    s.values = es.eigenvalues().head(k);
    s.vectors = es.eigenvectors().leftCols(k);
    s.residuals.resize(k);
    for (int i = 0; i < k; ++i) s.residuals(i) = (H * s.vectors.col(i) - s.values(i) * s.vectors.col(i)).norm();
    (void)opt;
    return s;
}

Spectrum eigensolve_lowest(const LinearOperator& op, long long dim, GershgorinBounds bounds, int k,
                           const SolverOptions& opt) {
    if (k < 1 || k > dim) throw std::invalid_argument("eigenpair count out of range");
    if (dim <= opt.dense_limit) {
        Eigen::MatrixXcd D(dim, dim);
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(dim), y(dim);
        for (long long c = 0; c < dim; ++c) {
            e(c) = 1.0;
            op(e, y);
            D.col(c) = y;
            e(c) = 0.0;
        }
        return eigensolve_lowest(D, k, opt);
    }
    if (k >= dim) throw std::invalid_argument("iterative solver needs k < dimension");

    std::mt19937_64 rng(opt.seed);
    const double shift = bounds.lower;
    const double norm = std::max(bounds.norm(), 1e-300);
    Spectrum s;
    s.method = "lanczos";
    s.norm = norm;

    Run main = thick_restart(op, dim, shift, norm, k, Eigen::MatrixXcd(dim, 0), opt, rng, opt.max_matvec);
    s.iterations = main.matvecs;
    bool ok = main.ok;
    Eigen::MatrixXcd X = main.X;
    Eigen::VectorXd theta = main.theta;

    if (opt.verify && ok) {
        for (int round = 0; round < k && dim - X.cols() > 1; ++round) {
            int budget = std::max(opt.max_matvec - s.iterations, 0);
            if (budget == 0) {
                ok = false;
                break;
            }
            Run extra = thick_restart(op, dim, shift, norm, 1, X, opt, rng, budget);
            s.iterations += extra.matvecs;
            if (!(extra.theta(0) < theta(k - 1) - 1e-9 * norm)) break;
            Eigen::MatrixXcd Xn(dim, X.cols() + 1);
            Xn << X, extra.X;
            X = Xn;
            rayleigh_ritz(op, shift, X, theta, k);
            s.iterations += k + 1;
            ok = ok && extra.ok;
        }
    }
    rayleigh_ritz(op, shift, X, theta, k);
    s.iterations += k;

    s.values = theta.array() + shift;
    s.vectors = X;
    s.residuals.resize(k);
    Eigen::VectorXcd y(dim);
    for (int i = 0; i < k; ++i) {
        op(s.vectors.col(i), y);
        s.residuals(i) = (y - s.values(i) * s.vectors.col(i)).norm();
    }
    s.iterations += k;
    s.converged = ok && (s.residuals.array() <= 10 * opt.tol * norm).all();
    return s;
}

Spectrum eigensolve_lowest(const SparseH& H, int k, const SolverOptions& opt) {
    if (H.rows() != H.cols()) throw std::invalid_argument("matrix must be square");
    if (H.rows() <= opt.dense_limit) {
        Spectrum s = eigensolve_lowest(Eigen::MatrixXcd(H), k, opt);
        return s;
    }
    LinearOperator op = [&H](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = H * x; };
    return eigensolve_lowest(op, H.rows(), gershgorin(H), k, opt);
}

BasisSpec grow_basis(const BasisSpec& b) {
    BasisSpec g = b;
    for (auto& m : g.modes) {
        if (m.kind == ModeKind::oscillator)
            m.trunc = (3 * m.trunc + 1) / 2;
        else
            m.trunc += 2;
    }
    return g;
}

ConvergeResult converge_truncation(const std::function<Spectrum(const BasisSpec&)>& build, const BasisSpec& start,
                                   const std::vector<std::pair<int, int>>& targets, double tol_ghz, int max_steps) {
    auto splittings = [&](const Spectrum& s) {
        std::vector<double> out;
        for (auto [a, b] : targets) {
            if (std::max(a, b) >= s.values.size()) throw std::invalid_argument("target level beyond computed levels");
            out.push_back(s.values(b) - s.values(a));
        }
        return out;
    };
    ConvergeResult res;
    BasisSpec cur = start;
    Spectrum sc = build(cur);
    res.ground_energies.push_back(sc.values(0));
    for (int step = 0; step < max_steps; ++step) {
        BasisSpec nxt = grow_basis(cur);
        Spectrum sn = build(nxt);
        res.ground_energies.push_back(sn.values(0));
        if (sn.values(0) > sc.values(0) + 1e-9 * std::max(1.0, std::abs(sc.values(0)))) res.variational = false;
        auto a = splittings(sc), b = splittings(sn);
        bool done = true;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (std::abs(a[i] - b[i]) >= tol_ghz) done = false;
        res.steps = step + 1;
        if (done) {
            res.basis = cur;
            res.spectrum = std::move(sc);
            res.converged = true;
            return res;
        }
        cur = std::move(nxt);
        sc = std::move(sn);
    }
    res.basis = cur;
    res.spectrum = std::move(sc);
    res.converged = false;
    return res;
}

}  // namespace qcirc
