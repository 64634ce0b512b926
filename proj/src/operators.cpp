#include "qcirc/operators.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <stdexcept>
#include <tuple>

namespace qcirc {

namespace {
constexpr double pi = std::numbers::pi;

// Generalized Laguerre L_n^{(k)}(x) by upward recurrence.
double laguerre(int n, int k, double x) {
    if (n == 0) return 1.0;
    double lm1 = 1.0, l = 1.0 + k - x;
    for (int j = 1; j < n; ++j) {
        double next = ((2.0 * j + 1.0 + k - x) * l - (j + k) * lm1) / (j + 1.0);
        lm1 = l;
        l = next;
    }
    return l;
}
}  // namespace

OperatorMatrix OperatorMatrix::make(Eigen::MatrixXcd mat) {
    OperatorMatrix op;
    op.m = std::move(mat);
    double scale = op.m.cwiseAbs().maxCoeff();
    op.hermitian = (op.m - op.m.adjoint()).cwiseAbs().maxCoeff() <= 1e-14 * std::max(scale, 1.0);
    return op;
}

double quantize_amplitude(double a) {
    double q = std::round(a * 4.0) / 4.0;
    return std::abs(a - q) < 1e-12 ? q : a;
}

OperatorMatrix oscillator_operator(OscOp kind, int nu_max, double z, double param) {
    if (nu_max < 1) throw std::invalid_argument("oscillator truncation must be >= 1");
    if (!(z > 0)) throw std::invalid_argument("oscillator impedance parameter must be positive");
    const int n = nu_max + 1;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    const double sz = std::sqrt(z);
    switch (kind) {
        case OscOp::flux:
            for (int k = 1; k < n; ++k) m(k - 1, k) = m(k, k - 1) = sz / (2 * pi) * std::sqrt(double(k));
            break;
        case OscOp::charge:
            for (int k = 1; k < n; ++k) {
                double s = std::sqrt(double(k)) / (2 * sz);
                m(k - 1, k) = cplx(0, -s);
                m(k, k - 1) = cplx(0, s);
            }
            break;
        case OscOp::flux_sq:
        case OscOp::charge_sq: {
            double scale = kind == OscOp::flux_sq ? z / (4 * pi * pi) : 1.0 / (4 * z);
            double sign = kind == OscOp::flux_sq ? 1.0 : -1.0;
            for (int k = 0; k < n; ++k) {
                m(k, k) = scale * (2.0 * k + 1.0);
                if (k + 2 < n) m(k, k + 2) = m(k + 2, k) = sign * scale * std::sqrt((k + 1.0) * (k + 2.0));
            }
            break;
        }
        case OscOp::displacement: {
            const double a = param;
            if (a == 0.0) return OperatorMatrix::make(Eigen::MatrixXcd::Identity(n, n));
            const double x = a * a * z;
            const double la = std::log(std::abs(a) * sz);
            const cplx unit(0, a > 0 ? 1.0 : -1.0);
            const cplx phases[4] = {1.0, unit, unit * unit, unit * unit * unit};
            for (int r = 0; r < n; ++r)
                for (int c = 0; c <= r; ++c) {
                    int d = r - c;
                    double mag = std::exp(-0.5 * x + d * la + 0.5 * (std::lgamma(c + 1.0) - std::lgamma(r + 1.0)));
                    cplx v = phases[d % 4] * (mag * laguerre(c, d, x));
                    m(r, c) = v;
                    m(c, r) = v;
                }
            break;
        }
    }
    return OperatorMatrix::make(std::move(m));
}

Eigen::MatrixXcd flux_basis_states(int q_max) {
    const int n = 2 * q_max + 1;
    Eigen::MatrixXcd s(n, n);
    for (int i = 0; i < n; ++i) {
        int q = q_max - i;
        for (int j = 0; j < n; ++j) {
            int k = j - q_max;
            // Sign chosen so that [Phi, Q] -> +i/(2 pi) as in the oscillator sector.
            double ph = -2.0 * pi * double(k) * double(q) / n;
            s(i, j) = std::polar(1.0 / std::sqrt(double(n)), ph);
        }
    }
    return s;
}

OperatorMatrix periodic_mode_operator(PeriodicOp kind, int q_max, double param) {
    if (q_max < 1) throw std::invalid_argument("charge truncation must be >= 1");
    const int n = 2 * q_max + 1;
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
    switch (kind) {
        case PeriodicOp::charge:
            for (int i = 0; i < n; ++i) m(i, i) = double(q_max - i) - param;
            break;
        case PeriodicOp::charge_sq:
            for (int i = 0; i < n; ++i) {
                double d = double(q_max - i) - param;
                m(i, i) = d * d;
            }
            break;
        case PeriodicOp::raise:
            for (int i = 1; i < n; ++i) m(i - 1, i) = 1.0;
            break;
        case PeriodicOp::lower:
            for (int i = 1; i < n; ++i) m(i, i - 1) = 1.0;
            break;
        case PeriodicOp::flux: {
            Eigen::MatrixXcd s = flux_basis_states(q_max);
            Eigen::VectorXcd k(n);
            for (int j = 0; j < n; ++j) k(j) = double(j - q_max) / n;
            m = s * k.asDiagonal() * s.adjoint();
            m = 0.5 * (m + m.adjoint()).eval();
            break;
        }
    }
    return OperatorMatrix::make(std::move(m));
}

struct OperatorCache::Impl {
    using Key = std::tuple<int, int, int, double, double>;
    mutable std::shared_mutex mu;
    std::map<Key, std::shared_ptr<const OperatorMatrix>> store;

    template <class F>
    std::shared_ptr<const OperatorMatrix> get(const Key& key, F&& build) {
        {
            std::shared_lock lock(mu);
            if (auto it = store.find(key); it != store.end()) return it->second;
        }
        auto made = std::make_shared<const OperatorMatrix>(build());
        std::unique_lock lock(mu);
        auto [it, inserted] = store.emplace(key, made);
        return it->second;
    }
};

OperatorCache::OperatorCache() : impl_(std::make_unique<Impl>()) {}
OperatorCache::~OperatorCache() = default;

std::shared_ptr<const OperatorMatrix> OperatorCache::oscillator(OscOp kind, int nu_max, double z, double param) {
    param = quantize_amplitude(param);
    return impl_->get({0, int(kind), nu_max, z, param}, [&] { return oscillator_operator(kind, nu_max, z, param); });
}

std::shared_ptr<const OperatorMatrix> OperatorCache::periodic(PeriodicOp kind, int q_max, double param) {
    return impl_->get({1, int(kind), q_max, 0.0, param}, [&] { return periodic_mode_operator(kind, q_max, param); });
}

std::size_t OperatorCache::size() const {
    std::shared_lock lock(impl_->mu);
    return impl_->store.size();
}

}  // namespace qcirc
