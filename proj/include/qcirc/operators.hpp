#pragma once

#include <Eigen/Dense>

#include <complex>
#include <memory>
#include <string>

namespace qcirc {

using cplx = std::complex<double>;

// Units: oscillator and Josephson flux in Phi0, charge in 2e.
// Oscillator z is the phase-fluctuation parameter, 2 pi Phi / Phi0 = sqrt(z) (a + a^+).
enum class OscOp { flux, charge, flux_sq, charge_sq, displacement };

// Charge basis ordered q_m, q_m - 1, ..., -q_m.
// raise adds one Cooper pair (super-diagonal), lower removes one (sub-diagonal).
// e^{i 2 pi Phi / Phi0} equals raise up to the truncation edge.
enum class PeriodicOp { charge, charge_sq, flux, raise, lower };

struct OperatorMatrix {
    Eigen::MatrixXcd m;
    bool hermitian = false;

    static OperatorMatrix make(Eigen::MatrixXcd mat);
    int size() const { return static_cast<int>(m.rows()); }
};

// param: displacement amplitude a for OscOp::displacement.
OperatorMatrix oscillator_operator(OscOp kind, int nu_max, double z, double param = 0.0);

// param: charge offset (2e) for charge and charge_sq.
OperatorMatrix periodic_mode_operator(PeriodicOp kind, int q_max, double param = 0.0);

// <q|Phi_k>, rows q = q_m..-q_m, columns k = -q_m..q_m.
Eigen::MatrixXcd flux_basis_states(int q_max);

// Snaps a to the nearest quarter when within 1e-12.
double quantize_amplitude(double a);

// Shared, thread-safe cache keyed by (kind, size, z, param).
class OperatorCache {
public:
    OperatorCache();
    ~OperatorCache();
    std::shared_ptr<const OperatorMatrix> oscillator(OscOp kind, int nu_max, double z, double param = 0.0);
    std::shared_ptr<const OperatorMatrix> periodic(PeriodicOp kind, int q_max, double param = 0.0);
    std::size_t size() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace qcirc
