#pragma once

#include "qcirc/hamiltonian.hpp"

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace qcirc {

struct SolverOptions {
    double tol = 1e-10;          // residual relative to the Gershgorin norm bound
    unsigned seed = 20240917u;
    int dense_limit = 512;
    int max_matvec = 200000;
    int krylov_dim = 0;          // 0: automatic
    bool verify = true;          // extra deflated pass to catch missed degenerate copies
};

struct Spectrum {
    Eigen::VectorXd values;    // ascending, GHz
    Eigen::MatrixXcd vectors;  // columns
    Eigen::VectorXd residuals; // ||Hv - lambda v||
    double norm = 0.0;         // bound on ||H|| used by the residual contract
    int iterations = 0;        // matrix-vector products
    std::string method;
    bool converged = true;
};

using LinearOperator = std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>;

struct GershgorinBounds {
    double lower = 0.0, upper = 0.0;
    double norm() const { return std::max(std::abs(lower), std::abs(upper)); }
};

GershgorinBounds gershgorin(const SparseH& H);
GershgorinBounds gershgorin(const Eigen::MatrixXcd& H);

Spectrum eigensolve_lowest(const SparseH& H, int k, const SolverOptions& opt = {});
Spectrum eigensolve_lowest(const Eigen::MatrixXcd& H, int k, const SolverOptions& opt = {});
Spectrum eigensolve_lowest(const LinearOperator& op, long long dim, GershgorinBounds bounds, int k,
                           const SolverOptions& opt = {});

// Groups eigenvalues closer than tol into blocks of index ranges [first, last).
std::vector<std::pair<int, int>> degenerate_blocks(const Eigen::VectorXd& values, double tol);

struct ConvergeResult {
    BasisSpec basis;
    Spectrum spectrum;
    bool converged = false;
    int steps = 0;
    std::vector<double> ground_energies;  // along the schedule
    bool variational = true;              // ground energy nonincreasing along the schedule
};

// One schedule step: oscillators nu <- ceil(3 nu / 2), periodic q <- q + 2.
BasisSpec grow_basis(const BasisSpec& b);

ConvergeResult converge_truncation(const std::function<Spectrum(const BasisSpec&)>& build, const BasisSpec& start,
                                   const std::vector<std::pair<int, int>>& targets, double tol_ghz,
                                   int max_steps = 6);

}  // namespace qcirc
