#pragma once

#include "qcirc/modes.hpp"
#include "qcirc/operators.hpp"

#include <Eigen/Sparse>
#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace qcirc {

struct JunctionDecomposition {
    std::string branch;
    double ej = 0.0;                          // GHz
    std::vector<std::pair<int, double>> a;    // oscillator mode -> coefficient
    std::vector<std::pair<int, int>> n;       // Josephson mode -> integer
    double dphi = 0.0;                        // rad, wrapped to (-pi, pi]
};

// Returns the decompositions and, via gauge, the constant Josephson-coordinate shift
// that removes offsets from tree junctions (a diagonal phase in the charge basis).
std::vector<JunctionDecomposition> junction_phase_decomposition(const Circuit& c, const ModeTransform& mt,
                                                                const SpanningForest& f,
                                                                Eigen::VectorXd* gauge = nullptr);

struct ModeBasis {
    std::string name;
    ModeKind kind = ModeKind::oscillator;
    int trunc = 1;    // nu_max for oscillators, q_max otherwise
    double z = 0.0;   // oscillators only
    int size() const { return kind == ModeKind::oscillator ? trunc + 1 : 2 * trunc + 1; }
};

struct BasisSpec {
    std::vector<ModeBasis> modes;
    long long dimension() const;
    std::vector<long long> strides() const;  // mode 0 is the most significant index
};

// trunc: mode name -> truncation. Missing modes take the defaults.
BasisSpec make_basis(const ModeTransform& mt, const std::map<std::string, int>& trunc, int default_nu = 8,
                     int default_q = 8);

enum class OpType { flux, charge, flux_sq, charge_sq, displacement, shift };

const char* to_string(OpType t);
OpType op_type_from_string(const std::string& s);

// param: displacement amplitude, charge offset (periodic modes), or shift count.
struct OpDesc {
    OpType type = OpType::charge;
    double param = 0.0;
    bool operator==(const OpDesc&) const = default;
};

struct Factor {
    int mode = 0;
    OpDesc op;
    bool operator==(const Factor&) const = default;
};

struct HamiltonianTerm {
    cplx coeff;                    // GHz
    std::vector<Factor> factors;   // sorted by mode, one per mode
    std::string origin;            // element or matrix entry this came from
};

std::shared_ptr<const OperatorMatrix> factor_matrix(OperatorCache& cache, const ModeBasis& mb, const OpDesc& op);

HamiltonianTerm adjoint(const HamiltonianTerm& t);

std::vector<HamiltonianTerm> build_terms(const Circuit& c, const ModeTransform& mt,
                                         const std::vector<JunctionDecomposition>& jd, const BasisSpec& basis);

using SparseH = Eigen::SparseMatrix<cplx, Eigen::RowMajor, long long>;

struct AssembledHamiltonian {
    SparseH H;
    long long dim = 0;
    BasisSpec basis;
};

inline constexpr long long default_dimension_cap = 1LL << 26;

AssembledHamiltonian assemble(const std::vector<HamiltonianTerm>& terms, const BasisSpec& basis, OperatorCache& cache,
                              long long cap = default_dimension_cap, int threads = 0);

// Sparse matrix of one term, coefficient included.
SparseH term_matrix(const HamiltonianTerm& t, const BasisSpec& basis, OperatorCache& cache);

cplx expectation(const HamiltonianTerm& op, const Eigen::VectorXcd& state, const BasisSpec& basis,
                 OperatorCache& cache);
cplx expectation(int mode, const OpDesc& op, const Eigen::VectorXcd& state, const BasisSpec& basis,
                 OperatorCache& cache);

nlohmann::json terms_to_json(const std::vector<HamiltonianTerm>& terms, const BasisSpec& basis);

}  // namespace qcirc
