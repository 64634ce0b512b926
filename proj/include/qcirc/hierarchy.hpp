#pragma once

#include "qcirc/model.hpp"
#include "qcirc/perturbation.hpp"
#include "qcirc/solver.hpp"

#include "json.hpp"

#include <memory>
#include <string>
#include <vector>

namespace qcirc {

struct PartitionNode {
    std::string label;
    std::vector<std::string> modes;       // leaves only
    std::vector<PartitionNode> children;  // internal nodes only
    int retain = 0;                       // N_m
    int extra = 0;                        // N_e, leaves only
    double window_ghz = 0.0;              // > 0: retain every level within this window instead
    bool leaf() const { return children.empty(); }
};

PartitionNode partition_from_json(const nlohmann::json& j);
nlohmann::json partition_to_json(const PartitionNode& p);

// Checks that every mode is assigned exactly once; returns leaves in depth-first order.
std::vector<const PartitionNode*> check_partition(const PartitionNode& root, const ModeTransform& mt);

// Greedy two-way min-cut on the normalized coupling graph. Advisory only.
PartitionNode suggest_partition(const ModeTransform& mt, const std::vector<JunctionDecomposition>& jd);

struct CrossCoupling {
    char kind = 'Q';  // 'Q' charge (C_inv), 'F' flux (L_inv)
    int i = 0, j = 0;  // global mode indices, i in group gi, j in group gj
    int gi = 0, gj = 0;
    double value = 0.0;
};

struct SplitMatrices {
    std::vector<std::vector<int>> groups;
    std::vector<Eigen::MatrixXd> C_blocks, L_blocks;
    std::vector<CrossCoupling> cross;  // every nonzero entry, no cut
    Eigen::MatrixXd merge_C(const ModeTransform& mt) const;  // reassembles blocks and cross terms
    Eigen::MatrixXd merge_L(const ModeTransform& mt) const;
};

SplitMatrices split_matrices(const ModeTransform& mt, const std::vector<std::vector<int>>& groups);

// Lowest retain + extra eigenpairs of a sparse subsystem Hamiltonian.
SubsystemSpectrum diagonalize_subsystem(const SparseH& H, int retain, int extra, const SolverOptions& opt = {},
                                        double window_ghz = 0.0, const std::string& label = {});

// sum_c E^c (on its factor) + sum_t c_t (x)_c ops_t[c] over the g-levels given in dims.
struct ProductTerm {
    cplx coeff;
    std::vector<const Eigen::MatrixXcd*> ops;  // nullptr = identity
};
Eigen::MatrixXcd assemble_effective(const std::vector<Eigen::VectorXd>& energies, const std::vector<int>& dims,
                                    const std::vector<ProductTerm>& terms);

struct HierarchyOptions {
    SolverOptions solver;
    int levels = 4;                // eigenpairs of the top level
    bool corrections = false;
    double energy_ceiling = 0.0;   // GHz; 0 keeps all extra levels
    bool self_consistent = false;
    int threads = 0;
};

struct HierarchyResult {
    Spectrum spectrum;                        // top level, absolute GHz
    std::vector<SubsystemSpectrum> leaves;    // depth-first
    std::vector<long long> node_dimensions;   // product-space dimension per internal node, post-order
    long long effective_dimension = 0;        // top level
    std::vector<CorrectionReport> reports;
    std::vector<std::string> warnings;

    // Expectation of a single-mode operator in top-level state k.
    // Valid while the model, partition and cache passed to iterate_levels are alive.
    std::function<cplx(int mode, const OpDesc& op, int k)> expectation;
};

HierarchyResult iterate_levels(const CircuitModel& model, const PartitionNode& root, const HierarchyOptions& opt,
                               OperatorCache& cache);

}  // namespace qcirc
