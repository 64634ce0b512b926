#pragma once

#include "qcirc/netlist.hpp"
#include "qcirc/topology.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

namespace qcirc {

struct NodeMatrices {
    Eigen::MatrixXd C_n;      // fF
    Eigen::MatrixXd R_ind;    // inductor rows of the branch matrix
    Eigen::MatrixXd L_full;   // pH, inductor branches only
    Eigen::MatrixXd L_n_inv;  // 1/pH
    std::vector<std::string> inductor_ids;
    std::vector<std::string> regularized_nodes;
};

inline constexpr double regularizing_capacitance = 1e-6;  // fF

NodeMatrices build_node_matrices(const Circuit& c, const BranchMatrix& bm);

enum class ModeKind { oscillator, island, josephson };

const char* to_string(ModeKind k);
ModeKind mode_kind_from_string(const std::string& s);

// Flux rows of a hand-chosen transform, keyed by node id.
struct UserTransform {
    struct Row {
        std::string name;
        ModeKind kind = ModeKind::oscillator;
        std::vector<std::pair<std::string, double>> coeffs;
    };
    std::vector<Row> rows;
};

// Parses "1/2", "-3/4", "0.25".
double parse_rational(const std::string& s);

struct ModeTransform {
    Eigen::MatrixXd R;     // Phi = R Phi_n
    Eigen::MatrixXd Rinv;  // columns: node pattern of each mode; Q = Rinv^T Q_n
    std::vector<ModeKind> kinds;
    std::vector<std::string> names;
    int n_osc = 0, n_isl = 0, n_jos = 0;

    Eigen::MatrixXd C_inv;    // 1/fF, all modes
    Eigen::MatrixXd L_inv;    // 1/pH, all modes (zero outside oscillator block)
    Eigen::MatrixXd L_inv_O;  // oscillator block, in oscillator order

    // Per mode; zero for island/Josephson modes.
    Eigen::VectorXd freq;  // GHz, level spacing omega/2pi from diagonal entries
    Eigen::VectorXd Z;     // Ohm
    Eigen::VectorXd z;     // pi Z / R_Q: 2 pi Phi / Phi0 = sqrt(z) (a + a^+)

    Eigen::VectorXd dQ;    // 2e, all modes
    Eigen::VectorXd dPhi;  // Phi0, nonzero only on oscillators

    std::vector<std::string> warnings;

    std::size_t size() const { return kinds.size(); }
    std::vector<int> indices(ModeKind k) const;
    int find(const std::string& name) const;  // -1 if absent
};

ModeTransform build_mode_transform(const Circuit& c, const NodeMatrices& nm, const SpanningForest& f,
                                   const UserTransform* user = nullptr);

struct BiasOffsets {
    Eigen::VectorXd dQ;
    Eigen::VectorXd dPhi;
};

BiasOffsets bias_offsets(const Circuit& c, const NodeMatrices& nm, const SpanningForest& f, const ModeTransform& mt);

}  // namespace qcirc
