#pragma once

#include "qcirc/hamiltonian.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace qcirc {

// Everything compiled from one circuit at one bias point.
struct CircuitModel {
    Circuit circuit;
    SpanningForest forest;
    BranchMatrix branches;
    NodeMatrices nodes;
    ModeTransform transform;
    std::vector<JunctionDecomposition> junctions;
    Eigen::VectorXd gauge;
    BasisSpec basis;
    std::vector<HamiltonianTerm> terms;
};

struct ModelOptions {
    ForestOptions forest;
    std::optional<UserTransform> transform;
    std::map<std::string, int> truncation;
    int default_nu = 8;
    int default_q = 8;
};

CircuitModel build_model(const Circuit& c, const ModelOptions& opt = {});

}  // namespace qcirc
