#pragma once

#include "qcirc/netlist.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <vector>

namespace qcirc {

struct Island {
    std::vector<std::string> nodes;  // sorted
    std::string virtual_ground;
};

struct LoopStep {
    std::string branch;
    int sign = +1;  // +1 when traversed from -> to
};

struct ClosureLoop {
    std::string branch;
    // Tree path from the closure branch's to-node back to its from-node.
    std::vector<LoopStep> path;
    int fluxoid = 0;
};

struct SpanningForest {
    std::vector<std::string> tree_branches;  // in discovery order
    std::vector<Island> islands;
    std::vector<ClosureLoop> closures;

    bool in_tree(const std::string& id) const;
    const ClosureLoop* closure(const std::string& id) const;
};

struct ForestOptions {
    bool prefer_inductors = true;
    bool ascending_ids = true;
    // island (identified by any member node) -> chosen virtual ground
    std::map<std::string, std::string> virtual_ground;
    std::map<std::string, int> fluxoids;  // closure branch id -> m
};

std::vector<Island> find_islands(const Circuit& c);

SpanningForest build_spanning_forest(const Circuit& c, const ForestOptions& opt = {});

struct BranchMatrix {
    std::vector<std::string> branch_ids;  // inductive/junction branches, declaration order
    Eigen::MatrixXi R;                    // rows x nodes
};

BranchMatrix branch_matrix(const Circuit& c, const SpanningForest& f);

}  // namespace qcirc
