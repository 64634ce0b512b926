#pragma once

#include "qcirc/hierarchy.hpp"

#include "json.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace qcirc {

struct SweepSpec {
    std::string parameter;  // "branch:<id>.flux" or "node:<id>.qoff"
    double start = 0.0, stop = 0.0;
    int steps = 1;          // number of points
    double value(int i) const { return steps == 1 ? start : start + (stop - start) * i / (steps - 1); }
};

struct ObservableSpec {
    OpType op = OpType::flux;
    std::string mode;
    std::string label() const;
};

struct ConvergeSpec {
    double tol_ghz = 1e-3;
    std::vector<std::pair<int, int>> targets{{0, 1}};
    int max_steps = 6;
};

enum class Method { brute, hier, hier_pt };

Method method_from_string(const std::string& s);
const char* to_string(Method m);

struct RunConfig {
    std::string netlist_path;
    Circuit circuit;
    ModelOptions model;
    std::optional<ConvergeSpec> converge;
    std::optional<PartitionNode> partition;
    double energy_ceiling = 0.0;
    bool self_consistent = false;
    std::optional<SweepSpec> sweep;
    int levels = 4;
    std::vector<ObservableSpec> observables;
    bool absolute = false;   // report absolute energies instead of E - E0
    bool lab_frame = false;  // add bias offsets to oscillator expectations
    SolverOptions solver;
    Method method = Method::brute;
    int threads = 0;
    long long dimension_cap = default_dimension_cap;
};

// base_dir resolves a relative netlist path.
RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

// Applies a sweep parameter value to a copy of the circuit.
Circuit apply_parameter(const Circuit& c, const std::string& parameter, double value);

struct PointResult {
    int index = 0;
    double parameter = 0.0;
    Eigen::VectorXd energies;                 // GHz
    std::vector<std::vector<double>> observables;  // [observable][level]
    long long dimension = 0;
    int iterations = 0;
    bool converged = true;
    std::string error;
    std::vector<CorrectionReport> reports;
    std::vector<std::string> warnings;
};

struct SweepResult {
    std::vector<PointResult> points;
    BasisSpec basis;  // basis actually used
    bool ok() const;
};

PointResult run_point(const RunConfig& cfg, const Circuit& c, const BasisSpec* basis, OperatorCache& cache,
                      int inner_threads = 1);

SweepResult run_sweep(const RunConfig& cfg);

void write_csv(std::ostream& os, const RunConfig& cfg, const SweepResult& r);
void write_json_lines(std::ostream& os, const RunConfig& cfg, const SweepResult& r);

nlohmann::json topology_json(const CircuitModel& m);

}  // namespace qcirc
