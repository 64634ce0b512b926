#pragma once

#include "qcirc/model.hpp"
#include "qcirc/pipeline.hpp"
#include "qcirc/solver.hpp"

#include <string>

#ifndef QCIRC_SOURCE_DIR
#define QCIRC_SOURCE_DIR "."
#endif

namespace qtest {

inline std::string source_path(const std::string& rel) { return std::string(QCIRC_SOURCE_DIR) + "/" + rel; }

inline qcirc::CircuitModel model_of(const std::string& text, qcirc::ModelOptions opt = {}) {
    return qcirc::build_model(qcirc::parse_netlist(text), opt);
}

// Lowest k eigenvalues by brute-force assembly.
inline qcirc::Spectrum brute(const qcirc::CircuitModel& m, int k, const qcirc::SolverOptions& so = {}) {
    qcirc::OperatorCache cache;
    auto H = qcirc::assemble(m.terms, m.basis, cache);
    return qcirc::eigensolve_lowest(H.H, k, so);
}

inline Eigen::VectorXd brute_values(const std::string& text, int k, qcirc::ModelOptions opt = {}) {
    return brute(model_of(text, opt), k).values;
}

inline qcirc::RunConfig jpsq_config() { return qcirc::load_config(source_path("circuits/jpsq.json")); }

}  // namespace qtest
