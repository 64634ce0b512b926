#include "qcirc/model.hpp"

#include <stdexcept>

namespace qcirc {

CircuitModel build_model(const Circuit& c, const ModelOptions& opt) {
    auto diags = validate_circuit(c);
    if (!diags.empty()) {
        std::string msg = "invalid circuit:";
        for (const auto& d : diags) msg += "\n  " + format_diagnostic(d);
        throw std::invalid_argument(msg);
    }
    CircuitModel m;
    m.circuit = c;
    m.forest = build_spanning_forest(c, opt.forest);
    m.branches = branch_matrix(c, m.forest);
    m.nodes = build_node_matrices(c, m.branches);
    m.transform = build_mode_transform(c, m.nodes, m.forest, opt.transform ? &*opt.transform : nullptr);
    m.junctions = junction_phase_decomposition(c, m.transform, m.forest, &m.gauge);
    m.basis = make_basis(m.transform, opt.truncation, opt.default_nu, opt.default_q);
    m.terms = build_terms(c, m.transform, m.junctions, m.basis);
    return m;
}

}  // namespace qcirc
