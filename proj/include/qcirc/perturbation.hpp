#pragma once

#include "qcirc/operators.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <string>
#include <vector>

namespace qcirc {

// Lowest retain + extra eigenpairs of one subsystem.
struct SubsystemSpectrum {
    std::string label;
    Eigen::VectorXd energies;   // ascending, GHz
    Eigen::MatrixXcd vectors;   // local basis x kept
    int retain = 0;
    int extra = 0;
    long long dimension = 0;
    std::vector<std::string> warnings;
    int kept() const { return retain + extra; }
};

// c * A (x) B with A, B given on the kept levels of subsystems a and b.
struct PairTerm {
    cplx coeff;
    std::string key_a, key_b;
    Eigen::MatrixXcd A, B;
    std::string origin;
};

struct Projection {
    int g_a = 0, e_a = 0, g_b = 0, e_b = 0;
    double E = 0.0;  // GHz, reference energy of the g block
};

// g = retained levels, e = extra levels within energy_ceiling GHz of the ground level (0: no ceiling).
Projection make_projection(const SubsystemSpectrum& a, const SubsystemSpectrum& b, double energy_ceiling = 0.0);

inline constexpr double min_denominator = 1e-6;  // GHz

// sum_e O[g,e] P[e,g'] / (E_eff - E_e) over e in [n_g, n_g + n_e).
Eigen::MatrixXcd polarizability(const SubsystemSpectrum& s, const Eigen::MatrixXcd& O, const Eigen::MatrixXcd& P,
                                int n_g, int n_e, double E_eff);

// Both subsystems virtually excited; g-product basis with a as the most significant index.
Eigen::MatrixXcd dispersion_term(const SubsystemSpectrum& a, const SubsystemSpectrum& b,
                                 const std::vector<PairTerm>& terms, const Projection& proj);

Eigen::MatrixXcd interaction_matrix(const std::vector<PairTerm>& terms, int n_a, int n_b);

struct CorrectionChannel {
    std::string kind;       // "polarizability" or "dispersion"
    std::string subsystem;  // owning subsystem, or "a|b" for dispersion
    std::string name;
    Eigen::MatrixXcd matrix;
    double magnitude = 0.0;  // largest |eigenvalue|
};

struct CorrectionReport {
    std::string a, b;
    Projection proj;
    Eigen::MatrixXcd direct;
    std::vector<CorrectionChannel> channels;

    Eigen::MatrixXcd corrected() const;  // direct + all channels
    int count(const std::string& kind) const;
    nlohmann::json to_json() const;
};

CorrectionReport corrected_interaction(const SubsystemSpectrum& a, const SubsystemSpectrum& b,
                                       const std::vector<PairTerm>& terms, const Projection& proj);

}  // namespace qcirc
