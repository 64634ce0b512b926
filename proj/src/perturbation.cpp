#include "qcirc/perturbation.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace qcirc {

namespace {

double checked_inverse(double den, const std::string& who, int level) {
    if (std::abs(den) < min_denominator) {
        std::ostringstream os;
        os << "resonant energy denominator " << den << " GHz at level " << level << " of " << who
           << "; second-order correction is invalid here";
        throw std::runtime_error(os.str());
    }
    return 1.0 / den;
}

int extra_within(const SubsystemSpectrum& s, double ceiling) {
    int n = s.extra;
    if (ceiling > 0)
        while (n > 0 && s.energies(s.retain + n - 1) - s.energies(0) > ceiling) --n;
    return n;
}

double magnitude(const Eigen::MatrixXcd& m) {
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXcd hermitian_part(const Eigen::MatrixXcd& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace

Projection make_projection(const SubsystemSpectrum& a, const SubsystemSpectrum& b, double energy_ceiling) {
    Projection p;
    p.g_a = a.retain;
    p.g_b = b.retain;
    p.e_a = extra_within(a, energy_ceiling);
    p.e_b = extra_within(b, energy_ceiling);
    p.E = a.energies(0) + b.energies(0);
    return p;
}

Eigen::MatrixXcd polarizability(const SubsystemSpectrum& s, const Eigen::MatrixXcd& O, const Eigen::MatrixXcd& P,
                                int n_g, int n_e, double E_eff) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(n_g, n_g);
    if (n_e == 0) return out;
    Eigen::VectorXd w(n_e);
    for (int e = 0; e < n_e; ++e) w(e) = checked_inverse(E_eff - s.energies(n_g + e), s.label, n_g + e);
    out.noalias() = O.block(0, n_g, n_g, n_e) * w.asDiagonal() * P.block(n_g, 0, n_e, n_g);
    return out;
}

Eigen::MatrixXcd interaction_matrix(const std::vector<PairTerm>& terms, int n_a, int n_b) {
    Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(n_a * n_b, n_a * n_b);
    for (const auto& t : terms)
        V += t.coeff * Eigen::kroneckerProduct(t.A.topLeftCorner(n_a, n_a), t.B.topLeftCorner(n_b, n_b)).eval();
    return V;
}

namespace {

Eigen::MatrixXd dispersion_weights(const SubsystemSpectrum& a, const SubsystemSpectrum& b, const Projection& proj) {
    Eigen::MatrixXd w(proj.e_a, proj.e_b);
    for (int e = 0; e < proj.e_a; ++e)
        for (int f = 0; f < proj.e_b; ++f)
            w(e, f) = checked_inverse(proj.E - a.energies(proj.g_a + e) - b.energies(proj.g_b + f),
                                      a.label + "|" + b.label, proj.g_a + e);
    return w;
}

// Ordered pair (s, t): intermediate state in e_a (x) e_b.
Eigen::MatrixXcd dispersion_pair(const PairTerm& s, const PairTerm& t, const Projection& proj,
                                 const Eigen::MatrixXd& w) {
    const int ga = proj.g_a, gb = proj.g_b, ea = proj.e_a, eb = proj.e_b;
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(ga * gb, ga * gb);
    const cplx c = s.coeff * t.coeff;
    for (int e = 0; e < ea; ++e) {
        Eigen::MatrixXcd left = s.A.block(0, ga + e, ga, 1) * t.A.block(ga + e, 0, 1, ga);
        Eigen::MatrixXcd right =
            s.B.block(0, gb, gb, eb) * w.row(e).transpose().asDiagonal() * t.B.block(gb, 0, eb, gb);
        out += c * Eigen::kroneckerProduct(left, right).eval();
    }
    return out;
}

}  // namespace

Eigen::MatrixXcd dispersion_term(const SubsystemSpectrum& a, const SubsystemSpectrum& b,
                                 const std::vector<PairTerm>& terms, const Projection& proj) {
    Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(proj.g_a * proj.g_b, proj.g_a * proj.g_b);
    if (proj.e_a == 0 || proj.e_b == 0) return out;
    Eigen::MatrixXd w = dispersion_weights(a, b, proj);
    for (const auto& s : terms)
        for (const auto& t : terms) out += dispersion_pair(s, t, proj, w);
    return out;
}

Eigen::MatrixXcd CorrectionReport::corrected() const {
    Eigen::MatrixXcd m = direct;
    for (const auto& ch : channels) m += ch.matrix;
    return m;
}

int CorrectionReport::count(const std::string& kind) const {
    int n = 0;
    for (const auto& ch : channels) n += ch.kind == kind;
    return n;
}

nlohmann::json CorrectionReport::to_json() const {
    nlohmann::json j;
    j["subsystems"] = {a, b};
    j["retained"] = {proj.g_a, proj.g_b};
    j["extra"] = {proj.e_a, proj.e_b};
    j["reference_energy_ghz"] = proj.E;
    j["direct_magnitude_ghz"] = magnitude(hermitian_part(direct));
    nlohmann::json chs = nlohmann::json::array();
    for (const auto& ch : channels)
        chs.push_back({{"kind", ch.kind}, {"subsystem", ch.subsystem}, {"name", ch.name}, {"magnitude_ghz", ch.magnitude}});
    j["channels"] = chs;
    return j;
}

CorrectionReport corrected_interaction(const SubsystemSpectrum& a, const SubsystemSpectrum& b,
                                       const std::vector<PairTerm>& terms, const Projection& proj) {
    const int ga = proj.g_a, gb = proj.g_b;
    CorrectionReport rep;
    rep.a = a.label;
    rep.b = b.label;
    rep.proj = proj;
    rep.direct = interaction_matrix(terms, ga, gb);

    // Channels keyed by owning subsystem and operator; mixed pairs split evenly.
    std::map<std::pair<std::string, std::string>, Eigen::MatrixXcd> pol;
    std::vector<std::pair<std::string, std::string>> pol_order;
    auto pol_add = [&](const std::string& sub, const std::string& key, const Eigen::MatrixXcd& m) {
        auto k = std::make_pair(sub, key);
        auto it = pol.find(k);
        if (it == pol.end()) {
            pol.emplace(k, m);
            pol_order.push_back(k);
        } else {
            it->second += m;
        }
    };

    for (const auto& s : terms)
        for (const auto& t : terms) {
            const cplx c = s.coeff * t.coeff;
            Eigen::MatrixXcd ma = Eigen::MatrixXcd::Zero(ga * gb, ga * gb);
            if (proj.e_a > 0)
                for (int l = 0; l < gb; ++l) {
                    Eigen::MatrixXcd alpha = polarizability(a, s.A, t.A, ga, proj.e_a, proj.E - b.energies(l));
                    Eigen::MatrixXcd outer = s.B.block(0, l, gb, 1) * t.B.block(l, 0, 1, gb);
                    ma += c * Eigen::kroneckerProduct(alpha, outer).eval();
                }
            Eigen::MatrixXcd mb = Eigen::MatrixXcd::Zero(ga * gb, ga * gb);
            if (proj.e_b > 0)
                for (int k = 0; k < ga; ++k) {
                    Eigen::MatrixXcd alpha = polarizability(b, s.B, t.B, gb, proj.e_b, proj.E - a.energies(k));
                    Eigen::MatrixXcd outer = s.A.block(0, k, ga, 1) * t.A.block(k, 0, 1, ga);
                    mb += c * Eigen::kroneckerProduct(outer, alpha).eval();
                }
            if (s.key_a == t.key_a) {
                pol_add(a.label, s.key_a, ma);
            } else {
                pol_add(a.label, s.key_a, 0.5 * ma);
                pol_add(a.label, t.key_a, 0.5 * ma);
            }
            if (s.key_b == t.key_b) {
                pol_add(b.label, s.key_b, mb);
            } else {
                pol_add(b.label, s.key_b, 0.5 * mb);
                pol_add(b.label, t.key_b, 0.5 * mb);
            }
        }
    for (const auto& k : pol_order) {
        CorrectionChannel ch;
        ch.kind = "polarizability";
        ch.subsystem = k.first;
        ch.name = k.second;
        ch.matrix = hermitian_part(pol.at(k));
        ch.magnitude = magnitude(ch.matrix);
        rep.channels.push_back(std::move(ch));
    }

    std::vector<std::string> names;
    std::vector<Eigen::MatrixXcd> disp;
    auto disp_slot = [&](const PairTerm& t) {
        std::string name = t.key_a + " * " + t.key_b;
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        names.push_back(name);
        disp.push_back(Eigen::MatrixXcd::Zero(ga * gb, ga * gb));
        return names.size() - 1;
    };
    for (const auto& t : terms) disp_slot(t);
    if (proj.e_a > 0 && proj.e_b > 0) {
        Eigen::MatrixXd w = dispersion_weights(a, b, proj);
        for (const auto& s : terms)
            for (const auto& t : terms) {
                Eigen::MatrixXcd m = dispersion_pair(s, t, proj, w);
                std::size_t si = disp_slot(s), sj = disp_slot(t);
                if (si == sj) {
                    disp[si] += m;
                } else {
                    disp[si] += 0.5 * m;
                    disp[sj] += 0.5 * m;
                }
            }
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        CorrectionChannel ch;
        ch.kind = "dispersion";
        ch.subsystem = a.label + "|" + b.label;
        ch.name = names[i];
        ch.matrix = hermitian_part(disp[i]);
        ch.magnitude = magnitude(ch.matrix);
        rep.channels.push_back(std::move(ch));
    }
    return rep;
}

}  // namespace qcirc
