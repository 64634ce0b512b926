#include "common.hpp"

#include "doctest.h"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

using namespace qcirc;

namespace {

constexpr double pi = std::numbers::pi;

PartitionNode leaf(const std::string& label, std::vector<std::string> modes, int retain, int extra) {
    PartitionNode p;
    p.label = label;
    p.modes = std::move(modes);
    p.retain = retain;
    p.extra = extra;
    return p;
}

PartitionNode pair(PartitionNode a, PartitionNode b) {
    PartitionNode p;
    p.label = "root";
    p.children = {std::move(a), std::move(b)};
    return p;
}

OperatorCache cache;

HierarchyResult run(const CircuitModel& m, const PartitionNode& root, int levels, bool corrections) {
    HierarchyOptions o;
    o.levels = levels;
    o.corrections = corrections;
    return iterate_levels(m, root, o, cache);
}

std::string coupled_oscillators(double cc) {
    std::ostringstream os;
    os << std::setprecision(17) << "cap C1 1 0 50\nind L1 1 0 500\ncap C2 2 0 40\nind L2 2 0 700\ncap Cc 1 2 " << cc;
    return os.str();
}

// Detuned charge qubits, E_J ~ E_C, weak capacitive coupling.
const char* dispersive_pair = "jj J1 1 0 4 cj=5\njj J2 2 0 6 cj=5\ncap Cc 1 2 0.15\nqoff 1 0.45\nqoff 2 0.45";

SubsystemSpectrum harmonic(int n, double w) {
    SubsystemSpectrum s;
    s.label = "osc";
    s.energies.resize(n);
    for (int k = 0; k < n; ++k) s.energies(k) = w * (k + 0.5);
    s.vectors = Eigen::MatrixXcd::Identity(n, n);
    s.dimension = n;
    return s;
}

}  // namespace

TEST_SUITE("perturbation") {

TEST_CASE("no extra levels means no correction") {
    auto s = harmonic(4, 5.0);
    Eigen::MatrixXcd F = oscillator_operator(OscOp::flux, 3, 0.3).m;
    CHECK(polarizability(s, F, F, 4, 0, 0.0).isZero(0.0));
    s.retain = 4;
    s.extra = 0;
    auto proj = make_projection(s, s);
    CHECK(proj.e_a == 0);
    std::vector<PairTerm> terms{{cplx(0.7), "a:flux", "b:flux", F, F, "test"}};
    auto rep = corrected_interaction(s, s, terms, proj);
    CHECK((rep.corrected() - rep.direct).cwiseAbs().maxCoeff() == 0.0);
    CHECK(dispersion_term(s, s, terms, proj).isZero(0.0));
}

TEST_CASE("harmonic polarizability") {
    const double w = 6.0, z = 0.4;
    const int n = 8;
    auto s = harmonic(n, w);
    Eigen::MatrixXcd F = oscillator_operator(OscOp::flux, n - 1, z).m;
    auto a1 = polarizability(s, F, F, 1, n - 1, s.energies(0));
    CHECK(a1(0, 0).real() == doctest::Approx(-z / (4 * pi * pi) / w).epsilon(1e-13));
    auto a2 = polarizability(s, F, F, 2, n - 2, s.energies(0));
    CHECK(a2(0, 0) == cplx(0.0));
    CHECK(a2(1, 1).real() == doctest::Approx(2 * z / (4 * pi * pi) / (-2 * w)).epsilon(1e-13));
}

TEST_CASE("resonant denominators are rejected") {
    auto s = harmonic(4, 5.0);
    Eigen::MatrixXcd F = oscillator_operator(OscOp::flux, 3, 0.3).m;
    CHECK_THROWS(polarizability(s, F, F, 1, 3, s.energies(1)));
}

TEST_CASE("corrected ground energy error scales as the fourth power of the coupling") {
    double err_c[2], err_u[2];
    int i = 0;
    for (double cc : {0.8, 0.4}) {
        auto m = qtest::model_of(coupled_oscillators(cc), ModelOptions{.default_nu = 10});
        auto exact = qtest::brute(m, 1).values(0);
        auto root = pair(leaf("a", {"O1"}, 1, 10), leaf("b", {"O2"}, 1, 10));
        err_c[i] = std::abs(run(m, root, 1, true).spectrum.values(0) - exact);
        err_u[i] = std::abs(run(m, root, 1, false).spectrum.values(0) - exact);
        ++i;
    }
    CHECK(err_u[0] / err_u[1] == doctest::Approx(4.0).epsilon(0.1));
    CHECK(err_c[0] / err_c[1] > 12.0);
    CHECK(err_c[0] < err_u[0] / 50);
}

TEST_CASE("dispersive charge qubits against dense diagonalization") {
    auto m = qtest::model_of(dispersive_pair, ModelOptions{.default_q = 10});
    auto exact = qtest::brute(m, 4).values;
    auto root = pair(leaf("a", {"J1"}, 2, 12), leaf("b", {"J2"}, 2, 12));
    auto r = run(m, root, 4, true);
    auto u = run(m, root, 4, false);
    const auto& ea = r.leaves[0].energies;
    const auto& eb = r.leaves[1].energies;
    std::vector<double> bare{ea(0) + eb(0), ea(0) + eb(1), ea(1) + eb(0), ea(1) + eb(1)};
    std::sort(bare.begin(), bare.end());
    // The four g levels lie far below the first e level.
    CHECK(exact(3) < ea(2) + eb(0));
    for (int k = 0; k < 4; ++k) {
        const double ref = exact(k) - bare[k];
        const double got = r.spectrum.values(k) - bare[k];
        CHECK(std::abs(got - ref) <= 0.05 * std::abs(ref));
        CHECK(std::abs(r.spectrum.values(k) - exact(k)) < std::abs(u.spectrum.values(k) - exact(k)));
    }
}

TEST_CASE("corrections vanish as the retained space grows") {
    auto m = qtest::model_of(dispersive_pair, ModelOptions{.default_q = 10});
    double prev = 1e300;
    for (int g : {2, 4, 6}) {
        auto root = pair(leaf("a", {"J1"}, g, 12 - g), leaf("b", {"J2"}, g, 12 - g));
        auto c = run(m, root, 2, true).spectrum.values;
        auto u = run(m, root, 2, false).spectrum.values;
        double d = (c - u).cwiseAbs().maxCoeff();
        CHECK(d < prev);
        prev = d;
    }
}

TEST_CASE("JPSQ correction channels") {
    auto cfg = qtest::jpsq_config();
    Circuit c = apply_parameter(cfg.circuit, "branch:Ll.flux", 0.5);
    auto m = build_model(c, cfg.model);
    REQUIRE(cfg.partition);
    auto r = run(m, *cfg.partition, 2, true);
    REQUIRE(r.reports.size() == 1);
    const auto& rep = r.reports[0];
    CHECK(rep.count("polarizability") == 6);
    CHECK(rep.count("dispersion") == 3);

    // Channel additivity is exact.
    Eigen::MatrixXcd sum = rep.direct;
    for (const auto& ch : rep.channels) sum += ch.matrix;
    CHECK((rep.corrected() - sum).cwiseAbs().maxCoeff() == 0.0);

    Eigen::MatrixXcd C = rep.corrected();
    Eigen::MatrixXcd H = 0.5 * (C + C.adjoint());
    CHECK((H - H.adjoint()).norm() <= 1e-12 * H.norm());
    CHECK((C - C.adjoint()).norm() <= 1e-9 * C.norm());

    auto j = rep.to_json();
    CHECK(j["channels"].size() == 9);
    CHECK(j["retained"][0] == 6);
    CHECK(j["retained"][1] == 5);
}

}  // TEST_SUITE
