#include "common.hpp"

#include "qcirc/units.hpp"

#include "doctest.h"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <string>

using namespace qcirc;

namespace {

constexpr double pi = std::numbers::pi;

double ec_ghz(double c_ff) { return units::e * units::e / (2 * c_ff * units::fF) / units::h / units::GHz; }

std::string num(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string transmon(double ej, double c_ff, double ng) {
    return "jj J1 1 0 " + num(ej) + " cj=" + num(c_ff) + "\nqoff 1 " + num(ng);
}

double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return ((a - b).array().abs() / b.array().abs().max(1e-300)).maxCoeff();
}

}  // namespace

TEST_SUITE("hamiltonian") {

TEST_CASE("LC oscillator terms and spectrum") {
    auto m = qtest::model_of("cap C1 1 0 50\nind L1 1 0 500");
    CHECK(m.terms.size() == 2);
    auto s = qtest::brute(m, 6);
    const double w = m.transform.freq(0);
    for (int n = 0; n < 6; ++n) CHECK(std::abs(s.values(n) / (w * (n + 0.5)) - 1) < 1e-10);
}

TEST_CASE("two coupled oscillators reproduce their normal modes") {
    auto m = qtest::model_of("cap C1 1 0 40\ncap C2 2 0 60\ncap Cc 1 2 7\nind L1 1 0 500\nind L2 2 0 800\nind Lc 1 2 3000",
                             ModelOptions{.default_nu = 14});
    // Exact normal modes from the generalized eigenproblem L_inv x = w^2 C x.
    Eigen::MatrixXd C = m.nodes.C_n * units::fF;
    Eigen::MatrixXd Li = m.nodes.L_n_inv / units::pH;
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(Li, C);
    Eigen::Vector2d f = ges.eigenvalues().cwiseSqrt() / (2 * pi * units::GHz);
    auto s = qtest::brute(m, 3);
    const double e0 = 0.5 * (f(0) + f(1));
    CHECK(s.values(0) == doctest::Approx(e0).epsilon(1e-9));
    CHECK(s.values(1) - s.values(0) == doctest::Approx(f(0)).epsilon(1e-8));
    CHECK(s.values(2) - s.values(0) == doctest::Approx(std::min(2 * f(0), f(1))).epsilon(1e-8));
}

TEST_CASE("transmon terms and charge-basis self-convergence") {
    const double c = 48;
    for (double ratio : {5.0, 50.0}) {
        const double ej = ratio * ec_ghz(c);
        auto text = transmon(ej, c, 0.25);
        auto m = qtest::model_of(text, ModelOptions{.default_q = 30});
        CHECK(m.terms.size() == 3);
        auto a = qtest::brute(m, 5).values;
        auto b = qtest::brute_values(text, 5, ModelOptions{.default_q = 60});
        CHECK(rel_diff(a, b) < 1e-8);
    }
}

TEST_CASE("transmon charging energy") {
    // E_J -> 0: free rotor, E_n = 4 E_C (n - n_g)^2.
    const double c = 48, ec = ec_ghz(c);
    auto v = qtest::brute_values(transmon(1e-9, c, 0.2), 3, ModelOptions{.default_q = 10});
    CHECK(v(0) == doctest::Approx(4 * ec * 0.04).epsilon(1e-7));
    CHECK(v(1) == doctest::Approx(4 * ec * 0.64).epsilon(1e-7));
    CHECK(v(2) == doctest::Approx(4 * ec * 1.44).epsilon(1e-7));
}

TEST_CASE("JPSQ dimension") {
    auto cfg = qtest::jpsq_config();
    auto m = build_model(cfg.circuit, cfg.model);
    CHECK(m.basis.dimension() == 39600);
    CHECK(m.basis.modes.size() == 7);
}

TEST_CASE("junction phase decompositions") {
    auto t = qtest::model_of("jj J1 1 0 20 cj=48");
    REQUIRE(t.junctions.size() == 1);
    CHECK(t.junctions[0].a.empty());
    REQUIRE(t.junctions[0].n.size() == 1);
    CHECK(std::abs(t.junctions[0].n[0].second) == 1);
    CHECK(t.junctions[0].dphi == 0.0);

    auto r = qtest::model_of("jj J1 1 0 250 cj=10\nind L1 1 0 1000 flux=0.5");
    REQUIRE(r.junctions.size() == 1);
    CHECK(r.junctions[0].n.empty());
    REQUIRE(r.junctions[0].a.size() == 1);
    CHECK(std::abs(r.junctions[0].a[0].second) == doctest::Approx(1.0));
    CHECK(std::cos(r.junctions[0].dphi) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("oscillator ground state is the vacuum") {
    auto m = qtest::model_of("cap C1 1 0 50\nind L1 1 0 500", ModelOptions{.default_nu = 20});
    auto s = qtest::brute(m, 2);
    OperatorCache cache;
    Eigen::VectorXcd g = s.vectors.col(0);
    CHECK(std::abs(expectation(0, {OpType::flux, 0.0}, g, m.basis, cache)) < 1e-12);
    CHECK(std::abs(expectation(0, {OpType::charge, 0.0}, g, m.basis, cache)) < 1e-12);
    const double z = m.transform.z(0);
    for (double a : {0.5, 1.0, 2.0})
        CHECK(std::abs(expectation(0, {OpType::displacement, a}, g, m.basis, cache) - std::exp(-a * a * z / 2)) <
              1e-12);
    // <Phi^2> in the first excited state is three times the vacuum value.
    Eigen::VectorXcd e = s.vectors.col(1);
    CHECK(expectation(0, {OpType::flux_sq, 0.0}, e, m.basis, cache).real() ==
          doctest::Approx(3 * z / (4 * pi * pi)).epsilon(1e-10));
}

TEST_CASE("flux and charge periodicity") {
    ModelOptions o{.default_nu = 40};
    const std::string rf = "jj J1 1 0 250 cj=10\nind L1 1 0 1000 flux=";
    for (double f : {0.0, 0.2, 0.45}) {
        auto a = qtest::brute_values(rf + num(f), 4, o);
        auto b = qtest::brute_values(rf + num(f + 1), 4, o);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
    }
    ModelOptions q{.default_q = 30};
    for (double ng : {0.0, 0.3}) {
        auto a = qtest::brute_values(transmon(20, 48, ng), 4, q);
        auto b = qtest::brute_values(transmon(20, 48, ng + 1), 4, q);
        auto c = qtest::brute_values(transmon(20, 48, -ng), 4, q);
        CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((a - c).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("assembled Hamiltonian is Hermitian and equals the sum of its terms") {
    auto cfg = qtest::jpsq_config();
    ModelOptions small = cfg.model;
    for (auto& [k, v] : small.truncation) v = std::min(v, 2);
    auto m = build_model(cfg.circuit, small);
    OperatorCache cache;
    auto H = assemble(m.terms, m.basis, cache);
    SparseH Hd = H.H.adjoint();
    CHECK((H.H - Hd).norm() <= 1e-12 * H.H.norm());
    SparseH sum(H.dim, H.dim);
    for (const auto& t : m.terms) sum += term_matrix(t, m.basis, cache);
    CHECK((H.H - sum).norm() <= 1e-12 * H.H.norm());
}

TEST_CASE("assembly is independent of the thread count") {
    auto cfg = qtest::jpsq_config();
    ModelOptions small = cfg.model;
    for (auto& [k, v] : small.truncation) v = std::min(v, 2);
    auto m = build_model(cfg.circuit, small);
    OperatorCache cache;
    auto a = assemble(m.terms, m.basis, cache, default_dimension_cap, 1);
    auto b = assemble(m.terms, m.basis, cache, default_dimension_cap, 4);
    CHECK(a.H.nonZeros() == b.H.nonZeros());
    CHECK((a.H - b.H).norm() == 0.0);
}

TEST_CASE("dimension cap is enforced") {
    auto cfg = qtest::jpsq_config();
    auto m = build_model(cfg.circuit, cfg.model);
    OperatorCache cache;
    CHECK_THROWS(assemble(m.terms, m.basis, cache, 1000));
}

TEST_CASE("spectrum does not depend on the forest or the transform") {
    const char* fq = "jj J1 1 0 120 cj=8\njj J2 1 2 120 cj=8\njj J3 2 3 90 cj=6\nind L1 3 0 300 flux=0.5\n"
                     "cap C1 1 0 2\ncap C2 2 0 2\ncap C3 3 0 2\n";
    ModelOptions a{.default_nu = 30, .default_q = 12};
    ModelOptions b = a;
    b.forest.prefer_inductors = false;
    b.forest.ascending_ids = false;
    auto va = qtest::brute_values(fq, 4, a);
    auto vb = qtest::brute_values(fq, 4, b);
    CHECK((va - vb).cwiseAbs().maxCoeff() < 1e-9);
}

}  // TEST_SUITE
