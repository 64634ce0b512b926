#include "common.hpp"

#include "qcirc/units.hpp"

#include "doctest.h"

#include <cmath>
#include <numbers>

using namespace qcirc;

namespace {

struct Built {
    Circuit c;
    SpanningForest f;
    BranchMatrix bm;
    NodeMatrices nm;
    ModeTransform mt;
};

Built build(const Circuit& c, const UserTransform* user = nullptr) {
    Built b;
    b.c = c;
    b.f = build_spanning_forest(c);
    b.bm = branch_matrix(c, b.f);
    b.nm = build_node_matrices(c, b.bm);
    b.mt = build_mode_transform(c, b.nm, b.f, user);
    return b;
}

double wrap01(double x) { return x - std::round(x); }

void check_transform_invariants(const Built& b) {
    const auto& mt = b.mt;
    const int n = static_cast<int>(mt.size());
    CHECK(mt.n_osc + mt.n_isl + mt.n_jos == n);
    CHECK((mt.R * mt.Rinv - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() < 1e-12);
    // Pull-back reproduces the node inductance matrix.
    Eigen::MatrixXd back = mt.R.transpose() * mt.L_inv * mt.R;
    double scale = std::max(1.0, b.nm.L_n_inv.cwiseAbs().maxCoeff());
    CHECK((back - b.nm.L_n_inv).cwiseAbs().maxCoeff() < 1e-12 * scale);
    // L_inv vanishes outside the oscillator block.
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (mt.kinds[i] != ModeKind::oscillator || mt.kinds[j] != ModeKind::oscillator)
                CHECK(std::abs(mt.L_inv(i, j)) < 1e-12 * scale);
    // Junction fluxes: integer Josephson coefficients, no island dependence.
    for (int r = 0; r < b.bm.R.rows(); ++r) {
        const Branch* br = b.c.find_branch(b.bm.branch_ids[r]);
        if (br->kind != BranchKind::junction) continue;
        Eigen::RowVectorXd coef = b.bm.R.row(r).cast<double>() * mt.Rinv;
        for (int k = 0; k < n; ++k) {
            if (mt.kinds[k] == ModeKind::island) CHECK(std::abs(coef(k)) < 1e-12);
            if (mt.kinds[k] == ModeKind::josephson) CHECK(std::abs(coef(k) - std::round(coef(k))) < 1e-12);
        }
    }
    for (int k = 0; k < n; ++k)
        if (mt.kinds[k] == ModeKind::oscillator) {
            CHECK(mt.freq(k) > 0);
            CHECK(mt.Z(k) > 0);
        }
}

}  // namespace

TEST_SUITE("modes") {

TEST_CASE("node capacitance matrix") {
    Circuit c = parse_netlist("cap C1 1 0 10\ncap C2 2 0 20\ncap Cc 1 2 5");
    auto f = build_spanning_forest(c);
    auto nm = build_node_matrices(c, branch_matrix(c, f));
    Eigen::Matrix2d expect;
    expect << 15, -5, -5, 25;
    CHECK((nm.C_n - expect).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single inductor to ground") {
    Circuit c = parse_netlist("ind L1 1 0 500\ncap C1 1 0 1");
    auto nm = build_node_matrices(c, branch_matrix(c, build_spanning_forest(c)));
    CHECK(nm.L_n_inv(0, 0) == doctest::Approx(1.0 / 500).epsilon(1e-14));
}

TEST_CASE("mutual inductance against a hand inversion") {
    const double La = 300, Lb = 500, M = 120;
    Circuit c = parse_netlist("ind La 1 2 300\nind Lb 2 0 500\nmut M1 La Lb 120\ncap C1 1 0 5\ncap C2 2 0 5");
    auto nm = build_node_matrices(c, branch_matrix(c, build_spanning_forest(c)));
    // Rows: La = (+1, -1), Lb = (0, +1); inverse of [[La, M], [M, Lb]].
    const double D = La * Lb - M * M;
    const double a = Lb / D, b = -M / D, d = La / D;
    CHECK(nm.L_n_inv(0, 0) == doctest::Approx(a).epsilon(1e-13));
    CHECK(nm.L_n_inv(0, 1) == doctest::Approx(b - a).epsilon(1e-13));
    CHECK(nm.L_n_inv(1, 0) == doctest::Approx(b - a).epsilon(1e-13));
    CHECK(nm.L_n_inv(1, 1) == doctest::Approx(a - 2 * b + d).epsilon(1e-13));
}

TEST_CASE("LC mode") {
    auto b = build(parse_netlist("cap C1 1 0 50\nind L1 1 0 500"));
    CHECK(b.mt.n_osc == 1);
    CHECK(b.mt.n_isl == 0);
    CHECK(b.mt.n_jos == 0);
    const double w = 1.0 / std::sqrt(500 * units::pH * 50 * units::fF);
    CHECK(b.mt.freq(0) == doctest::Approx(w / (2 * std::numbers::pi) / units::GHz).epsilon(1e-12));
    CHECK(b.mt.Z(0) == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(b.mt.z(0) == doctest::Approx(std::numbers::pi * 100.0 / units::R_Q).epsilon(1e-12));
    check_transform_invariants(b);
}

TEST_CASE("transmon mode") {
    auto b = build(parse_netlist("jj J1 1 0 20 cj=50"));
    CHECK(b.mt.n_osc == 0);
    CHECK(b.mt.n_isl == 0);
    CHECK(b.mt.n_jos == 1);
    check_transform_invariants(b);
}

TEST_CASE("JPSQ with the hand-chosen transform") {
    auto cfg = qtest::jpsq_config();
    REQUIRE(cfg.model.transform);
    auto b = build(cfg.circuit, &*cfg.model.transform);
    CHECK(b.mt.n_osc == 5);
    CHECK(b.mt.n_isl == 1);
    CHECK(b.mt.n_jos == 1);
    check_transform_invariants(b);
}

TEST_CASE("JPSQ with the automatic transform") {
    auto b = build(load_netlist(qtest::source_path("circuits/jpsq.net")));
    CHECK(b.mt.n_osc == 5);
    CHECK(b.mt.n_isl == 1);
    CHECK(b.mt.n_jos == 1);
    check_transform_invariants(b);
}

TEST_CASE("automatic transform invariants on assorted circuits") {
    for (const char* text : {
             "jj J1 1 0 40 cj=10\nind L1 1 0 400 flux=0.3",
             "jj J1 1 0 120 cj=8\njj J2 1 2 120 cj=8\njj J3 2 3 90 cj=6\nind L1 3 0 300\ncap C1 1 0 2\ncap C2 2 0 2\ncap C3 3 0 2",
             "ind La 1 2 300\nind Lb 2 0 500\nmut M1 La Lb 120\njj J1 1 0 30 cj=4\ncap C2 2 0 5",
             "jj J1 1 2 20 cj=5\njj J2 2 3 20 cj=5\ncap C1 1 0 3\ncap C3 3 0 3\nind L1 3 4 200\ncap C4 4 0 10",
         })
        check_transform_invariants(build(parse_netlist(text)));
}

TEST_CASE("invalid user transforms are rejected") {
    Circuit c = parse_netlist("jj J1 1 0 40 cj=10\nind L1 1 0 400");
    UserTransform wrong_kind;
    wrong_kind.rows.push_back({"X", ModeKind::josephson, {{"1", 1.0}}});
    CHECK_THROWS(build(c, &wrong_kind));
    UserTransform singular;
    singular.rows.push_back({"X", ModeKind::oscillator, {{"1", 0.0}}});
    CHECK_THROWS(build(c, &singular));
    Circuit t = parse_netlist("jj J1 1 0 20 cj=50");
    UserTransform half;
    half.rows.push_back({"J", ModeKind::josephson, {{"1", 0.5}}});
    CHECK_THROWS(build(t, &half));
}

TEST_CASE("bias offsets") {
    auto none = build(parse_netlist("cap C1 1 0 50\nind L1 1 0 500"));
    CHECK(none.mt.dQ.isZero(0.0));
    CHECK(none.mt.dPhi.isZero(0.0));

    auto rf = build(parse_netlist("jj J1 1 0 40 cj=10\nind L1 1 0 400 flux=0.5"));
    CHECK(std::abs(rf.mt.dPhi(0)) == doctest::Approx(0.5).epsilon(1e-12));

    auto q = build(parse_netlist("jj J1 1 0 20 cj=50\nqoff 1 0.3"));
    CHECK(q.mt.dQ(0) == doctest::Approx(0.3));
}

TEST_CASE("JPSQ junction phases combine the three loop fluxes") {
    auto cfg = qtest::jpsq_config();
    const double fL = 0.1, fR = 0.07, fz = 0.3;
    Circuit c = cfg.circuit;
    c.find_branch("LTL")->external_flux = fL / 2;
    c.find_branch("LBL")->external_flux = -fL / 2;
    c.find_branch("Ll")->external_flux = fz;
    c.find_branch("LTR")->external_flux = -fR / 2;
    c.find_branch("LBR")->external_flux = -fR / 2;
    CircuitModel m = build_model(c, cfg.model);
    std::map<std::string, double> ph;
    for (const auto& j : m.junctions) ph[j.branch] = j.dphi / (2 * std::numbers::pi);
    // Gauge-invariant combinations (Josephson integers cancel).
    CHECK(std::abs(wrap01(ph["TL"] - ph["BL"] - fL)) < 1e-12);
    CHECK(std::abs(wrap01(ph["TR"] + ph["BR"] - fR)) < 1e-12);
    CHECK(std::abs(wrap01(ph["TL"] + ph["TR"] - (fz + fL / 2 + fR / 2))) < 1e-12);
}

TEST_CASE("regularized floating node is harmless") {
    // Node 2 has no capacitance at all: its regularizing capacitance must not move the spectrum.
    const char* bare = "jj J1 1 0 20 cj=40\nind L1 1 2 2000\nind L2 2 0 2000";
    const char* tiny = "jj J1 1 0 20 cj=40\nind L1 1 2 2000\nind L2 2 0 2000\ncap Cx 2 0 1e-6";
    ModelOptions o;
    o.default_nu = 30;
    auto a = qtest::brute_values(bare, 3, o);
    auto b = qtest::brute_values(tiny, 3, o);
    CHECK(std::abs((a(1) - a(0)) - (b(1) - b(0))) < 1e-6);
}

}  // TEST_SUITE
