#include "common.hpp"

#include "doctest.h"

#include <functional>
#include <numeric>
#include <sstream>
#include <random>
#include <set>

using namespace qcirc;

namespace {

// Union-find count of nodes and components of the inductive/Josephson subgraph, ground included.
std::pair<int, int> gl_nodes_and_components(const Circuit& c) {
    std::map<std::string, std::string> parent;
    std::function<std::string(const std::string&)> find = [&](const std::string& x) {
        if (parent[x] == x) return x;
        return parent[x] = find(parent[x]);
    };
    for (const auto& b : c.branches) {
        if (!b.inductive()) continue;
        for (const auto& n : {b.from, b.to})
            if (!parent.count(n)) parent[n] = n;
        parent[find(b.from)] = find(b.to);
    }
    std::set<std::string> roots;
    for (auto& [n, p] : parent) roots.insert(find(n));
    return {static_cast<int>(parent.size()), static_cast<int>(roots.size())};
}

Eigen::VectorXi branch_row(const Circuit& c, const std::string& id) {
    const Branch* b = c.find_branch(id);
    Eigen::VectorXi r = Eigen::VectorXi::Zero(static_cast<int>(c.nodes.size()));
    if (b->from != ground_node) r(c.node_index(b->from)) += 1;
    if (b->to != ground_node) r(c.node_index(b->to)) -= 1;
    return r;
}

const char* flux_qubit3 =
    "jj J1 1 0 120 cj=8\n"
    "jj J2 1 2 120 cj=8\n"
    "jj J3 2 3 90 cj=6\n"
    "ind L1 3 0 300 flux=0.5\n"
    "cap C1 1 0 2\ncap C2 2 0 2\ncap C3 3 0 2\n";

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("transmon has no islands and no closures") {
    Circuit c = parse_netlist("jj J1 1 0 20 cj=50");
    CHECK(find_islands(c).empty());
    auto f = build_spanning_forest(c);
    CHECK(f.tree_branches == std::vector<std::string>{"J1"});
    CHECK(f.closures.empty());
}

TEST_CASE("capacitor-only node is an island") {
    Circuit c = parse_netlist("ind L1 1 0 100\ncap C1 1 2 10\ncap C2 2 0 5");
    auto isl = find_islands(c);
    REQUIRE(isl.size() == 1);
    CHECK(isl[0].nodes == std::vector<std::string>{"2"});
    CHECK(isl[0].virtual_ground == "2");
}

TEST_CASE("RF-SQUID tree prefers the inductor") {
    Circuit c = parse_netlist("jj J1 1 0 40 cj=10\nind L1 1 0 400 flux=0.5");
    auto f = build_spanning_forest(c);
    CHECK(f.tree_branches == std::vector<std::string>{"L1"});
    REQUIRE(f.closures.size() == 1);
    CHECK(f.closures[0].branch == "J1");
    REQUIRE(f.closures[0].path.size() == 1);
    CHECK(f.closures[0].path[0].branch == "L1");
    CHECK(f.closures[0].fluxoid == 0);
}

TEST_CASE("JPSQ is one floating island with three closures") {
    Circuit c = load_netlist(qtest::source_path("circuits/jpsq.net"));
    auto isl = find_islands(c);
    REQUIRE(isl.size() == 1);
    CHECK(isl[0].nodes == std::vector<std::string>{"1", "2", "3", "4", "5", "6", "7"});
    CHECK(isl[0].virtual_ground == "1");
    auto f = build_spanning_forest(c);
    CHECK(f.closures.size() == 3);
    CHECK(f.tree_branches.size() == 6);
}

TEST_CASE("branch matrix rows") {
    Circuit a = parse_netlist("ind L1 1 0 100\ncap C1 1 0 1");
    auto ba = branch_matrix(a, build_spanning_forest(a));
    REQUIRE(ba.R.rows() == 1);
    CHECK(ba.R(0, 0) == 1);

    Circuit b = parse_netlist("ind L1 1 2 100\nind L2 2 0 100\ncap C1 1 0 1\ncap C2 2 0 1");
    auto bb = branch_matrix(b, build_spanning_forest(b));
    CHECK(bb.R.row(0) == (Eigen::RowVector2i() << 1, -1).finished());

    Circuit j = load_netlist(qtest::source_path("circuits/jpsq.net"));
    auto bj = branch_matrix(j, build_spanning_forest(j));
    CHECK(bj.R.rows() == 9);
    CHECK(bj.R.cols() == 7);
    // Every branch is internal to the island: each row sums to zero.
    for (int r = 0; r < bj.R.rows(); ++r) CHECK(bj.R.row(r).sum() == 0);
    CHECK(bj.R.cwiseAbs().maxCoeff() == 1);
}

TEST_CASE("tree size and closure cycles") {
    for (const std::string text : {std::string(flux_qubit3), qtest::source_path("circuits/jpsq.net"),
                                   std::string("jj J1 1 0 40 cj=10\nind L1 1 0 400\njj J2 1 2 30 cj=4\nind L2 2 0 200")}) {
        Circuit c = text.find('\n') == std::string::npos ? load_netlist(text) : parse_netlist(text);
        auto f = build_spanning_forest(c);
        auto [nodes, comps] = gl_nodes_and_components(c);
        CHECK(static_cast<int>(f.tree_branches.size()) == nodes - comps);
        int inductive = 0;
        for (const auto& b : c.branches) inductive += b.inductive();
        CHECK(static_cast<int>(f.closures.size()) == inductive - static_cast<int>(f.tree_branches.size()));
        for (const auto& cl : f.closures) {
            Eigen::VectorXi sum = branch_row(c, cl.branch);
            for (const auto& s : cl.path) sum += s.sign * branch_row(c, s.branch);
            CHECK(sum.isZero());
        }
    }
}

TEST_CASE("forest invariant under line permutation") {
    std::vector<std::string> lines;
    std::stringstream ss(flux_qubit3);
    for (std::string l; std::getline(ss, l);) lines.push_back(l);
    auto ref = build_spanning_forest(parse_netlist(flux_qubit3));
    std::mt19937 rng(3);
    for (int t = 0; t < 6; ++t) {
        std::shuffle(lines.begin(), lines.end(), rng);
        std::string joined;
        for (const auto& l : lines) joined += l + "\n";
        auto f = build_spanning_forest(parse_netlist(joined));
        CHECK(f.tree_branches == ref.tree_branches);
        REQUIRE(f.closures.size() == ref.closures.size());
        for (std::size_t i = 0; i < f.closures.size(); ++i) CHECK(f.closures[i].branch == ref.closures[i].branch);
    }
}

TEST_CASE("fluxoid override") {
    Circuit c = parse_netlist("jj J1 1 0 40 cj=10\nind L1 1 0 400");
    ForestOptions o;
    o.fluxoids["J1"] = 2;
    auto f = build_spanning_forest(c, o);
    CHECK(f.closure("J1")->fluxoid == 2);
}

}  // TEST_SUITE
