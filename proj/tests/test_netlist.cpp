#include "common.hpp"

#include "doctest.h"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>

using namespace qcirc;

namespace {

bool has_message(const std::vector<Diagnostic>& d, const std::string& needle) {
    return std::any_of(d.begin(), d.end(), [&](const Diagnostic& x) { return x.message.find(needle) != std::string::npos; });
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_SUITE("netlist") {

TEST_CASE("empty input") {
    Circuit c = parse_netlist("");
    CHECK(c.nodes.empty());
    CHECK(c.branches.empty());
}

TEST_CASE("LC to ground") {
    Circuit c = parse_netlist("cap C1 1 0 50\nind L1 1 0 500");
    REQUIRE(c.nodes.size() == 1);
    REQUIRE(c.branches.size() == 2);
    CHECK(c.branches[0].kind == BranchKind::capacitor);
    CHECK(c.branches[0].capacitance == 50.0);
    CHECK(c.branches[1].kind == BranchKind::inductor);
    CHECK(c.branches[1].inductance == 500.0);
    CHECK(validate_circuit(c).empty());
}

TEST_CASE("shipped JPSQ netlist") {
    Circuit c = load_netlist(qtest::source_path("circuits/jpsq.net"));
    CHECK(c.nodes.size() == 7);
    int jj = 0, ind = 0, flux = 0;
    for (const auto& b : c.branches) {
        jj += b.kind == BranchKind::junction;
        ind += b.kind == BranchKind::inductor;
    }
    for (const auto& id : {"LTL", "LBL", "Ll", "LTR", "LBR"}) flux += c.find_branch(id) != nullptr;
    CHECK(jj == 4);
    CHECK(ind == 5);
    CHECK(flux == 5);
    CHECK(c.charge_offsets.at("2") == doctest::Approx(0.45));
    CHECK(validate_circuit(c).empty());
}

TEST_CASE("passivity violation") {
    auto r = parse_netlist_lenient("cap C1 1 0 10\nind La 1 0 500\nind Lb 1 2 500\ncap C2 2 0 10\nmut M1 La Lb 800");
    CHECK(has_message(r.diagnostics, "passivity violated"));
    CHECK_THROWS_AS(parse_netlist("cap C1 1 0 10\nind La 1 0 500\nind Lb 1 2 500\ncap C2 2 0 10\nmut M1 La Lb 800"),
                    ParseError);
}

TEST_CASE("nonpositive Josephson energy") {
    auto r = parse_netlist_lenient("jj J1 1 0 -1 cj=5");
    CHECK(has_message(r.diagnostics, "nonpositive Josephson energy"));
}

TEST_CASE("syntax errors carry line numbers") {
    auto r = parse_netlist_lenient("cap C1 1 0 10\nfoo bar\ncap C1 1 0 5\nind L2 1 7x 1e400");
    REQUIRE(!r.diagnostics.empty());
    CHECK(std::any_of(r.diagnostics.begin(), r.diagnostics.end(), [](const Diagnostic& d) { return d.line == 2; }));
    CHECK(has_message(r.diagnostics, "duplicate id"));
    for (const auto& d : r.diagnostics) CHECK(d.line > 0);
}

TEST_CASE("self loop and unknown qoff node") {
    auto r = parse_netlist_lenient("cap C1 1 1 10\nqoff 9 0.5");
    CHECK(has_message(r.diagnostics, "connects a node to itself"));
    CHECK(has_message(r.diagnostics, "unknown node reference"));
}

TEST_CASE("emit and parse round trip") {
    for (const char* f : {"circuits/jpsq.net", "circuits/rfsquid.net", "circuits/transmon.net", "circuits/lc.net"}) {
        Circuit c = load_netlist(qtest::source_path(f));
        Circuit back = parse_netlist(emit_netlist(c));
        CHECK(back == canonicalize(c));
    }
    Circuit m = parse_netlist("cap C1 1 0 10\nind La 1 0 500 flux=0.25\nind Lb 1 2 400\ncap C2 2 0 10\nmut M1 La Lb -120\nqoff 2 0.1");
    CHECK(parse_netlist(emit_netlist(m)) == canonicalize(m));
}

TEST_CASE("line order independence after canonicalization") {
    std::string text = read_file(qtest::source_path("circuits/jpsq.net"));
    std::vector<std::string> lines;
    std::stringstream ss(text);
    for (std::string l; std::getline(ss, l);) lines.push_back(l);
    Circuit ref = canonicalize(parse_netlist(text));
    std::mt19937 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        std::shuffle(lines.begin(), lines.end(), rng);
        std::string joined;
        for (const auto& l : lines) joined += l + "\n";
        CHECK(canonicalize(parse_netlist(joined)) == ref);
    }
}

}  // TEST_SUITE
