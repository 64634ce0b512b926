#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qcirc {

inline const std::string ground_node = "0";

// Numeric ids compare by value and sort before non-numeric ids.
bool id_less(const std::string& a, const std::string& b);

struct IdLess {
    bool operator()(const std::string& a, const std::string& b) const { return id_less(a, b); }
};

enum class BranchKind { capacitor, inductor, junction };

const char* to_string(BranchKind k);

struct Branch {
    std::string id;
    BranchKind kind = BranchKind::capacitor;
    std::string from;
    std::string to;
    double capacitance = 0.0;    // fF; shunt capacitance for junctions
    double inductance = 0.0;     // pH
    double ej = 0.0;             // GHz
    double external_flux = 0.0;  // Phi0, inductors only
    int line = 0;

    bool inductive() const { return kind != BranchKind::capacitor; }
    bool operator==(const Branch& o) const;
};

struct Mutual {
    std::string id;
    std::string a;
    std::string b;
    double inductance = 0.0;  // pH, signed
    int line = 0;

    bool operator==(const Mutual& o) const;
};

struct Circuit {
    std::vector<std::string> nodes;  // sorted by id_less, ground excluded
    std::vector<Branch> branches;
    std::vector<Mutual> mutuals;
    std::map<std::string, double, IdLess> charge_offsets;  // 2e

    // Index into nodes, or -1 for ground. Throws on unknown ids.
    int node_index(const std::string& id) const;
    const Branch* find_branch(const std::string& id) const;
    Branch* find_branch(const std::string& id);
    std::size_t num_nodes() const { return nodes.size(); }

    bool operator==(const Circuit& o) const;
};

struct Diagnostic {
    int line = 0;
    int column = 0;
    std::string message;
};

std::string format_diagnostic(const Diagnostic& d);

class ParseError : public std::runtime_error {
public:
    explicit ParseError(std::vector<Diagnostic> diags);
    const std::vector<Diagnostic>& diagnostics() const { return diags_; }

private:
    std::vector<Diagnostic> diags_;
};

struct ParseResult {
    Circuit circuit;
    std::vector<Diagnostic> diagnostics;  // syntax and validation, ordered by line
};

ParseResult parse_netlist_lenient(std::string_view text);
Circuit parse_netlist(std::string_view text);
Circuit load_netlist(const std::string& path);

std::vector<Diagnostic> validate_circuit(const Circuit& c);

// Canonical order, shortest round-trip numbers.
std::string emit_netlist(const Circuit& c);

// Sorts branches and mutuals by id; nodes are always kept sorted.
Circuit canonicalize(Circuit c);

// Rebuilds the node list from branch endpoints.
void refresh_nodes(Circuit& c);

}  // namespace qcirc
