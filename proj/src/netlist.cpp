#include "qcirc/netlist.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace qcirc {

namespace {

bool all_digits(const std::string& s) {
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char ch) { return ch >= '0' && ch <= '9'; });
}

struct Token {
    std::string text;
    int column;
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i >= line.size()) break;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        out.push_back({std::string(line.substr(i, j - i)), static_cast<int>(i) + 1});
        i = j;
    }
    return out;
}

bool parse_double(const std::string& s, double& v) {
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (first != last && *first == '+') ++first;
    auto [p, ec] = std::from_chars(first, last, v);
    return ec == std::errc() && p == last && std::isfinite(v);
}

std::string fmt_num(double v) {
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

bool id_less(const std::string& a, const std::string& b) {
    const bool na = all_digits(a), nb = all_digits(b);
    if (na && nb) {
        auto strip = [](const std::string& s) {
            std::size_t k = s.find_first_not_of('0');
            return k == std::string::npos ? std::string("0") : s.substr(k);
        };
        std::string sa = strip(a), sb = strip(b);
        if (sa.size() != sb.size()) return sa.size() < sb.size();
        if (sa != sb) return sa < sb;
        return a < b;
    }
    if (na != nb) return na;
    return a < b;
}

const char* to_string(BranchKind k) {
    switch (k) {
        case BranchKind::capacitor: return "cap";
        case BranchKind::inductor: return "ind";
        case BranchKind::junction: return "jj";
    }
    return "?";
}

bool Branch::operator==(const Branch& o) const {
    return id == o.id && kind == o.kind && from == o.from && to == o.to && capacitance == o.capacitance &&
           inductance == o.inductance && ej == o.ej && external_flux == o.external_flux;
}

bool Mutual::operator==(const Mutual& o) const {
    return id == o.id && a == o.a && b == o.b && inductance == o.inductance;
}

bool Circuit::operator==(const Circuit& o) const {
    return nodes == o.nodes && branches == o.branches && mutuals == o.mutuals &&
           charge_offsets == o.charge_offsets;
}

int Circuit::node_index(const std::string& id) const {
    if (id == ground_node) return -1;
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id, id_less);
    if (it == nodes.end() || *it != id) throw std::out_of_range("unknown node '" + id + "'");
    return static_cast<int>(it - nodes.begin());
}

const Branch* Circuit::find_branch(const std::string& id) const {
    for (const auto& b : branches)
        if (b.id == id) return &b;
    return nullptr;
}

Branch* Circuit::find_branch(const std::string& id) {
    for (auto& b : branches)
        if (b.id == id) return &b;
    return nullptr;
}

std::string format_diagnostic(const Diagnostic& d) {
    std::ostringstream os;
    if (d.line > 0) {
        os << "line " << d.line;
        if (d.column > 0) os << ":" << d.column;
        os << ": ";
    }
    os << d.message;
    return os.str();
}

namespace {
std::string join_diagnostics(const std::vector<Diagnostic>& diags) {
    std::string msg = "netlist rejected";
    for (const auto& d : diags) msg += "\n  " + format_diagnostic(d);
    return msg;
}
}  // namespace

ParseError::ParseError(std::vector<Diagnostic> diags)
    : std::runtime_error(join_diagnostics(diags)), diags_(std::move(diags)) {}

void refresh_nodes(Circuit& c) {
    std::set<std::string, IdLess> ns;
    for (const auto& b : c.branches) {
        if (b.from != ground_node) ns.insert(b.from);
        if (b.to != ground_node) ns.insert(b.to);
    }
    c.nodes.assign(ns.begin(), ns.end());
}

ParseResult parse_netlist_lenient(std::string_view text) {
    ParseResult res;
    Circuit& c = res.circuit;
    auto& diags = res.diagnostics;
    std::vector<std::pair<int, std::pair<std::string, double>>> qoffs;
    std::set<std::string> ids;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++lineno;
        if (auto h = line.find('#'); h != std::string_view::npos) line = line.substr(0, h);
        auto toks = tokenize(line);
        if (toks.empty()) {
            if (nl == text.size()) break;
            continue;
        }
        auto err = [&](int col, std::string msg) { diags.push_back({lineno, col, std::move(msg)}); };
        const std::string& kw = toks[0].text;

        auto number = [&](const Token& t, double& v, const char* what) {
            if (!parse_double(t.text, v)) {
                err(t.column, std::string("syntax error: expected ") + what + ", got '" + t.text + "'");
                return false;
            }
            return true;
        };
        auto claim_id = [&](const Token& t) {
            if (!ids.insert(t.text).second) {
                err(t.column, "duplicate id '" + t.text + "'");
                return false;
            }
            return true;
        };

        if (kw == "cap" || kw == "ind" || kw == "jj") {
            if (toks.size() < 5) {
                err(toks[0].column, "syntax error: '" + kw + "' needs <id> <nodeA> <nodeB> <value>");
                continue;
            }
            Branch b;
            b.id = toks[1].text;
            b.from = toks[2].text;
            b.to = toks[3].text;
            b.line = lineno;
            double v = 0;
            if (!number(toks[4], v, "a number")) continue;
            bool ok = true;
            if (kw == "cap") {
                b.kind = BranchKind::capacitor;
                b.capacitance = v;
            } else if (kw == "ind") {
                b.kind = BranchKind::inductor;
                b.inductance = v;
            } else {
                b.kind = BranchKind::junction;
                b.ej = v;
            }
            for (std::size_t k = 5; k < toks.size(); ++k) {
                const auto& t = toks[k];
                auto eq = t.text.find('=');
                std::string key = eq == std::string::npos ? t.text : t.text.substr(0, eq);
                if (eq == std::string::npos) {
                    err(t.column, "syntax error: unexpected token '" + t.text + "'");
                    ok = false;
                    continue;
                }
                double ov = 0;
                Token vt{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
                if (kw == "ind" && key == "flux") {
                    if (number(vt, ov, "a flux value")) b.external_flux = ov;
                    else ok = false;
                } else if (kw == "jj" && key == "cj") {
                    if (number(vt, ov, "a capacitance")) b.capacitance = ov;
                    else ok = false;
                } else {
                    err(t.column, "syntax error: unknown option '" + key + "' for '" + kw + "'");
                    ok = false;
                }
            }
            if (!claim_id(toks[1])) ok = false;
            if (ok) c.branches.push_back(std::move(b));
        } else if (kw == "mut") {
            if (toks.size() != 5) {
                err(toks[0].column, "syntax error: 'mut' needs <id> <indA> <indB> <pH>");
                continue;
            }
            Mutual m{toks[1].text, toks[2].text, toks[3].text, 0.0, lineno};
            if (!number(toks[4], m.inductance, "a number")) continue;
            if (claim_id(toks[1])) c.mutuals.push_back(std::move(m));
        } else if (kw == "qoff") {
            if (toks.size() != 3) {
                err(toks[0].column, "syntax error: 'qoff' needs <node> <offset>");
                continue;
            }
            double v = 0;
            if (!number(toks[2], v, "a number")) continue;
            qoffs.push_back({lineno, {toks[1].text, v}});
        } else {
            err(toks[0].column, "syntax error: unknown statement '" + kw + "'");
        }
        if (nl == text.size()) break;
    }

    refresh_nodes(c);
    for (const auto& [ln, q] : qoffs) {
        const auto& [node, v] = q;
        if (node == ground_node || !std::binary_search(c.nodes.begin(), c.nodes.end(), node, id_less)) {
            diags.push_back({ln, 0, "unknown node reference '" + node + "' in qoff"});
            continue;
        }
        c.charge_offsets[node] += v;
    }

    auto more = validate_circuit(c);
    diags.insert(diags.end(), more.begin(), more.end());
    std::stable_sort(diags.begin(), diags.end(),
                     [](const Diagnostic& x, const Diagnostic& y) { return x.line < y.line; });
    return res;
}

Circuit parse_netlist(std::string_view text) {
    auto r = parse_netlist_lenient(text);
    if (!r.diagnostics.empty()) throw ParseError(std::move(r.diagnostics));
    return std::move(r.circuit);
}

Circuit load_netlist(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open netlist '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_netlist(ss.str());
}

std::vector<Diagnostic> validate_circuit(const Circuit& c) {
    std::vector<Diagnostic> d;
    auto known = [&](const std::string& n) {
        return n == ground_node || std::binary_search(c.nodes.begin(), c.nodes.end(), n, id_less);
    };
    std::set<std::string> ids;
    for (const auto& b : c.branches) {
        if (!ids.insert(b.id).second) d.push_back({b.line, 0, "duplicate id '" + b.id + "'"});
        if (!known(b.from)) d.push_back({b.line, 0, "unknown node reference '" + b.from + "'"});
        if (!known(b.to)) d.push_back({b.line, 0, "unknown node reference '" + b.to + "'"});
        if (b.from == b.to) d.push_back({b.line, 0, "branch '" + b.id + "' connects a node to itself"});
        if (!(b.capacitance >= 0)) d.push_back({b.line, 0, "negative element value on '" + b.id + "'"});
        if (!std::isfinite(b.external_flux))
            d.push_back({b.line, 0, "external flux on '" + b.id + "' is not finite"});
        switch (b.kind) {
            case BranchKind::inductor:
                if (!(b.inductance > 0)) d.push_back({b.line, 0, "nonpositive inductance on '" + b.id + "'"});
                break;
            case BranchKind::junction:
                if (!(b.ej > 0)) d.push_back({b.line, 0, "nonpositive Josephson energy on '" + b.id + "'"});
                [[fallthrough]];
            case BranchKind::capacitor:
                if (b.external_flux != 0.0)
                    d.push_back({b.line, 0, "external flux only allowed on inductors ('" + b.id + "')"});
                break;
        }
    }
    for (const auto& [n, v] : c.charge_offsets) {
        if (n == ground_node || !known(n)) d.push_back({0, 0, "unknown node reference '" + n + "' in qoff"});
        if (!std::isfinite(v)) d.push_back({0, 0, "charge offset on '" + n + "' is not finite"});
    }

    std::vector<const Branch*> inds;
    for (const auto& b : c.branches)
        if (b.kind == BranchKind::inductor) inds.push_back(&b);
    auto ind_index = [&](const std::string& id) -> int {
        for (std::size_t k = 0; k < inds.size(); ++k)
            if (inds[k]->id == id) return static_cast<int>(k);
        return -1;
    };
    bool mutuals_ok = true;
    std::set<std::pair<int, int>> pairs;
    for (const auto& m : c.mutuals) {
        if (!ids.insert(m.id).second) d.push_back({m.line, 0, "duplicate id '" + m.id + "'"});
        int ia = ind_index(m.a), ib = ind_index(m.b);
        if (ia < 0 || ib < 0 || ia == ib) {
            d.push_back({m.line, 0, "mutual '" + m.id + "' must reference two distinct inductors"});
            mutuals_ok = false;
            continue;
        }
        if (!pairs.insert({std::min(ia, ib), std::max(ia, ib)}).second) {
            d.push_back({m.line, 0, "mutual '" + m.id + "' duplicates an inductor pair"});
            mutuals_ok = false;
        }
        double la = inds[ia]->inductance, lb = inds[ib]->inductance;
        if (!std::isfinite(m.inductance) || std::abs(m.inductance) > std::sqrt(std::max(la * lb, 0.0))) {
            d.push_back({m.line, 0, "passivity violated by mutual '" + m.id + "'"});
            mutuals_ok = false;
        }
    }
    if (mutuals_ok && !inds.empty() && !c.mutuals.empty()) {
        const int n = static_cast<int>(inds.size());
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n, n);
        for (int k = 0; k < n; ++k) L(k, k) = inds[k]->inductance;
        for (const auto& m : c.mutuals) {
            int ia = ind_index(m.a), ib = ind_index(m.b);
            L(ia, ib) += m.inductance;
            L(ib, ia) += m.inductance;
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() <= 1e-12 * es.eigenvalues().cwiseAbs().maxCoeff())
            d.push_back({0, 0, "inductance matrix L_b + M is not positive definite"});
    }
    return d;
}

std::string emit_netlist(const Circuit& circuit) {
    const Circuit c = canonicalize(circuit);
    std::ostringstream os;
    for (const auto& b : c.branches) {
        os << to_string(b.kind) << ' ' << b.id << ' ' << b.from << ' ' << b.to << ' ';
        switch (b.kind) {
            case BranchKind::capacitor: os << fmt_num(b.capacitance); break;
            case BranchKind::inductor:
                os << fmt_num(b.inductance);
                if (b.external_flux != 0.0) os << " flux=" << fmt_num(b.external_flux);
                break;
            case BranchKind::junction:
                os << fmt_num(b.ej);
                if (b.capacitance != 0.0) os << " cj=" << fmt_num(b.capacitance);
                break;
        }
        os << '\n';
    }
    for (const auto& m : c.mutuals) os << "mut " << m.id << ' ' << m.a << ' ' << m.b << ' ' << fmt_num(m.inductance) << '\n';
    for (const auto& [n, v] : c.charge_offsets) os << "qoff " << n << ' ' << fmt_num(v) << '\n';
    return os.str();
}

Circuit canonicalize(Circuit c) {
    std::sort(c.branches.begin(), c.branches.end(), [](const Branch& a, const Branch& b) { return id_less(a.id, b.id); });
    std::sort(c.mutuals.begin(), c.mutuals.end(), [](const Mutual& a, const Mutual& b) { return id_less(a.id, b.id); });
    refresh_nodes(c);
    return c;
}

}  // namespace qcirc
