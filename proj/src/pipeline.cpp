#include "qcirc/pipeline.hpp"

#include "qcirc/parallel.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qcirc {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::pair<std::string, std::string> split_parameter(const std::string& p) {
    auto colon = p.find(':');
    auto dot = p.rfind('.');
    if (colon == std::string::npos || dot == std::string::npos || dot < colon)
        throw std::invalid_argument("sweep parameter '" + p + "' must look like branch:<id>.flux or node:<id>.qoff");
    std::string kind = p.substr(0, colon), id = p.substr(colon + 1, dot - colon - 1), field = p.substr(dot + 1);
    if (kind == "branch" && field == "flux") return {"flux", id};
    if (kind == "node" && field == "qoff") return {"qoff", id};
    throw std::invalid_argument("unsupported sweep parameter '" + p + "'");
}

}  // namespace

std::string ObservableSpec::label() const { return std::string(to_string(op)) + ":" + mode; }

Method method_from_string(const std::string& s) {
    if (s == "brute") return Method::brute;
    if (s == "hier") return Method::hier;
    if (s == "hier+pt") return Method::hier_pt;
    throw std::invalid_argument("unknown method '" + s + "' (brute, hier, hier+pt)");
}

const char* to_string(Method m) {
    switch (m) {
        case Method::brute: return "brute";
        case Method::hier: return "hier";
        case Method::hier_pt: return "hier+pt";
    }
    return "?";
}

Circuit apply_parameter(const Circuit& c, const std::string& parameter, double value) {
    auto [field, id] = split_parameter(parameter);
    Circuit out = c;
    if (field == "flux") {
        for (auto& b : out.branches)
            if (b.id == id) {
                if (b.kind != BranchKind::inductor)
                    throw std::invalid_argument("sweep flux target '" + id + "' is not an inductor");
                b.external_flux = value;
                return out;
            }
        throw std::invalid_argument("sweep references unknown branch '" + id + "'");
    }
    if (id == ground_node || !std::binary_search(out.nodes.begin(), out.nodes.end(), id, id_less))
        throw std::invalid_argument("sweep references unknown node '" + id + "'");
    out.charge_offsets[id] = value;
    return out;
}

RunConfig config_from_json(const nlohmann::json& j, const std::string& base_dir) {
    RunConfig cfg;
    if (j.contains("netlist")) {
        std::filesystem::path p = j.at("netlist").get<std::string>();
        if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
        cfg.netlist_path = p.string();
        cfg.circuit = load_netlist(cfg.netlist_path);
    } else if (j.contains("netlist_text")) {
        cfg.circuit = parse_netlist(j.at("netlist_text").get<std::string>());
    }
    if (j.contains("transform")) {
        UserTransform ut;
        for (const auto& m : j.at("transform").at("modes")) {
            UserTransform::Row row;
            row.name = m.at("name").get<std::string>();
            row.kind = mode_kind_from_string(m.at("kind").get<std::string>());
            for (const auto& [node, v] : m.at("row").items())
                row.coeffs.emplace_back(node, v.is_string() ? parse_rational(v.get<std::string>()) : v.get<double>());
            ut.rows.push_back(std::move(row));
        }
        cfg.model.transform = ut;
    }
    if (j.contains("fluxoids"))
        for (const auto& [b, m] : j.at("fluxoids").items()) cfg.model.forest.fluxoids[b] = m.get<int>();
    if (j.contains("virtual_ground"))
        for (const auto& [node, vg] : j.at("virtual_ground").items())
            cfg.model.forest.virtual_ground[node] = vg.get<std::string>();
    if (j.contains("basis"))
        for (const auto& [mode, t] : j.at("basis").items()) cfg.model.truncation[mode] = t.get<int>();
    cfg.model.default_nu = j.value("default_nu", cfg.model.default_nu);
    cfg.model.default_q = j.value("default_q", cfg.model.default_q);
    if (j.contains("converge")) {
        const auto& c = j.at("converge");
        ConvergeSpec cs;
        cs.tol_ghz = c.value("tol_ghz", cs.tol_ghz);
        cs.max_steps = c.value("max_steps", cs.max_steps);
        if (c.contains("targets")) cs.targets = c.at("targets").get<std::vector<std::pair<int, int>>>();
        cfg.converge = cs;
    }
    if (j.contains("partition")) cfg.partition = partition_from_json(j.at("partition"));
    if (j.contains("corrections")) {
        cfg.energy_ceiling = j.at("corrections").value("energy_ceiling_ghz", 0.0);
        cfg.self_consistent = j.at("corrections").value("self_consistent", false);
    }
    if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        SweepSpec sw;
        sw.parameter = s.at("parameter").get<std::string>();
        sw.start = s.value("start", 0.0);
        sw.stop = s.value("stop", sw.start);
        sw.steps = s.value("steps", 1);
        if (sw.steps < 1) throw std::invalid_argument("sweep steps must be >= 1");
        split_parameter(sw.parameter);
        cfg.sweep = sw;
    }
    cfg.levels = j.value("levels", cfg.levels);
    if (cfg.levels < 1) throw std::invalid_argument("levels must be >= 1");
    if (j.contains("observables"))
        for (const auto& o : j.at("observables")) {
            auto s = o.get<std::string>();
            auto colon = s.find(':');
            if (colon == std::string::npos) throw std::invalid_argument("observable '" + s + "' must be op:mode");
            ObservableSpec os;
            os.op = op_type_from_string(s.substr(0, colon));
            if (os.op != OpType::flux && os.op != OpType::charge)
                throw std::invalid_argument("observable '" + s + "': only flux and charge are supported");
            os.mode = s.substr(colon + 1);
            cfg.observables.push_back(os);
        }
    cfg.absolute = j.value("absolute", false);
    cfg.lab_frame = j.value("lab_frame", false);
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        cfg.solver.tol = s.value("tol", cfg.solver.tol);
        cfg.solver.seed = s.value("seed", cfg.solver.seed);
        cfg.solver.max_matvec = s.value("max_matvec", cfg.solver.max_matvec);
    }
    if (j.contains("method")) cfg.method = method_from_string(j.at("method").get<std::string>());
    cfg.threads = j.value("threads", 0);
    cfg.dimension_cap = j.value("dimension_cap", cfg.dimension_cap);
    if (cfg.sweep) apply_parameter(cfg.circuit, cfg.sweep->parameter, cfg.sweep->start);
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in, nullptr, true, true);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config '" + path + "': " + e.what());
    }
    return config_from_json(j, std::filesystem::path(path).parent_path().string());
}

PointResult run_point(const RunConfig& cfg, const Circuit& c, const BasisSpec* basis, OperatorCache& cache,
                      int inner_threads) {
    PointResult pr;
    ModelOptions mo = cfg.model;
    if (basis)
        for (const auto& m : basis->modes) mo.truncation[m.name] = m.trunc;
    CircuitModel model = build_model(c, mo);
    pr.warnings = model.transform.warnings;
    pr.dimension = model.basis.dimension();

    std::vector<int> obs_modes;
    for (const auto& o : cfg.observables) {
        int k = model.transform.find(o.mode);
        if (k < 0) throw std::invalid_argument("observable references unknown mode '" + o.mode + "'");
        obs_modes.push_back(k);
    }
    auto frame_shift = [&](std::size_t i) {
        if (!cfg.lab_frame) return 0.0;
        int k = obs_modes[i];
        if (model.transform.kinds[k] != ModeKind::oscillator) return 0.0;
        return cfg.observables[i].op == OpType::flux ? model.transform.dPhi(k) : model.transform.dQ(k);
    };
    pr.observables.assign(cfg.observables.size(), std::vector<double>(cfg.levels, 0.0));

    if (cfg.method == Method::brute) {
        AssembledHamiltonian H = assemble(model.terms, model.basis, cache, cfg.dimension_cap, inner_threads);
        int k = static_cast<int>(std::min<long long>(cfg.levels, H.dim));
        if (k >= H.dim && H.dim > cfg.solver.dense_limit) k = static_cast<int>(H.dim - 1);
        Spectrum s = eigensolve_lowest(H.H, k, cfg.solver);
        pr.energies = s.values;
        pr.iterations = s.iterations;
        pr.converged = s.converged;
        for (std::size_t i = 0; i < cfg.observables.size(); ++i)
            for (int l = 0; l < k; ++l)
                pr.observables[i][l] =
                    expectation(obs_modes[i], {cfg.observables[i].op, 0.0}, s.vectors.col(l), model.basis, cache).real() +
                    frame_shift(i);
    } else {
        if (!cfg.partition) throw std::invalid_argument("hierarchical methods need a partition in the config");
        HierarchyOptions ho;
        ho.solver = cfg.solver;
        ho.levels = cfg.levels;
        ho.corrections = cfg.method == Method::hier_pt;
        ho.energy_ceiling = cfg.energy_ceiling;
        ho.self_consistent = cfg.self_consistent;
        ho.threads = inner_threads;
        HierarchyResult hr = iterate_levels(model, *cfg.partition, ho, cache);
        pr.energies = hr.spectrum.values;
        pr.iterations = hr.spectrum.iterations;
        pr.converged = hr.spectrum.converged;
        pr.reports = std::move(hr.reports);
        for (const auto& w : hr.warnings) pr.warnings.push_back(w);
        for (std::size_t i = 0; i < cfg.observables.size(); ++i)
            for (int l = 0; l < pr.energies.size(); ++l)
                pr.observables[i][l] = hr.expectation(obs_modes[i], {cfg.observables[i].op, 0.0}, l).real() + frame_shift(i);
    }
    if (!cfg.absolute && pr.energies.size() > 0) pr.energies.array() -= pr.energies(0);
    return pr;
}

bool SweepResult::ok() const {
    for (const auto& p : points)
        if (!p.error.empty()) return false;
    return true;
}

SweepResult run_sweep(const RunConfig& cfg) {
    SweepResult res;
    OperatorCache cache;
    const int n = cfg.sweep ? cfg.sweep->steps : 1;
    auto circuit_at = [&](int i) {
        return cfg.sweep ? apply_parameter(cfg.circuit, cfg.sweep->parameter, cfg.sweep->value(i)) : cfg.circuit;
    };

    std::optional<BasisSpec> basis;
    if (cfg.converge) {
        CircuitModel start = build_model(circuit_at(0), cfg.model);
        int k = 1;
        for (auto [a, b] : cfg.converge->targets) k = std::max({k, a + 1, b + 1});
        auto build = [&](const BasisSpec& b) {
            ModelOptions mo = cfg.model;
            for (const auto& m : b.modes) mo.truncation[m.name] = m.trunc;
            CircuitModel model = build_model(circuit_at(0), mo);
            AssembledHamiltonian H = assemble(model.terms, model.basis, cache, cfg.dimension_cap, cfg.threads);
            return eigensolve_lowest(H.H, k, cfg.solver);
        };
        ConvergeResult cr = converge_truncation(build, start.basis, cfg.converge->targets, cfg.converge->tol_ghz,
                                                cfg.converge->max_steps);
        basis = cr.basis;
        res.basis = cr.basis;
    } else {
        res.basis = build_model(circuit_at(0), cfg.model).basis;
    }

    res.points.resize(n);
    const int outer = std::min(resolve_threads(cfg.threads), n);
    const int inner = outer > 1 ? 1 : resolve_threads(cfg.threads);
    parallel_for(n, outer, [&](int i) {
        PointResult pr;
        try {
            pr = run_point(cfg, circuit_at(i), basis ? &*basis : nullptr, cache, inner);
        } catch (const std::exception& e) {
            pr = PointResult{};
            pr.error = e.what();
            pr.converged = false;
        }
        pr.index = i;
        pr.parameter = cfg.sweep ? cfg.sweep->value(i) : 0.0;
        res.points[i] = std::move(pr);
    });
    return res;
}

void write_csv(std::ostream& os, const RunConfig& cfg, const SweepResult& r) {
    os << "# qcirc-sweep v1\n";
    os << "# method=" << to_string(cfg.method) << " energies=" << (cfg.absolute ? "absolute" : "relative")
       << " frame=" << (cfg.lab_frame ? "lab" : "displaced") << "\n";
    os << "index,parameter";
    for (int l = 0; l < cfg.levels; ++l) os << ",E" << l;
    for (const auto& o : cfg.observables)
        for (int l = 0; l < cfg.levels; ++l) os << "," << o.label() << "@" << l;
    os << ",dimension,iterations,converged,error\n";
    for (const auto& p : r.points) {
        os << p.index << "," << fmt(p.parameter);
        for (int l = 0; l < cfg.levels; ++l) os << "," << (l < p.energies.size() ? fmt(p.energies(l)) : "");
        for (std::size_t i = 0; i < cfg.observables.size(); ++i)
            for (int l = 0; l < cfg.levels; ++l)
                os << "," << (i < p.observables.size() && l < p.energies.size() ? fmt(p.observables[i][l]) : "");
        std::string err = p.error;
        for (auto& ch : err)
            if (ch == ',' || ch == '\n') ch = ';';
        os << "," << p.dimension << "," << p.iterations << "," << (p.converged ? 1 : 0) << "," << err << "\n";
    }
}

void write_json_lines(std::ostream& os, const RunConfig& cfg, const SweepResult& r) {
    for (const auto& p : r.points) {
        nlohmann::json j;
        j["schema"] = "qcirc-sweep v1";
        j["index"] = p.index;
        j["parameter"] = std::stod(fmt(p.parameter));
        std::vector<double> e;
        for (int l = 0; l < p.energies.size(); ++l) e.push_back(std::stod(fmt(p.energies(l))));
        j["energies_ghz"] = e;
        nlohmann::json obs = nlohmann::json::object();
        for (std::size_t i = 0; i < cfg.observables.size() && i < p.observables.size(); ++i) {
            std::vector<double> v;
            for (int l = 0; l < p.energies.size(); ++l) v.push_back(std::stod(fmt(p.observables[i][l])));
            obs[cfg.observables[i].label()] = v;
        }
        j["observables"] = obs;
        j["dimension"] = p.dimension;
        j["iterations"] = p.iterations;
        j["converged"] = p.converged;
        if (!p.error.empty()) j["error"] = p.error;
        if (!p.warnings.empty()) j["warnings"] = p.warnings;
        os << j.dump() << "\n";
    }
}

nlohmann::json topology_json(const CircuitModel& m) {
    nlohmann::json j;
    j["nodes"] = m.circuit.nodes;
    j["tree"] = m.forest.tree_branches;
    nlohmann::json isl = nlohmann::json::array();
    for (const auto& i : m.forest.islands) isl.push_back({{"nodes", i.nodes}, {"virtual_ground", i.virtual_ground}});
    j["islands"] = isl;
    nlohmann::json cl = nlohmann::json::array();
    for (const auto& c : m.forest.closures) {
        nlohmann::json path = nlohmann::json::array();
        for (const auto& s : c.path) path.push_back({{"branch", s.branch}, {"sign", s.sign}});
        cl.push_back({{"branch", c.branch}, {"path", path}, {"fluxoid", c.fluxoid}});
    }
    j["closures"] = cl;
    nlohmann::json bm = nlohmann::json::array();
    for (std::size_t r = 0; r < m.branches.branch_ids.size(); ++r) {
        std::vector<int> row(m.branches.R.cols());
        for (Eigen::Index c = 0; c < m.branches.R.cols(); ++c) row[c] = m.branches.R(r, c);
        bm.push_back({{"branch", m.branches.branch_ids[r]}, {"row", row}});
    }
    j["branch_matrix"] = bm;
    nlohmann::json modes = nlohmann::json::array();
    const auto& t = m.transform;
    for (std::size_t k = 0; k < t.size(); ++k) {
        std::vector<double> row(t.R.cols()), pattern(t.Rinv.rows());
        for (Eigen::Index c = 0; c < t.R.cols(); ++c) row[c] = t.R(k, c);
        for (Eigen::Index r = 0; r < t.Rinv.rows(); ++r) pattern[r] = t.Rinv(r, k);
        modes.push_back({{"name", t.names[k]},
                         {"kind", to_string(t.kinds[k])},
                         {"flux_row", row},
                         {"node_pattern", pattern},
                         {"frequency_ghz", t.freq(k)},
                         {"impedance_ohm", t.Z(k)},
                         {"z", t.z(k)},
                         {"charge_offset", t.dQ(k)},
                         {"flux_offset", t.dPhi(k)}});
    }
    j["modes"] = modes;
    nlohmann::json jd = nlohmann::json::array();
    for (const auto& d : m.junctions) {
        nlohmann::json a = nlohmann::json::object(), n = nlohmann::json::object();
        for (auto [k, v] : d.a) a[t.names[k]] = v;
        for (auto [k, v] : d.n) n[t.names[k]] = v;
        jd.push_back({{"branch", d.branch}, {"ej_ghz", d.ej}, {"oscillator", a}, {"josephson", n}, {"phase", d.dphi}});
    }
    j["junctions"] = jd;
    j["warnings"] = t.warnings;
    j["regularized_nodes"] = m.nodes.regularized_nodes;
    return j;
}

}  // namespace qcirc
