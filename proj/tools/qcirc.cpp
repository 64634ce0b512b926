#include "qcirc/pipeline.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"qcirc: circuit quantization, spectra and bias sweeps"};
    std::string netlist, config, method, out, format = "csv", corrections;
    int levels = 0, threads = -1;
    long long seed = -1;
    bool dump_topology = false, dump_terms = false;
    app.add_option("--netlist", netlist, "netlist file (overrides the config entry)");
    app.add_option("--config", config, "JSON run configuration");
    app.add_option("--method", method, "brute | hier | hier+pt")->check(CLI::IsMember({"brute", "hier", "hier+pt"}));
    app.add_option("--levels", levels, "number of eigenvalues per point")->check(CLI::PositiveNumber);
    app.add_option("--out", out, "output file (default stdout)");
    app.add_option("--format", format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
    app.add_flag("--dump-topology", dump_topology, "print forest, transform and junction phases as JSON and exit");
    app.add_flag("--dump-terms", dump_terms, "print the Hamiltonian term list as JSON and exit");
    app.add_option("--corrections-report", corrections, "write perturbative correction reports (JSON) here");
    app.add_option("--seed", seed, "eigensolver start-vector seed");
    app.add_option("--threads", threads, "worker threads (0 = hardware)");
    CLI11_PARSE(app, argc, argv);

    try {
        if (netlist.empty() && config.empty()) throw std::invalid_argument("need --netlist or --config");
        qcirc::RunConfig cfg = config.empty() ? qcirc::RunConfig{} : qcirc::load_config(config);
        if (!netlist.empty()) {
            cfg.netlist_path = netlist;
            cfg.circuit = qcirc::load_netlist(netlist);
        }
        if (!method.empty()) cfg.method = qcirc::method_from_string(method);
        if (levels > 0) cfg.levels = levels;
        if (seed >= 0) cfg.solver.seed = static_cast<unsigned>(seed);
        if (threads >= 0) cfg.threads = threads;

        std::ofstream file;
        if (!out.empty()) {
            file.open(out);
            if (!file) throw std::runtime_error("cannot write '" + out + "'");
        }
        std::ostream& os = out.empty() ? std::cout : file;

        if (dump_topology || dump_terms) {
            qcirc::Circuit c =
                cfg.sweep ? qcirc::apply_parameter(cfg.circuit, cfg.sweep->parameter, cfg.sweep->start) : cfg.circuit;
            auto model = qcirc::build_model(c, cfg.model);
            nlohmann::json j;
            if (dump_topology) j["topology"] = qcirc::topology_json(model);
            if (dump_terms) {
                j["dimension"] = model.basis.dimension();
                j["terms"] = qcirc::terms_to_json(model.terms, model.basis);
            }
            os << j.dump(2) << "\n";
            return 0;
        }

        qcirc::SweepResult res = qcirc::run_sweep(cfg);
        if (format == "json")
            qcirc::write_json_lines(os, cfg, res);
        else
            qcirc::write_csv(os, cfg, res);

        if (!corrections.empty()) {
            nlohmann::json arr = nlohmann::json::array();
            for (const auto& p : res.points) {
                nlohmann::json reps = nlohmann::json::array();
                for (const auto& r : p.reports) reps.push_back(r.to_json());
                arr.push_back({{"index", p.index}, {"parameter", p.parameter}, {"reports", reps}});
            }
            std::ofstream rf(corrections);
            if (!rf) throw std::runtime_error("cannot write '" + corrections + "'");
            rf << arr.dump(2) << "\n";
        }
        for (const auto& p : res.points) {
            if (!p.error.empty()) std::cerr << "point " << p.index << ": " << p.error << "\n";
            for (const auto& w : p.warnings) std::cerr << "point " << p.index << ": warning: " << w << "\n";
        }
        return res.ok() ? 0 : 2;
    } catch (const std::exception& e) {
        std::cerr << "qcirc: " << e.what() << "\n";
        return 1;
    }
}
