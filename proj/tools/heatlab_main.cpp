// heatlab command-line front end: configure a problem (preset or expression
// fields), run one computation, write results + manifest.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>

#include "heatlab/cli_run.hpp"
#include "heatlab/errors.hpp"

using heatlab::RunConfig;
using nlohmann::json;

namespace {

json parse_point(const std::string& s) {
    json arr = json::array();
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) arr.push_back(std::stod(tok));
    return arr;
}

struct CommonArgs {
    std::string config_file;
    std::string preset;
    std::string out_dir = "heatlab-out";
    std::uint64_t seed = 0;
    int threads = 0;
    double c = 1.0, omega = 1.0, rho = 1.0, b1 = 0.4, b2 = 0.25;
    double c1 = 0.5, c2 = -0.5, width = 0.25, center = 2.0;
    int dim = 1, fiber_dim = 1;
    std::string xi;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
    cmd->add_option("--config", a.config_file, "JSON config file (overridden by flags)");
    cmd->add_option("--preset", a.preset,
                    "problem preset: flat, polar-flat, constant-potential, harmonic, "
                    "two-well, constant-abelian, abelian-antihermitian, nonabelian-su2, "
                    "sphere-patch, free");
    cmd->add_option("--out", a.out_dir, "output directory");
    cmd->add_option("--seed", a.seed, "RNG seed");
    cmd->add_option("--threads", a.threads, "worker threads (default HEATLAB_THREADS)");
    cmd->add_option("--c", a.c, "constant potential value");
    cmd->add_option("--omega", a.omega, "harmonic frequency");
    cmd->add_option("--rho", a.rho, "sphere radius");
    cmd->add_option("--dim", a.dim, "dimension (flat/constant presets)");
    cmd->add_option("--fiber-dim", a.fiber_dim, "fiber dimension");
    cmd->add_option("--xi", a.xi, "comma-separated constant connection components");
    cmd->add_option("--c1", a.c1, "two-well left plateau");
    cmd->add_option("--c2", a.c2, "two-well right plateau");
    cmd->add_option("--width", a.width, "two-well transition width");
    cmd->add_option("--b1", a.b1, "non-Abelian connection coefficient 1");
    cmd->add_option("--b2", a.b2, "non-Abelian connection coefficient 2");
}

RunConfig base_config(const CommonArgs& a, const std::string& subcommand) {
    RunConfig cfg;
    if (!a.config_file.empty()) {
        std::ifstream in(a.config_file);
        if (!in) throw heatlab::ConfigError("cannot open config " + a.config_file);
        cfg = RunConfig::from_json(json::parse(in));
    }
    cfg.subcommand = subcommand;
    cfg.output_dir = a.out_dir;
    cfg.seed = a.seed;
    cfg.threads = a.threads;
    if (!a.preset.empty()) {
        json prob;
        prob["preset"] = a.preset;
        prob["c"] = a.c;
        prob["omega"] = a.omega;
        prob["rho"] = a.rho;
        prob["dim"] = a.dim;
        prob["fiber_dim"] = a.fiber_dim;
        prob["c1"] = a.c1;
        prob["c2"] = a.c2;
        prob["width"] = a.width;
        prob["b1"] = a.b1;
        prob["b2"] = a.b2;
        if (!a.xi.empty()) prob["xi"] = parse_point(a.xi);
        cfg.problem = prob;
    }
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heatlab: local heat-kernel laboratory"};
    app.require_subcommand(1);

    CommonArgs a;
    std::string x_str, y_str, z_str, x0_str, v0_str, suite = "fast", report_in;
    int k_order = 3, n_trunc = 8, steps = 128, kmin = -8, kmax = 3;
    long paths = 200000;
    double tau = 0.5;
    bool diagonal = false, vanvleck = true;

    auto* geo = app.add_subcommand("geodesic", "solve a geodesic BVP or IVP");
    add_common(geo, a);
    geo->add_option("--x", x_str, "endpoint (comma separated)");
    geo->add_option("--y", y_str, "start point");
    geo->add_option("--x0", x0_str, "IVP start point");
    geo->add_option("--v0", v0_str, "IVP initial velocity");

    auto* syn = app.add_subcommand("synge", "world function and Van Vleck determinant");
    add_common(syn, a);
    syn->add_option("--x", x_str)->required();
    syn->add_option("--y", y_str)->required();
    syn->add_flag("--vanvleck,!--no-vanvleck", vanvleck, "compute the Van Vleck determinant");

    auto* sdw = app.add_subcommand("sdw", "Seeley-DeWitt coefficients");
    add_common(sdw, a);
    sdw->add_option("--k", k_order, "highest order");
    sdw->add_option("--x", x_str)->required();
    sdw->add_option("--y", y_str);
    sdw->add_flag("--diagonal", diagonal, "diagonal values at x");

    auto* psi = app.add_subcommand("psi", "Psi special functions");
    add_common(psi, a);
    psi->add_option("--k", k_order, "Psi index")->required();
    psi->add_option("--x", x_str)->required();
    psi->add_option("--y", y_str)->required();
    psi->add_option("--N", n_trunc, "series truncation");
    psi->add_option("--tau", tau, "also evaluate the kernel sum at tau");
    psi->add_option("--kmin", kmin);
    psi->add_option("--kmax", kmax);

    auto* mc = app.add_subcommand("kernel-mc", "Monte Carlo kernel estimate");
    add_common(mc, a);
    mc->add_option("--x", x_str)->required();
    mc->add_option("--y", y_str)->required();
    mc->add_option("--tau", tau)->required();
    mc->add_option("--paths", paths);
    mc->add_option("--steps", steps);

    auto* sc = app.add_subcommand("scaling", "rescaling identity, coupled seeds");
    add_common(sc, a);
    sc->add_option("--x", x_str)->required();
    sc->add_option("--y", y_str)->required();
    sc->add_option("--z", z_str);
    sc->add_option("--tau", tau)->required();
    sc->add_option("--paths", paths);
    sc->add_option("--steps", steps);

    auto* ver = app.add_subcommand("verify", "run the verification battery");
    add_common(ver, a);
    ver->add_option("--suite", suite, "all | fast");

    auto* rep = app.add_subcommand("report", "re-ingest a result file");
    add_common(rep, a);
    rep->add_option("--in", report_in, "result/report JSON file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        RunConfig cfg;
        json p;
        if (geo->parsed()) {
            cfg = base_config(a, "geodesic");
            if (!x0_str.empty()) {
                p["x0"] = parse_point(x0_str);
                p["v0"] = parse_point(v0_str);
            } else {
                p["x"] = parse_point(x_str);
                p["y"] = parse_point(y_str);
            }
        } else if (syn->parsed()) {
            cfg = base_config(a, "synge");
            p["x"] = parse_point(x_str);
            p["y"] = parse_point(y_str);
            p["vanvleck"] = vanvleck;
        } else if (sdw->parsed()) {
            cfg = base_config(a, "sdw");
            p["k"] = k_order;
            p["x"] = parse_point(x_str);
            if (!y_str.empty()) p["y"] = parse_point(y_str);
            p["diagonal"] = diagonal;
        } else if (psi->parsed()) {
            cfg = base_config(a, "psi");
            p["k"] = k_order;
            p["N"] = n_trunc;
            p["x"] = parse_point(x_str);
            p["y"] = parse_point(y_str);
            if (psi->count("--tau")) {
                p["tau"] = tau;
                p["kmin"] = kmin;
                p["kmax"] = kmax;
            }
        } else if (mc->parsed()) {
            cfg = base_config(a, "kernel-mc");
            p["x"] = parse_point(x_str);
            p["y"] = parse_point(y_str);
            p["tau"] = tau;
            p["paths"] = paths;
            p["steps"] = steps;
        } else if (sc->parsed()) {
            cfg = base_config(a, "scaling");
            p["x"] = parse_point(x_str);
            p["y"] = parse_point(y_str);
            if (!z_str.empty()) p["z"] = parse_point(z_str);
            p["tau"] = tau;
            p["paths"] = paths;
            p["steps"] = steps;
        } else if (ver->parsed()) {
            cfg = base_config(a, "verify");
            p["suite"] = suite;
        } else if (rep->parsed()) {
            cfg = base_config(a, "report");
            p["in"] = report_in;
        }
        for (auto& [key, value] : p.items()) cfg.params[key] = value;
        int code = heatlab::run(cfg);
        if (code == 0)
            std::cout << "ok: results in " << cfg.output_dir << "\n";
        return code;
    } catch (const heatlab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const heatlab::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
}
