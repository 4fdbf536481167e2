#include "heatlab/cli_run.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "heatlab/expression.hpp"
#include "heatlab/feynman_kac.hpp"
#include "heatlab/presets.hpp"
#include "heatlab/psi.hpp"
#include "heatlab/synge.hpp"
#include "heatlab/verification.hpp"

namespace heatlab {

namespace {

using nlohmann::json;

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

Vec vec_from_json(const json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of numbers");
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

json vec_to_json(const Vec& v) {
    json j = json::array();
    for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
    return j;
}

double param(const json& p, const std::string& key, double fallback) {
    return p.contains(key) ? p.at(key).get<double>() : fallback;
}

// --- expression-field assembly -------------------------------------------

ScalarField parse_scalar(const std::string& src, int d) {
    auto fe = std::make_shared<FieldExpression>(FieldExpression::parse(src, d));
    return fe->field();
}

/// Entry: string (real expression) or {"re": expr, "im": expr}.
std::pair<ScalarField, ScalarField> parse_entry(const json& j, int d) {
    if (j.is_string()) return {parse_scalar(j.get<std::string>(), d), ScalarField()};
    if (j.is_object()) {
        ScalarField re =
            j.contains("re") ? parse_scalar(j.at("re").get<std::string>(), d) : ScalarField();
        ScalarField im =
            j.contains("im") ? parse_scalar(j.at("im").get<std::string>(), d) : ScalarField();
        return {re, im};
    }
    throw ConfigError("field entry must be an expression string or {re, im}");
}

MatrixField parse_matrix_field(const json& j, int d, int m) {
    if (j.is_string()) {
        // scalar expression times identity
        ScalarField s = parse_scalar(j.get<std::string>(), d);
        return [s, m](const Vec& x) { return CMat(s(x) * CMat::Identity(m, m)); };
    }
    if (!j.is_array() || static_cast<int>(j.size()) != m)
        throw ArityError("matrix field must be scalar or an m x m array (m = " +
                         std::to_string(m) + ")");
    std::vector<std::vector<std::pair<ScalarField, ScalarField>>> entries(m);
    for (int i = 0; i < m; ++i) {
        if (!j[i].is_array() || static_cast<int>(j[i].size()) != m)
            throw ArityError("matrix field row " + std::to_string(i) + " must have " +
                             std::to_string(m) + " entries");
        for (int k = 0; k < m; ++k) entries[i].push_back(parse_entry(j[i][k], d));
    }
    return [entries, m](const Vec& x) {
        CMat out(m, m);
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) {
                const auto& [re, im] = entries[i][k];
                out(i, k) = Complex(re ? re(x) : 0.0, im ? im(x) : 0.0);
            }
        return out;
    };
}

LaplaceProblem build_expression_problem(const json& spec) {
    const int d = spec.at("dim").get<int>();
    const int m = spec.contains("fiber_dim") ? spec.at("fiber_dim").get<int>() : 1;
    LaplaceProblem p;
    p.dim = d;
    p.fiber_dim = m;
    p.name = spec.contains("name") ? spec.at("name").get<std::string>() : "expression";

    const json& g = spec.at("metric_inv");
    if (!g.is_array() || static_cast<int>(g.size()) != d)
        throw ArityError("metric_inv must be a d x d array of expressions");
    std::vector<std::vector<ScalarField>> gf(d);
    for (int i = 0; i < d; ++i) {
        if (!g[i].is_array() || static_cast<int>(g[i].size()) != d)
            throw ArityError("metric_inv row " + std::to_string(i) + " must have " +
                             std::to_string(d) + " entries");
        for (int k = 0; k < d; ++k)
            gf[i].push_back(parse_scalar(g[i][k].get<std::string>(), d));
    }
    p.metric_inv = [gf, d](const Vec& x) {
        Mat out(d, d);
        for (int i = 0; i < d; ++i)
            for (int k = 0; k < d; ++k) out(i, k) = gf[i][k](x);
        return out;
    };

    if (spec.contains("potential")) p.potential = parse_matrix_field(spec.at("potential"), d, m);
    if (spec.contains("connection")) {
        const json& c = spec.at("connection");
        if (!c.is_array() || static_cast<int>(c.size()) != d)
            throw ArityError("connection must supply one matrix per coordinate axis");
        std::vector<MatrixField> comps;
        for (int mu = 0; mu < d; ++mu) comps.push_back(parse_matrix_field(c[mu], d, m));
        p.connection = [comps, d](const Vec& x) {
            std::vector<CMat> Bs(d);
            for (int mu = 0; mu < d; ++mu) Bs[mu] = comps[mu](x);
            return Bs;
        };
    }

    const json& box = spec.at("chart_domain");
    p.chart_domain.lo = vec_from_json(box.at("lo"));
    p.chart_domain.hi = vec_from_json(box.at("hi"));
    p.validate();
    return p;
}

}  // namespace

json RunConfig::to_json() const {
    json j;
    j["subcommand"] = subcommand;
    j["problem"] = problem;
    j["params"] = params;
    j["output_dir"] = output_dir;
    j["seed"] = seed;
    j["threads"] = threads;
    return j;
}

RunConfig RunConfig::from_json(const json& j) {
    RunConfig c;
    c.subcommand = j.at("subcommand").get<std::string>();
    if (j.contains("problem")) c.problem = j.at("problem");
    if (j.contains("params")) c.params = j.at("params");
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
    return c;
}

LaplaceProblem build_problem(const json& spec) {
    if (spec.is_null()) throw ConfigError("no problem specified");
    if (!spec.contains("preset")) return build_expression_problem(spec);
    const std::string name = spec.at("preset").get<std::string>();
    if (name == "flat")
        return presets::flat(static_cast<int>(param(spec, "dim", 1)),
                             static_cast<int>(param(spec, "fiber_dim", 1)));
    if (name == "polar-flat") return presets::polar_flat();
    if (name == "constant-potential")
        return presets::constant_potential(param(spec, "c", 1.0),
                                           static_cast<int>(param(spec, "dim", 1)),
                                           static_cast<int>(param(spec, "fiber_dim", 1)));
    if (name == "harmonic") return presets::harmonic(param(spec, "omega", 1.0));
    if (name == "two-well")
        return presets::two_well(param(spec, "c1", 0.5), param(spec, "c2", -0.5),
                                 param(spec, "width", 0.25), param(spec, "center", 2.0));
    if (name == "constant-abelian")
        return presets::constant_abelian(vec_from_json(spec.at("xi")), param(spec, "c", 0.0),
                                         static_cast<int>(param(spec, "fiber_dim", 1)));
    if (name == "abelian-antihermitian")
        return presets::abelian_antihermitian(vec_from_json(spec.at("xi")),
                                              param(spec, "c", 0.0));
    if (name == "nonabelian-su2")
        return presets::nonabelian_su2(param(spec, "b1", 0.4), param(spec, "b2", 0.25));
    if (name == "sphere-patch") return presets::sphere_patch(param(spec, "rho", 1.0));
    throw ConfigError("unknown preset '" + name + "'");
}

FlatProblem build_flat_problem(const json& spec) {
    if (spec.is_null()) throw ConfigError("no problem specified");
    if (spec.contains("preset")) {
        const std::string name = spec.at("preset").get<std::string>();
        if (name == "free" || name == "flat")
            return presets::free_flat(static_cast<int>(param(spec, "dim", 1)),
                                      static_cast<int>(param(spec, "fiber_dim", 1)));
        if (name == "harmonic") return presets::harmonic_flat(param(spec, "omega", 1.0));
        if (name == "constant-abelian")
            return presets::constant_abelian_flat(vec_from_json(spec.at("xi")),
                                                  param(spec, "c", 0.0),
                                                  static_cast<int>(param(spec, "fiber_dim", 1)));
        if (name == "constant-potential") {
            Vec xi = Vec::Zero(static_cast<int>(param(spec, "dim", 1)));
            return presets::constant_abelian_flat(xi * 0.0, param(spec, "c", 1.0), 1);
        }
        if (name == "two-well")
            return presets::two_well_flat(param(spec, "c1", 0.5), param(spec, "c2", -0.5),
                                          param(spec, "width", 0.25),
                                          param(spec, "center", 2.0));
        throw ConfigError("preset '" + name + "' has no flat-space extension");
    }
    // expression problem on a chart, extended as-is
    return presets::extend(build_problem(spec));
}

json matrix_to_json(const CMat& m) {
    json data = json::array();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j)
            data.push_back(json::array({m(i, j).real(), m(i, j).imag()}));
    json out;
    out["rows"] = m.rows();
    out["cols"] = m.cols();
    out["data"] = data;  // row-major [re, im] pairs
    return out;
}

CMat matrix_from_json(const json& j) {
    const int r = j.at("rows").get<int>();
    const int c = j.at("cols").get<int>();
    CMat m(r, c);
    const json& data = j.at("data");
    if (static_cast<int>(data.size()) != r * c)
        throw ConfigError("matrix data size mismatch");
    for (int i = 0; i < r; ++i)
        for (int k = 0; k < c; ++k) {
            const json& e = data[i * c + k];
            m(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
        }
    return m;
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << content;
}

json report_to_json(const CheckReport& r) {
    json j;
    j["check_id"] = r.check_id;
    j["quantities"] = r.quantities;  // std::map: keys serialized in sorted order
    j["tolerance"] = r.tolerance;
    j["passed"] = r.passed;
    return j;
}

std::string render_report_table(const json& report) {
    std::ostringstream os;
    os << "check                                   status   tolerance    residual-ish\n";
    os << "---------------------------------------------------------------------------\n";
    for (const auto& c : report.at("checks")) {
        std::string id = c.at("check_id").get<std::string>();
        id.resize(39, ' ');
        os << id << " " << (c.at("passed").get<bool>() ? "PASS  " : "FAIL  ");
        std::ostringstream tol;
        tol << c.at("tolerance").get<double>();
        std::string t = tol.str();
        t.resize(12, ' ');
        os << "  " << t;
        const auto& q = c.at("quantities");
        if (q.contains("residual")) os << " " << q.at("residual").get<double>();
        else if (q.contains("max_scaled_residual"))
            os << " " << q.at("max_scaled_residual").get<double>();
        else if (q.contains("max_err")) os << " " << q.at("max_err").get<double>();
        os << "\n";
    }
    os << (report.at("all_passed").get<bool>() ? "ALL CHECKS PASSED\n" : "FAILURES PRESENT\n");
    return os.str();
}

int dispatch(const RunConfig& config, json& result, json& manifest_extra,
             std::string& result_csv) {
    const json& p = config.params;

    if (config.subcommand == "geodesic") {
        LaplaceProblem problem = build_problem(config.problem);
        GeomOptions gopt;
        Geodesic geo;
        if (p.contains("v0"))
            geo = geodesic_ivp(problem, vec_from_json(p.at("x0")), vec_from_json(p.at("v0")),
                               gopt);
        else
            geo = geodesic_bvp(problem, vec_from_json(p.at("y")), vec_from_json(p.at("x")),
                               gopt);
        result["energy"] = geo.energy;
        result["v0"] = vec_to_json(geo.v0);
        result["start"] = vec_to_json(geo.start);
        result["end"] = vec_to_json(geo.end);
        json knots = json::array();
        std::ostringstream csv;
        csv << "lambda";
        for (int i = 0; i < problem.dim; ++i) csv << ",pos" << i + 1;
        for (int i = 0; i < problem.dim; ++i) csv << ",vel" << i + 1;
        csv << "\n";
        for (const auto& k : geo.knots) {
            knots.push_back(json{{"lambda", k.lambda},
                                 {"pos", vec_to_json(k.pos)},
                                 {"vel", vec_to_json(k.vel)}});
            csv << k.lambda;
            for (int i = 0; i < problem.dim; ++i) csv << "," << k.pos[i];
            for (int i = 0; i < problem.dim; ++i) csv << "," << k.vel[i];
            csv << "\n";
        }
        result["knots"] = knots;
        result_csv = csv.str();
        return 0;
    }

    if (config.subcommand == "synge") {
        LaplaceProblem problem = build_problem(config.problem);
        SyngeOptions sopt;
        Vec x = vec_from_json(p.at("x")), y = vec_from_json(p.at("y"));
        bool with_vv = p.contains("vanvleck") ? p.at("vanvleck").get<bool>() : true;
        SyngeData sd = with_vv ? synge_full(problem, x, y, sopt)
                               : world_function(problem, x, y, sopt);
        result["sigma"] = sd.sigma;
        result["sigma_lower"] = vec_to_json(sd.sigma_lower);
        result["sigma_upper"] = vec_to_json(sd.sigma_upper);
        if (with_vv) result["vanvleck"] = sd.vanvleck;
        return 0;
    }

    if (config.subcommand == "sdw") {
        LaplaceProblem problem = build_problem(config.problem);
        SdwOptions opt;
        if (p.contains("max_evals")) opt.max_evals = p.at("max_evals").get<long>();
        SdwEngine eng(problem, opt);
        const int K = p.contains("k") ? p.at("k").get<int>() : opt.k_max;
        json coeffs = json::array();
        std::ostringstream csv;
        csv << "k,i,j,re,im\n";
        if (p.contains("diagonal") && p.at("diagonal").get<bool>()) {
            Vec x = vec_from_json(p.at("x"));
            auto diag = eng.diagonal(x, K);
            for (int k = 0; k <= K; ++k) {
                coeffs.push_back(matrix_to_json(diag[k]));
                for (int i = 0; i < diag[k].rows(); ++i)
                    for (int j = 0; j < diag[k].cols(); ++j)
                        csv << k << "," << i << "," << j << "," << diag[k](i, j).real()
                            << "," << diag[k](i, j).imag() << "\n";
            }
        } else {
            Vec x = vec_from_json(p.at("x")), y = vec_from_json(p.at("y"));
            SdwTable table = eng.coefficients(x, y, K);
            result["stencil_width"] = table.stencil_width;
            result["transport_tol"] = table.transport_tol;
            for (int k = 0; k <= K; ++k) {
                coeffs.push_back(matrix_to_json(table.coeffs[k]));
                for (int i = 0; i < table.coeffs[k].rows(); ++i)
                    for (int j = 0; j < table.coeffs[k].cols(); ++j)
                        csv << k << "," << i << "," << j << ","
                            << table.coeffs[k](i, j).real() << ","
                            << table.coeffs[k](i, j).imag() << "\n";
            }
        }
        result["coeffs"] = coeffs;
        result["transport_evals"] = eng.evals();
        result_csv = csv.str();
        return 0;
    }

    if (config.subcommand == "psi") {
        LaplaceProblem problem = build_problem(config.problem);
        PsiOptions popt;
        std::shared_ptr<CoefficientSource> source;
        std::string preset =
            config.problem.contains("preset") ? config.problem.at("preset").get<std::string>()
                                              : "";
        const int N = p.contains("N") ? p.at("N").get<int>() : 8;
        SdwEngine* transport = nullptr;
        std::unique_ptr<SdwEngine> transport_holder;
        if (preset == "flat" || preset == "free") {
            source = std::make_shared<ConstantPotentialSource>(problem.dim, problem.fiber_dim,
                                                               Complex(0.0, 0.0));
        } else if (preset == "constant-potential") {
            source = std::make_shared<ConstantPotentialSource>(
                problem.dim, problem.fiber_dim, Complex(param(config.problem, "c", 1.0), 0.0));
        } else {
            if (N > 3)
                throw ConfigError("psi: transport coefficient source supports N <= 3; use a "
                                  "constant-potential preset for larger N");
            transport_holder = std::make_unique<SdwEngine>(problem, popt.sdw);
            transport = transport_holder.get();
            source = std::make_shared<TransportSource>(*transport);
        }
        PsiEngine eng(problem, source, popt);
        Vec x = vec_from_json(p.at("x")), y = vec_from_json(p.at("y"));
        const int k = p.at("k").get<int>();
        PsiValue pv = eng.psi(k, x, y, N);
        result["k"] = k;
        result["N"] = N;
        result["value"] = matrix_to_json(pv.value);
        result["tail_estimate"] = pv.tail_estimate;
        result["truncation_warning"] = pv.truncation_warning;
        if (p.contains("tau")) {
            const double tau = p.at("tau").get<double>();
            const int kmin = p.contains("kmin") ? p.at("kmin").get<int>() : -8;
            const int kmax = p.contains("kmax") ? p.at("kmax").get<int>() : std::min(N, 3);
            result["kernel"] = matrix_to_json(eng.kernel_from_psi(x, y, tau, kmin, kmax));
        }
        return 0;
    }

    if (config.subcommand == "kernel-mc") {
        FlatProblem problem = build_flat_problem(config.problem);
        McParams mp;
        mp.n_paths = static_cast<long>(param(p, "paths", 200000));
        mp.n_steps = static_cast<int>(param(p, "steps", 128));
        mp.seed = config.seed;
        mp.threads = config.threads;
        Vec x = vec_from_json(p.at("x")), y = vec_from_json(p.at("y"));
        MCEstimate est = kernel_mc(problem, x, y, p.at("tau").get<double>(), mp);
        result["mean"] = matrix_to_json(est.mean);
        json se = json::array();
        for (int i = 0; i < est.stderr_mat.rows(); ++i)
            for (int j = 0; j < est.stderr_mat.cols(); ++j)
                se.push_back(est.stderr_mat(i, j));
        result["stderr"] = se;
        result["n_paths"] = est.n_paths;
        result["n_steps"] = est.n_steps;
        result["seed"] = est.seed;
        result["tau"] = est.tau;
        std::ostringstream csv;
        csv << "i,j,mean_re,mean_im,stderr\n";
        for (int i = 0; i < est.mean.rows(); ++i)
            for (int j = 0; j < est.mean.cols(); ++j)
                csv << i << "," << j << "," << est.mean(i, j).real() << ","
                    << est.mean(i, j).imag() << "," << est.stderr_mat(i, j) << "\n";
        result_csv = csv.str();
        return 0;
    }

    if (config.subcommand == "scaling") {
        FlatProblem problem = build_flat_problem(config.problem);
        McParams mp;
        mp.n_paths = static_cast<long>(param(p, "paths", 20000));
        mp.n_steps = static_cast<int>(param(p, "steps", 64));
        mp.seed = config.seed;
        mp.threads = config.threads;
        Vec x = vec_from_json(p.at("x")), y = vec_from_json(p.at("y"));
        Vec z = p.contains("z") ? vec_from_json(p.at("z")) : x;
        ScalingCheckResult res = scaling_check(problem, x, y, z, p.at("tau").get<double>(), mp);
        result["lhs_mean"] = matrix_to_json(res.lhs.mean);
        result["rhs_mean"] = matrix_to_json(res.rhs.mean);
        result["coupled_diff"] = res.coupled_diff;
        result["coupled_stderr"] = res.coupled_stderr;
        return 0;
    }

    if (config.subcommand == "verify") {
        std::string suite = p.contains("suite") ? p.at("suite").get<std::string>() : "fast";
        auto reports = run_suite(suite, config.seed, config.threads);
        json checks = json::array();
        bool all = true;
        json timings;
        for (const auto& r : reports) {
            checks.push_back(report_to_json(r));
            timings[r.check_id] = r.runtime_ms;
            all = all && r.passed;
        }
        result["suite"] = suite;
        result["seed"] = config.seed;
        result["checks"] = checks;
        result["all_passed"] = all;
        manifest_extra["per_check_ms"] = timings;  // volatile: manifest only
        std::ostringstream csv;
        csv << "check_id,passed,tolerance\n";
        for (const auto& r : reports)
            csv << r.check_id << "," << (r.passed ? 1 : 0) << "," << r.tolerance << "\n";
        result_csv = csv.str();
        return all ? 0 : 4;
    }

    if (config.subcommand == "report") {
        std::ifstream in(p.at("in").get<std::string>());
        if (!in) throw ConfigError("report: cannot open " + p.at("in").get<std::string>());
        json content = json::parse(in);
        if (content.contains("checks")) {
            std::cout << render_report_table(content);
        } else {
            std::cout << content.dump(2) << "\n";
        }
        result["ingested"] = p.at("in").get<std::string>();
        return 0;
    }

    throw ConfigError("unknown subcommand '" + config.subcommand + "'");
}

}  // namespace

int run(const RunConfig& config) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    json result, manifest_extra;
    std::string result_csv;
    int code = 0;
    try {
        code = dispatch(config, result, manifest_extra, result_csv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        fs::create_directories(config.output_dir);
        const fs::path out(config.output_dir);
        std::string result_name =
            config.subcommand == "verify" ? "report.json" : "result.json";
        write_file(out / result_name, result.dump(2) + "\n");
        if (!result_csv.empty()) write_file(out / "result.csv", result_csv);

        json manifest;
        manifest["config_hash"] = hex64(fnv1a(config.to_json().dump()));
        manifest["version"] = "0.1.0";
        manifest["seed"] = config.seed;
        manifest["subcommand"] = config.subcommand;
        manifest["wall_time_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                                       std::chrono::steady_clock::now() - t0)
                                       .count();
        for (auto& [k, v] : manifest_extra.items()) manifest[k] = v;
        write_file(out / "manifest.json", manifest.dump(2) + "\n");
    } catch (const std::exception& e) {
        std::cerr << "output error: " << e.what() << "\n";
        return 2;
    }
    return code;
}

}  // namespace heatlab
