#include "wkam/experiments.hpp"
#include "wkam/action_potential.hpp"
#include "wkam/dynamics.hpp"
#include "wkam/io.hpp"
#include "wkam/parallel.hpp"
#include "wkam/paths.hpp"
#include "wkam/rng.hpp"
#include "wkam/weak_kam.hpp"
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>

namespace wkam {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    size_t b = s.find_last_not_of(" \t\r\n");
    return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

const std::vector<std::string> kCommands = {"connect", "phi",     "holder",
                                            "weakkam", "central", "parabolic"};

}  // namespace

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    ExperimentConfig c;
    bool have_section = false;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[' && t.back() == ']') {
            if (have_section) throw std::invalid_argument("config: multiple sections");
            c.command = trim(t.substr(1, t.size() - 2));
            if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end())
                throw std::invalid_argument("config: unknown command '" + c.command + "'");
            have_section = true;
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) throw std::invalid_argument("config: expected key = value: " + t);
        std::string key = trim(t.substr(0, eq));
        std::string val = trim(t.substr(eq + 1));
        if (key == "n_bodies") c.n_bodies = std::stoi(val);
        else if (key == "dim") c.dim = std::stoi(val);
        else if (key == "masses") {
            c.masses.clear();
            std::istringstream ms(val);
            std::string cell;
            while (std::getline(ms, cell, ',')) c.masses.push_back(std::stod(trim(cell)));
        } else if (key == "kappa") c.kappa = std::stod(val);
        else if (key == "seed") c.seed = std::stoull(val);
        else if (key == "n_seeds") c.n_seeds = std::stoi(val);
        else if (key == "workers") c.workers = std::stoi(val);
        else if (key == "tol") c.tol = std::stod(val);
        else if (key == "radius") c.radius = std::stod(val);
        else if (key == "horizon") c.horizon = std::stod(val);
        else if (key == "nodes") c.nodes = std::stoi(val);
        else if (key == "grid_h") c.grid_h = std::stod(val);
        else if (key == "grid_lo") c.grid_lo = std::stod(val);
        else if (key == "grid_hi") c.grid_hi = std::stod(val);
        else if (key == "oracle") c.oracle = val;
        else if (key == "scale_lambda") c.scale_lambda = std::stod(val);
        else if (key == "out_dir") c.out_dir = val;
        else if (key == "batch_file") c.batch_file = val;
        else throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    if (!have_section) throw std::invalid_argument("config: missing [command] section");
    return c;
}

std::string ExperimentConfig::serialize() const {
    std::ostringstream out;
    out << "[" << command << "]\n";
    out << "n_bodies = " << n_bodies << "\n";
    out << "dim = " << dim << "\n";
    if (!masses.empty()) {
        out << "masses = ";
        for (size_t i = 0; i < masses.size(); ++i)
            out << (i ? "," : "") << format_double(masses[i]);
        out << "\n";
    }
    out << "kappa = " << format_double(kappa) << "\n";
    out << "seed = " << seed << "\n";
    out << "n_seeds = " << n_seeds << "\n";
    out << "workers = " << workers << "\n";
    out << "tol = " << format_double(tol) << "\n";
    out << "radius = " << format_double(radius) << "\n";
    out << "horizon = " << format_double(horizon) << "\n";
    out << "nodes = " << nodes << "\n";
    out << "grid_h = " << format_double(grid_h) << "\n";
    out << "grid_lo = " << format_double(grid_lo) << "\n";
    out << "grid_hi = " << format_double(grid_hi) << "\n";
    out << "oracle = " << oracle << "\n";
    out << "scale_lambda = " << format_double(scale_lambda) << "\n";
    out << "out_dir = " << out_dir << "\n";
    if (!batch_file.empty()) out << "batch_file = " << batch_file << "\n";
    return out.str();
}

ProblemSpec ExperimentConfig::problem() const {
    VectorXd m;
    if (masses.empty())
        m = VectorXd::Ones(n_bodies);
    else
        m = Eigen::Map<const VectorXd>(masses.data(), static_cast<long>(masses.size()));
    if (!masses.empty() && static_cast<int>(masses.size()) != n_bodies)
        throw std::invalid_argument("config: masses count differs from n_bodies");
    return ProblemSpec(n_bodies, dim, m, kappa);
}

namespace {

namespace fs = std::filesystem;

Configuration random_ball_configuration(Rng& rng, int dim, int n, double R) {
    Configuration x(dim, n);
    for (int j = 0; j < n; ++j) {
        VectorXd dir(dim);
        for (int a = 0; a < dim; ++a) dir[a] = rng.normal();
        double nrm = dir.norm();
        if (nrm < 1e-12) dir = VectorXd::Unit(dim, 0);
        else dir /= nrm;
        double r = R * std::pow(rng.uniform(), 1.0 / dim);
        x.col(j) = r * dir;
    }
    return x;
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

std::string join(const std::string& dir, const std::string& file) {
    return (fs::path(dir) / file).string();
}

void write_summary(const ExperimentConfig& config, const std::string& file, ordered_json body,
                   bool pass) {
    ordered_json j;
    j["command"] = config.command;
    j["pass"] = pass;
    j["config_echo"] = config.serialize();
    j["results"] = std::move(body);
    write_text_file(join(config.out_dir, file), j.dump(2) + "\n");
}

int cmd_connect(const ExperimentConfig& config, std::ostream& log) {
    if (!(config.horizon > 0.0)) throw std::invalid_argument("connect: horizon must be positive");
    if (!(config.radius > 0.0)) throw std::invalid_argument("connect: radius must be positive");
    ProblemSpec spec = config.problem();
    VectorXd center = VectorXd::Zero(spec.dim);

    std::vector<ordered_json> certs(static_cast<size_t>(config.n_seeds));
    std::vector<std::string> sample_paths(static_cast<size_t>(config.n_seeds));
    std::vector<uint8_t> ok(static_cast<size_t>(config.n_seeds), 0);
    parallel_for(config.n_seeds, config.workers, [&](int s) {
        Rng rng(config.seed + static_cast<uint64_t>(s));
        Configuration x = random_ball_configuration(rng, spec.dim, spec.n_bodies, config.radius);
        Configuration y = random_ball_configuration(rng, spec.dim, spec.n_bodies, config.radius);
        auto [path, cert] = connect(spec, x, y, config.horizon, center, config.radius);
        ok[static_cast<size_t>(s)] = cert.satisfied && cert.kinetic_ok && cert.potential_ok &&
                                     cert.containment_ok;
        ordered_json j = certificate_to_json(cert);
        j["seed"] = config.seed + static_cast<uint64_t>(s);
        certs[static_cast<size_t>(s)] = std::move(j);
        if (s < 3) sample_paths[static_cast<size_t>(s)] = path_to_csv(path);
    });

    std::ostringstream lines;
    int n_ok = 0;
    for (int s = 0; s < config.n_seeds; ++s) {
        lines << certs[static_cast<size_t>(s)].dump() << "\n";
        n_ok += ok[static_cast<size_t>(s)];
    }
    write_text_file(join(config.out_dir, "connect_certificates.jsonl"), lines.str());
    for (int s = 0; s < std::min(3, config.n_seeds); ++s)
        write_text_file(join(config.out_dir, "connect_path_" + std::to_string(s) + ".csv"),
                        sample_paths[static_cast<size_t>(s)]);

    bool pass = n_ok == config.n_seeds;
    ordered_json body;
    body["n_seeds"] = config.n_seeds;
    body["n_satisfied"] = n_ok;
    write_summary(config, "connect_summary.json", std::move(body), pass);
    log << "connect: " << n_ok << "/" << config.n_seeds << " certificates satisfied\n";
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_phi(const ExperimentConfig& config, std::ostream& log) {
    ProblemSpec spec = config.problem();
    std::vector<BatchQuery> queries;
    if (!config.batch_file.empty()) {
        queries = parse_batch_queries(read_text_file(config.batch_file));
    } else {
        Rng rng(config.seed);
        for (int s = 0; s < config.n_seeds; ++s) {
            BatchQuery q{spec,
                         random_ball_configuration(rng, spec.dim, spec.n_bodies, config.radius),
                         random_ball_configuration(rng, spec.dim, spec.n_bodies, config.radius),
                         0.0};
            queries.push_back(std::move(q));
        }
    }

    FreePhiOptions fopts;
    fopts.nodes = config.nodes;
    std::ostringstream lines;
    bool pass = true;
    for (size_t i = 0; i < queries.size(); ++i) {
        const BatchQuery& q = queries[i];
        PhiEstimate est = q.T > 0.0
                              ? minimize_action(q.spec, q.x, q.y, q.T, config.nodes, {}, {})
                              : free_phi(q.spec, q.x, q.y, fopts);
        bool sandwich = est.value >= est.lower_bound - 1e-9 * (1.0 + std::abs(est.value)) &&
                        est.value <= est.upper_bound * (1.0 + 1e-9);
        if (est.converged && !sandwich) pass = false;
        ordered_json j = phi_estimate_to_json(est);
        j["query_index"] = i;
        j["sandwich_ok"] = sandwich;
        // echo the certificate constants behind the upper bound
        double kq = q.spec.kappa, Mq = q.spec.total_mass(), Nq = q.spec.n_bodies;
        j["alpha_used"] = 640.0 * (1.0 + kq) / (1.0 - kq) * Mq * std::pow(Nq, 4);
        j["beta_used"] = 2.0 * (1.0 + kq) / (1.0 - kq) * std::pow(Nq, 4.0 * kq + 2.0) * Mq * Mq;
        lines << j.dump() << "\n";
    }
    write_text_file(join(config.out_dir, "phi_results.jsonl"), lines.str());

    // homogeneity spot check on the first usable query
    ordered_json body;
    for (const BatchQuery& q : queries) {
        if (max_norm(q.x - q.y) == 0.0) continue;
        HomogeneityReport rep = certify_homogeneity(q.spec, q.x, q.y, config.scale_lambda, fopts);
        body["homogeneity_ratio"] = rep.ratio;
        body["homogeneity_expected"] = rep.expected_ratio;
        body["homogeneity_rel_err"] = rep.relative_error;
        if (rep.relative_error > 0.02) pass = false;
        break;
    }
    body["n_queries"] = queries.size();
    write_summary(config, "phi_summary.json", std::move(body), pass);
    log << "phi: " << queries.size() << " queries, " << (pass ? "pass" : "FAIL") << "\n";
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_holder(const ExperimentConfig& config, std::ostream& log) {
    ProblemSpec spec = config.problem();
    Rng rng(config.seed);
    // scale-free base point (total collision) isolates the Hoelder exponent
    Configuration x0 = Configuration::Zero(spec.dim, spec.n_bodies);
    Configuration delta(spec.dim, spec.n_bodies);
    for (int j = 0; j < spec.n_bodies; ++j)
        for (int a = 0; a < spec.dim; ++a) delta(a, j) = rng.normal();
    delta /= max_norm(delta);

    FreePhiOptions fopts;
    fopts.nodes = config.nodes;
    std::ostringstream csv;
    csv << "s,phi\n";
    std::vector<double> logs, logphi;
    for (int e = -4; e <= 4; ++e) {
        double s = std::pow(2.0, e);
        PhiEstimate est = free_phi(spec, x0, Configuration(s * delta), fopts);
        csv << format_double(s) << "," << format_double(est.value) << "\n";
        logs.push_back(std::log(s));
        logphi.push_back(std::log(est.value));
    }
    write_text_file(join(config.out_dir, "holder_points.csv"), csv.str());

    double n = static_cast<double>(logs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < logs.size(); ++i) {
        sx += logs[i];
        sy += logphi[i];
        sxx += logs[i] * logs[i];
        sxy += logs[i] * logphi[i];
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double expected = 1.0 - spec.kappa;
    bool pass = std::abs(slope - expected) <= (config.tol > 0.0 ? config.tol : 0.05);

    ordered_json body;
    body["slope"] = slope;
    body["expected"] = expected;
    write_summary(config, "holder_summary.json", std::move(body), pass);
    log << "holder: slope " << slope << " expected " << expected << "\n";
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_central(const ExperimentConfig& config, std::ostream& log) {
    ProblemSpec spec = config.problem();
    CentralSearchOptions copts;
    copts.workers = config.workers;
    try {
        CentralConfiguration central = find_central_configuration(spec, config.seed, copts);
        ordered_json body;
        body["u0"] = central.u0;
        body["residual"] = central.residual;
        body["is_minimal"] = central.is_minimal;
        std::vector<std::vector<double>> cfg;
        for (int j = 0; j < spec.n_bodies; ++j) {
            std::vector<double> col(central.config.col(j).data(),
                                    central.config.col(j).data() + spec.dim);
            cfg.push_back(std::move(col));
        }
        body["configuration"] = cfg;
        bool pass = central.residual < 1e-8;
        write_summary(config, "central_summary.json", std::move(body), pass);
        log << "central: U0 = " << central.u0 << " residual = " << central.residual << "\n";
        return pass ? kExitOk : kExitCheckFailed;
    } catch (const ConvergenceError& e) {
        ordered_json body;
        body["error"] = e.what();
        body["best_u0"] = e.best.u0;
        write_summary(config, "central_summary.json", std::move(body), false);
        log << "central: " << e.what() << "\n";
        return kExitCheckFailed;
    }
}

int cmd_parabolic(const ExperimentConfig& config, std::ostream& log) {
    ProblemSpec spec = config.problem();
    CentralSearchOptions copts;
    copts.workers = config.workers;
    CentralConfiguration central = find_central_configuration(spec, config.seed, copts);

    double T = config.horizon;
    int n_nodes = std::max(config.nodes, 64);
    VectorXd times = endpoint_graded_times(0.0, T, n_nodes, true, false, 24);
    DiscretePath path;
    path.dim = spec.dim;
    path.n_bodies = spec.n_bodies;
    path.times = times;
    path.states.resize(spec.dim * spec.n_bodies, times.size());
    path.states.col(0).setZero();
    for (int k = 1; k < times.size(); ++k)
        path.states.col(k) = flatten(parabolic_homothetic(central, spec, times[k]).first);

    ActionParts parts = action_parts(NBodyModel(spec), path);
    double closed = parabolic_action_closed_form(central, spec, T);
    auto [kin_term, pot_term] = parabolic_action_terms(central, spec, T);
    double rel_err = std::abs(parts.total - closed) / closed;
    double equipartition = std::abs(kin_term - pot_term) / kin_term;

    double tol = config.tol > 0.0 ? config.tol : 1e-3;
    bool pass = rel_err <= tol && equipartition <= 1e-6;

    ordered_json body;
    body["closed_form"] = closed;
    body["quadrature"] = parts.total;
    body["relative_error"] = rel_err;
    body["kinetic_term"] = kin_term;
    body["potential_term"] = pot_term;
    body["equipartition_rel_gap"] = equipartition;
    body["u0"] = central.u0;
    body["scale_constant"] = parabolic_scale_constant(central, spec);
    write_summary(config, "parabolic_summary.json", std::move(body), pass);
    write_text_file(join(config.out_dir, "parabolic_path.csv"), path_to_csv(path));
    log << "parabolic: closed form " << closed << " quadrature " << parts.total << " rel "
        << rel_err << "\n";
    return pass ? kExitOk : kExitCheckFailed;
}

int cmd_weakkam(const ExperimentConfig& config, std::ostream& log) {
    if (std::abs(config.kappa - 0.5) > 1e-12)
        throw std::invalid_argument("weakkam: the Kepler oracles require kappa = 0.5");
    std::map<std::string, KeplerOracle> names = {
        {"u_plus", KeplerOracle::UPlus},
        {"u_minus", KeplerOracle::UMinus},
        {"busemann_b_plus", KeplerOracle::BusemannBPlus},
        {"rotation_invariant", KeplerOracle::RotationInvariant},
        {"planar_busemann", KeplerOracle::PlanarBusemann}};
    auto it = names.find(config.oracle);
    if (it == names.end()) throw std::invalid_argument("weakkam: unknown oracle " + config.oracle);
    KeplerOracle oracle = it->second;

    ReducedProblem problem(ReducedKind::CollinearTwoBody, 0.5);
    double t_step = 0.25;

    // defect of the oracle at h and h/2 over a common window (the coarse
    // trusted region), so refinement compares the same continuum region
    double win_lo = 0.0, win_hi = -1.0;
    auto one_step_defect = [&](double h) {
        Grid grid = Grid::line(config.grid_lo, config.grid_hi, h);
        GridFunction u = sample_oracle(problem, oracle, grid);
        LaxOptions lopts;
        lopts.direction = config.oracle == "u_plus" ? SemigroupDirection::Forward
                                                    : SemigroupDirection::Backward;
        LaxStepResult step = lax_oleinik_step(problem, u, t_step, lopts);
        if (win_hi < win_lo) {
            for (int i = 0; i < grid.size(); ++i)
                if (step.trusted[static_cast<size_t>(i)]) {
                    if (win_hi < win_lo) win_lo = grid.point(i)[0];
                    win_hi = grid.point(i)[0];
                }
        }
        double defect = 0.0;
        for (int i = 0; i < grid.size(); ++i) {
            double s = grid.point(i)[0];
            if (step.trusted[static_cast<size_t>(i)] && s >= win_lo && s <= win_hi)
                defect = std::max(defect,
                                  std::abs(step.u.values[i] + step.shift - u.values[i]));
        }
        return defect;
    };

    double C_h = one_step_defect(config.grid_h);
    double C_h2 = one_step_defect(config.grid_h / 2.0);
    double ratio = C_h / std::max(C_h2, 1e-300);

    // iteration from zero
    Grid grid = Grid::line(config.grid_lo, config.grid_hi, config.grid_h);
    GridFunction zero = sample_oracle(problem, oracle, grid);
    zero.values.setZero();
    double tol = config.tol > 0.0 ? config.tol : 1e-4;
    auto [limit, rep] = iterate_to_fixed_point(problem, zero, t_step, tol);

    write_text_file(join(config.out_dir, "weakkam_limit.csv"), grid_function_to_csv(limit));
    write_text_file(join(config.out_dir, "weakkam_limit.matrix"), grid_function_to_matrix(limit));
    ordered_json body;
    body["defect_h"] = C_h;
    body["defect_h_over_2"] = C_h2;
    body["defect_ratio"] = ratio;
    body["iteration"] = semigroup_report_to_json(rep);
    body["grid_h"] = config.grid_h;
    body["grid_lo"] = config.grid_lo;
    body["grid_hi"] = config.grid_hi;
    body["t_step"] = t_step;
    body["tol"] = tol;
    double gtol = grid_tolerance(config.grid_h);
    body["grid_tolerance"] = gtol;
    bool pass = ratio >= 1.8 && rep.converged && rep.dominated_violation <= gtol;
    write_summary(config, "weakkam_summary.json", std::move(body), pass);
    log << "weakkam: defect ratio " << ratio << ", iteration "
        << (rep.converged ? "converged" : "did not converge") << "\n";
    return pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_experiment(const ExperimentConfig& config, std::ostream& log) {
    try {
        ensure_dir(config.out_dir);
        config.problem();  // validates masses/kappa before dispatch
        if (config.command == "connect") return cmd_connect(config, log);
        if (config.command == "phi") return cmd_phi(config, log);
        if (config.command == "holder") return cmd_holder(config, log);
        if (config.command == "weakkam") return cmd_weakkam(config, log);
        if (config.command == "central") return cmd_central(config, log);
        if (config.command == "parabolic") return cmd_parabolic(config, log);
        log << "unknown command: " << config.command << "\n";
        return kExitUsageError;
    } catch (const std::invalid_argument& e) {
        log << "usage error: " << e.what() << "\n";
        return kExitUsageError;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitCheckFailed;
    }
}

}  // namespace wkam
