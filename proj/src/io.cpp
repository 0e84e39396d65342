#include "wkam/io.hpp"
#include <cstdio>
#include <fstream>
#include <sstream>

namespace wkam {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string path_to_csv(const DiscretePath& path) {
    std::ostringstream out;
    out << "t";
    for (int b = 0; b < path.n_bodies; ++b)
        for (int a = 0; a < path.dim; ++a) out << ",body" << b << "_x" << a;
    out << "\n";
    for (int k = 0; k < path.n_nodes(); ++k) {
        out << format_double(path.times[k]);
        for (int r = 0; r < path.states.rows(); ++r)
            out << "," << format_double(path.states(r, k));
        out << "\n";
    }
    return out.str();
}

DiscretePath path_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw std::invalid_argument("path_from_csv: empty input");

    // recover layout from the header
    int n_bodies = 0, dim = 0;
    {
        std::istringstream hdr(line);
        std::string cell;
        std::getline(hdr, cell, ',');  // "t"
        while (std::getline(hdr, cell, ',')) {
            int b = 0, a = 0;
            if (std::sscanf(cell.c_str(), "body%d_x%d", &b, &a) == 2) {
                n_bodies = std::max(n_bodies, b + 1);
                dim = std::max(dim, a + 1);
            }
        }
    }
    std::vector<double> times;
    std::vector<VectorXd> cols;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, ',');
        times.push_back(std::stod(cell));
        VectorXd q(dim * n_bodies);
        for (int r = 0; r < q.size(); ++r) {
            if (!std::getline(row, cell, ',')) throw std::invalid_argument("path_from_csv: short row");
            q[r] = std::stod(cell);
        }
        cols.push_back(std::move(q));
    }
    DiscretePath p;
    p.dim = dim;
    p.n_bodies = n_bodies;
    p.times = Eigen::Map<VectorXd>(times.data(), static_cast<long>(times.size()));
    p.states.resize(dim * n_bodies, static_cast<long>(cols.size()));
    for (size_t k = 0; k < cols.size(); ++k) p.states.col(static_cast<long>(k)) = cols[k];
    return p;
}

std::string grid_function_to_csv(const GridFunction& u) {
    std::ostringstream out;
    bool two_d = u.grid.dims[1] > 1;
    out << (two_d ? "x0,x1,value,excluded\n" : "x0,value,excluded\n");
    for (int idx = 0; idx < u.grid.size(); ++idx) {
        VectorXd p = u.grid.point(idx);
        out << format_double(p[0]);
        if (two_d) out << "," << format_double(p[1]);
        out << "," << format_double(u.values[idx]) << ","
            << int(u.excluded[static_cast<size_t>(idx)]) << "\n";
    }
    return out.str();
}

std::string grid_function_to_matrix(const GridFunction& u) {
    std::ostringstream out;
    const Grid& g = u.grid;
    if (g.dims[1] == 1) {
        for (int i = 0; i < g.dims[0]; ++i)
            out << format_double(g.origin[0] + g.h * i) << " " << format_double(u.values[i])
                << "\n";
        return out.str();
    }
    out << g.dims[0];
    for (int i = 0; i < g.dims[0]; ++i) out << " " << format_double(g.origin[0] + g.h * i);
    out << "\n";
    for (int j = 0; j < g.dims[1]; ++j) {
        out << format_double(g.origin[1] + g.h * j);
        for (int i = 0; i < g.dims[0]; ++i)
            out << " " << format_double(u.values[g.index(i, j)]);
        out << "\n";
    }
    return out.str();
}

ordered_json certificate_to_json(const BoundCertificate& cert) {
    ordered_json j;
    j["action_computed"] = cert.action_computed;
    j["bound_value"] = cert.bound_value;
    j["alpha_used"] = cert.alpha_used;
    j["beta_used"] = cert.beta_used;
    j["satisfied"] = cert.satisfied;
    j["kinetic_computed"] = cert.kinetic_computed;
    j["potential_computed"] = cert.potential_computed;
    j["kinetic_bound"] = cert.kinetic_bound;
    j["potential_bound"] = cert.potential_bound;
    j["kinetic_ok"] = cert.kinetic_ok;
    j["potential_ok"] = cert.potential_ok;
    j["containment_ok"] = cert.containment_ok;
    j["radius"] = cert.radius;
    j["horizon"] = cert.horizon;
    if (cert.n_clusters > 0) {
        j["epsilon"] = cert.epsilon;
        j["cluster_size_R"] = cert.cluster_size_R;
        j["n_clusters"] = cert.n_clusters;
        j["subcertificates_ok"] = cert.subcertificates_ok;
        j["inter_potential_computed"] = cert.inter_potential_computed;
        j["inter_potential_bound"] = cert.inter_potential_bound;
    }
    return j;
}

ordered_json phi_estimate_to_json(const PhiEstimate& est) {
    ordered_json j;
    j["value"] = est.value;
    j["lower_bound"] = est.lower_bound;
    j["upper_bound"] = std::isfinite(est.upper_bound) ? ordered_json(est.upper_bound)
                                                      : ordered_json("inf");
    j["converged"] = est.converged;
    j["iterations"] = est.iterations;
    j["horizon"] = est.horizon;
    j["enclosing_radius"] = est.enclosing_radius;
    return j;
}

ordered_json semigroup_report_to_json(const SemigroupReport& rep) {
    ordered_json j;
    j["t_step"] = rep.t_step;
    j["sup_change"] = rep.sup_change;
    j["dominated_violation"] = rep.dominated_violation;
    j["drift_c"] = rep.drift_c;
    j["iterations"] = rep.iterations;
    j["converged"] = rep.converged;
    return j;
}

std::vector<BatchQuery> parse_batch_queries(const std::string& json_text) {
    nlohmann::json root = nlohmann::json::parse(json_text);
    if (!root.is_array()) throw std::invalid_argument("batch file: expected a JSON array");
    std::vector<BatchQuery> out;
    for (const auto& item : root) {
        double kappa = item.at("kappa").get<double>();
        std::vector<double> masses = item.at("masses").get<std::vector<double>>();
        auto xs = item.at("x").get<std::vector<std::vector<double>>>();
        auto ys = item.at("y").get<std::vector<std::vector<double>>>();
        int n = static_cast<int>(masses.size());
        int d = item.contains("dim") ? item.at("dim").get<int>()
                                     : static_cast<int>(xs.at(0).size());
        if (static_cast<int>(xs.size()) != n || static_cast<int>(ys.size()) != n)
            throw std::invalid_argument("batch file: x/y body count mismatch with masses");
        Configuration x(d, n), y(d, n);
        for (int b = 0; b < n; ++b) {
            if (static_cast<int>(xs[static_cast<size_t>(b)].size()) != d ||
                static_cast<int>(ys[static_cast<size_t>(b)].size()) != d)
                throw std::invalid_argument("batch file: coordinate count mismatch");
            for (int a = 0; a < d; ++a) {
                x(a, b) = xs[static_cast<size_t>(b)][static_cast<size_t>(a)];
                y(a, b) = ys[static_cast<size_t>(b)][static_cast<size_t>(a)];
            }
        }
        BatchQuery q{ProblemSpec(n, d, Eigen::Map<VectorXd>(masses.data(), n), kappa),
                     std::move(x), std::move(y), 0.0};
        if (item.contains("T")) q.T = item.at("T").get<double>();
        out.push_back(std::move(q));
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace wkam
