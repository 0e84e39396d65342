#include "wkam/dynamics.hpp"
#include "wkam/parallel.hpp"
#include "wkam/rng.hpp"
#include <cmath>
#include <mutex>

namespace wkam {

double potential(const ProblemSpec& spec, const Configuration& x) {
    const int n = spec.n_bodies;
    const double floor = collision_floor(max_norm(x));
    double u = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double r = (x.col(i) - x.col(j)).norm();
            if (r < floor) return kInfinity;
            u += spec.masses[i] * spec.masses[j] * std::pow(r, -2.0 * spec.kappa);
        }
    return u;
}

Configuration potential_gradient_euclidean(const ProblemSpec& spec, const Configuration& x) {
    const int n = spec.n_bodies;
    const double floor = collision_floor(max_norm(x));
    Configuration g = Configuration::Zero(x.rows(), x.cols());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Eigen::VectorXd diff = x.col(i) - x.col(j);
            double r = diff.norm();
            if (r < floor) throw std::invalid_argument("potential_gradient: collision configuration");
            // d/dr_i of m_i m_j r^(-2k) = -2k m_i m_j r^(-2k-2) (r_i - r_j)
            double coeff = -2.0 * spec.kappa * spec.masses[i] * spec.masses[j] *
                           std::pow(r, -2.0 * spec.kappa - 2.0);
            g.col(i) += coeff * diff;
            g.col(j) -= coeff * diff;
        }
    return g;
}

Configuration potential_gradient(const ProblemSpec& spec, const Configuration& x) {
    Configuration g = potential_gradient_euclidean(spec, x);
    for (int i = 0; i < spec.n_bodies; ++i) g.col(i) /= spec.masses[i];
    return g;
}

double hamiltonian(const ProblemSpec& spec, const Configuration& x, const Configuration& p) {
    double kin = 0.0;
    for (int i = 0; i < spec.n_bodies; ++i) kin += p.col(i).squaredNorm() / spec.masses[i];
    return 0.5 * kin - potential(spec, x);
}

Configuration legendre(const ProblemSpec& spec, const Configuration& v) {
    Configuration p = v;
    for (int i = 0; i < spec.n_bodies; ++i) p.col(i) *= spec.masses[i];
    return p;
}

EnergyReport energy_report(const ProblemSpec& spec, const Configuration& x, const Configuration& v) {
    EnergyReport rep;
    rep.kinetic = 0.5 * moment_of_inertia(spec, v);
    rep.potential_value = potential(spec, x);
    rep.total_energy = rep.kinetic - rep.potential_value;
    return rep;
}

namespace {

Configuration normalize_inertia(const ProblemSpec& spec, Configuration x) {
    double nrm = mass_norm(spec, x);
    if (!(nrm > 0.0)) throw std::runtime_error("normalize_inertia: zero configuration");
    return x / nrm;
}

struct SphereRun {
    Configuration x;
    double u = kInfinity;
    double residual = kInfinity;
    bool converged = false;
};

/// Projected gradient descent for U on the inertia sphere I = 1 with
/// backtracking line search and re-normalization after each step.
SphereRun minimize_on_sphere(const ProblemSpec& spec, Configuration x0,
                             const CentralSearchOptions& opts) {
    SphereRun run;
    Configuration x = normalize_inertia(spec, std::move(x0));
    double u = potential(spec, x);
    double step = 0.1;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        Configuration g = potential_gradient(spec, x);          // mass-metric gradient
        double radial = mass_dot(spec, g, x);                    // I(x) = 1
        Configuration gt = g - radial * x;                       // tangential component
        double gt2 = moment_of_inertia(spec, gt);                // |gt|_mass^2
        run.residual = std::sqrt(gt2);
        if (run.residual < opts.residual_tol) {
            run.converged = true;
            break;
        }
        bool accepted = false;
        // near the minimum the Armijo decrease drops below double resolution;
        // flat steps are then accepted with a gently shrinking step so the
        // residual keeps contracting without overshoot
        const double fuzz = 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(u));
        for (int ls = 0; ls < 60; ++ls) {
            Configuration xt = normalize_inertia(spec, x - step * gt);
            double ut = potential(spec, xt);
            double needed = 1e-4 * step * gt2;
            if (ut <= u - needed) {
                x = std::move(xt);
                u = ut;
                step = std::min(step * 1.5, 1e3);
                accepted = true;
                break;
            }
            if (needed <= fuzz && ut <= u + fuzz) {
                x = std::move(xt);
                u = std::min(u, ut);
                step *= 0.7;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // stalled at line-search resolution
    }
    run.x = std::move(x);
    run.u = u;
    return run;
}

}  // namespace

CentralConfiguration find_central_configuration(const ProblemSpec& spec, uint64_t seed,
                                                const CentralSearchOptions& opts) {
    if (spec.n_bodies < 2) throw std::invalid_argument("find_central_configuration: need N >= 2");
    std::vector<SphereRun> runs(static_cast<size_t>(opts.restarts));
    parallel_for(opts.restarts, opts.workers, [&](int r) {
        Rng rng(seed + static_cast<uint64_t>(r) * 0x100000001b3ULL);
        Configuration x0(spec.dim, spec.n_bodies);
        for (int j = 0; j < spec.n_bodies; ++j)
            for (int i = 0; i < spec.dim; ++i) x0(i, j) = rng.normal();
        // remove the mass-weighted centroid; minima have center of mass at 0
        Eigen::VectorXd com = x0 * spec.masses / spec.total_mass();
        x0.colwise() -= com;
        if (max_norm(x0) < 1e-8) x0.setRandom();
        runs[static_cast<size_t>(r)] = minimize_on_sphere(spec, x0, opts);
    });

    int best = -1;
    for (int r = 0; r < opts.restarts; ++r)
        if (runs[static_cast<size_t>(r)].converged &&
            (best < 0 || runs[static_cast<size_t>(r)].u < runs[static_cast<size_t>(best)].u))
            best = r;

    if (best < 0) {
        CentralConfiguration fallback;
        int any = 0;
        for (int r = 1; r < opts.restarts; ++r)
            if (runs[static_cast<size_t>(r)].u < runs[static_cast<size_t>(any)].u) any = r;
        fallback.config = runs[static_cast<size_t>(any)].x;
        fallback.u0 = runs[static_cast<size_t>(any)].u;
        fallback.residual = runs[static_cast<size_t>(any)].residual;
        throw ConvergenceError("find_central_configuration: no restart reached the residual tolerance",
                               fallback);
    }

    CentralConfiguration out;
    out.config = runs[static_cast<size_t>(best)].x;
    out.u0 = runs[static_cast<size_t>(best)].u;
    out.residual = runs[static_cast<size_t>(best)].residual;
    out.is_minimal = true;
    for (int r = 0; r < opts.restarts; ++r) {
        const auto& run = runs[static_cast<size_t>(r)];
        if (!run.converged || std::abs(run.u - out.u0) > opts.agree_tol * std::abs(out.u0))
            out.is_minimal = false;
    }
    return out;
}

double parabolic_scale_constant(const CentralConfiguration& central, const ProblemSpec& spec) {
    const double k = spec.kappa;
    return std::pow(2.0 * central.u0, 1.0 / (2.0 + 2.0 * k)) *
           std::pow(1.0 + k, 1.0 / (1.0 + k));
}

std::pair<Configuration, Configuration> parabolic_homothetic(const CentralConfiguration& central,
                                                             const ProblemSpec& spec, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("parabolic_homothetic: t must be positive");
    const double k = spec.kappa;
    const double c = parabolic_scale_constant(central, spec);
    double r = c * std::pow(t, 1.0 / (1.0 + k));
    double rdot = c / (1.0 + k) * std::pow(t, -k / (1.0 + k));
    return {r * central.config, rdot * central.config};
}

std::pair<double, double> parabolic_action_terms(const CentralConfiguration& central,
                                                 const ProblemSpec& spec, double T) {
    const double k = spec.kappa;
    const double c = parabolic_scale_constant(central, spec);
    double tpow = std::pow(T, (1.0 - k) / (1.0 + k));
    double kin = c * c / (2.0 * (1.0 - k * k)) * tpow;
    double pot = std::pow(c, -2.0 * k) * central.u0 * (1.0 + k) / (1.0 - k) * tpow;
    return {kin, pot};
}

double parabolic_action_closed_form(const CentralConfiguration& central, const ProblemSpec& spec,
                                    double T) {
    if (!(T > 0.0)) throw std::invalid_argument("parabolic_action_closed_form: T must be positive");
    auto [kin, pot] = parabolic_action_terms(central, spec, T);
    return kin + pot;
}

}  // namespace wkam
