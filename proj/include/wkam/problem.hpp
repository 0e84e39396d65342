#pragma once
#include <Eigen/Dense>
#include <limits>
#include <stdexcept>

namespace wkam {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Positions of N point masses in d-dimensional space; one column per body.
using Configuration = Eigen::MatrixXd;

/// Sentinel for "infinite action / collision": quadratures and line searches
/// treat it as an absorbing reject value.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Fixes the N-body problem: masses m_i and the exponent kappa of the
/// pairwise potential sum m_i m_j r_ij^(-2 kappa), 0 < kappa < 1.
struct ProblemSpec {
    int n_bodies = 0;
    int dim = 0;
    VectorXd masses;
    double kappa = 0.5;

    ProblemSpec(int n, int d, VectorXd m, double k)
        : n_bodies(n), dim(d), masses(std::move(m)), kappa(k) {
        if (n < 1 || d < 1)
            throw std::invalid_argument("ProblemSpec: need n_bodies >= 1 and dim >= 1");
        if (masses.size() != n)
            throw std::invalid_argument("ProblemSpec: masses.size() != n_bodies");
        if ((masses.array() <= 0.0).any())
            throw std::invalid_argument("ProblemSpec: all masses must be positive");
        if (!(kappa > 0.0 && kappa < 1.0))
            throw std::invalid_argument("ProblemSpec: kappa must lie in (0,1)");
    }

    static ProblemSpec unit_masses(int n, int d, double kappa) {
        return ProblemSpec(n, d, VectorXd::Ones(n), kappa);
    }

    double total_mass() const { return masses.sum(); }
    double min_mass() const { return masses.minCoeff(); }
};

/// max-norm: largest body distance from the origin.
inline double max_norm(const Configuration& x) {
    return x.colwise().norm().maxCoeff();
}

/// Moment of inertia I(x) = sum m_i |r_i|^2 (squared mass-norm).
inline double moment_of_inertia(const ProblemSpec& spec, const Configuration& x) {
    return (x.colwise().squaredNorm().transpose().array() * spec.masses.array()).sum();
}

inline double mass_norm(const ProblemSpec& spec, const Configuration& x) {
    return std::sqrt(moment_of_inertia(spec, x));
}

/// Mass scalar product <x,y> = sum m_i <r_i, s_i>.
inline double mass_dot(const ProblemSpec& spec, const Configuration& x, const Configuration& y) {
    return ((x.array() * y.array()).colwise().sum().transpose() * spec.masses.array()).sum();
}

/// Distances below this are treated as collisions; keeps r^(-2k) finite
/// while preserving infinite-action semantics.
inline double collision_floor(double config_scale) {
    return 1e-13 * (1.0 + config_scale);
}

struct EnergyReport {
    double kinetic = 0.0;
    double potential_value = 0.0;  // U(x), the force function (>= 0)
    double total_energy = 0.0;     // kinetic - potential_value
};

}  // namespace wkam
