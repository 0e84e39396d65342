#pragma once
#include "wkam/problem.hpp"

namespace wkam {

/// Force function U(x) = sum_{i<j} m_i m_j r_ij^(-2 kappa).
/// Returns kInfinity when some pair is below the collision floor.
double potential(const ProblemSpec& spec, const Configuration& x);

/// Gradient of U with respect to the mass scalar product, so that the
/// equations of motion read xdd = potential_gradient(x). Throws on collision.
Configuration potential_gradient(const ProblemSpec& spec, const Configuration& x);

/// Euclidean gradient dU/dr_i (= m_i times the mass-metric gradient rows).
Configuration potential_gradient_euclidean(const ProblemSpec& spec, const Configuration& x);

/// H(x,p) = 1/2 sum m_i^-1 |p_i|^2 - U(x).
double hamiltonian(const ProblemSpec& spec, const Configuration& x, const Configuration& p);

/// Legendre transform p_i = m_i v_i.
Configuration legendre(const ProblemSpec& spec, const Configuration& v);

EnergyReport energy_report(const ProblemSpec& spec, const Configuration& x, const Configuration& v);

/// A critical point of I^kappa U on the sphere I = 1, found by multi-start
/// projected gradient descent. is_minimal is a heuristic flag: all restarts
/// agreed on the minimal value of U.
struct CentralConfiguration {
    Configuration config;    // normalized to I = 1
    double u0 = 0.0;         // U at config
    bool is_minimal = false;
    double residual = 0.0;   // mass-norm of the tangential gradient at config
};

struct ConvergenceError : std::runtime_error {
    CentralConfiguration best;
    ConvergenceError(const std::string& what, CentralConfiguration b)
        : std::runtime_error(what), best(std::move(b)) {}
};

struct CentralSearchOptions {
    int restarts = 16;
    int max_iters = 200000;
    double residual_tol = 1e-8;   // first-order condition on the sphere
    double agree_tol = 1e-6;      // relative agreement of restarts for is_minimal
    int workers = 0;              // 0 = hardware concurrency
};

CentralConfiguration find_central_configuration(const ProblemSpec& spec, uint64_t seed,
                                                const CentralSearchOptions& opts = {});

/// Scale factor of the zero-energy homothetic motion x(t) = c t^(1/(1+kappa)) x0.
double parabolic_scale_constant(const CentralConfiguration& central, const ProblemSpec& spec);

/// Position and velocity of the parabolic homothetic motion at time t > 0.
std::pair<Configuration, Configuration> parabolic_homothetic(const CentralConfiguration& central,
                                                             const ProblemSpec& spec, double t);

/// Closed-form action of the parabolic motion on [0,T]:
/// (c^2/(2(1-k^2)) + c^(-2k) U0 (1+k)/(1-k)) T^((1-k)/(1+k)).
double parabolic_action_closed_form(const CentralConfiguration& central, const ProblemSpec& spec,
                                    double T);

/// The two addends of the closed form (kinetic, potential). They coincide on
/// the zero-energy solution; exposed for the equipartition check.
std::pair<double, double> parabolic_action_terms(const CentralConfiguration& central,
                                                 const ProblemSpec& spec, double T);

}  // namespace wkam
