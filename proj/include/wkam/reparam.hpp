#pragma once
#include <Eigen/Dense>
#include <stdexcept>

namespace wkam {

/// Increasing absolutely continuous map F with F(0)=0, F(1)=1 and F(b_i)=a_i,
/// built as the primitive of f(t) = max_i g_c(t - b_i), g_c(x) = c|x|^(-k/(1+k)).
/// Near each knot b_i, |F(t) - a_i| >= c(1+k)|t - b_i|^(1/(1+k)), which turns
/// the collision times of a linear interpolation into integrable singularities.
struct ReparamMap {
    double kappa = 0.5;
    Eigen::VectorXd a;  // sorted target values, F(b_i) = a_i
    Eigen::VectorXd b;  // sorted knots
    double c = 0.0;     // speed scale, solves F(1) = 1

    double value(double t) const;                    // F(t)
    double speed(double t) const;                    // f(t), +inf at knots
    double integral(double t0, double t1) const;     // closed-form int f
    double energy(double t0, double t1) const;       // closed-form int f^2
};

/// Constructs the map for targets a (deduplicated within 1e-12, then sorted).
/// The speed scale c is found by bisection on [1/(2m(1+k)), 2 + min|a_i|];
/// throws std::runtime_error if the bracket fails to change sign.
ReparamMap build_reparam(double kappa, Eigen::VectorXd a);

}  // namespace wkam
