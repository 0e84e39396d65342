#pragma once
#include "wkam/geometry.hpp"
#include "wkam/model.hpp"
#include "wkam/reparam.hpp"
#include <optional>

namespace wkam {

/// Piecewise-linear path in configuration space: strictly increasing node
/// times, one flattened state per node.
struct DiscretePath {
    VectorXd times;   // K+1 entries
    MatrixXd states;  // dofs x (K+1)
    int dim = 0;
    int n_bodies = 0;

    int n_nodes() const { return static_cast<int>(times.size()); }
    double duration() const { return times[times.size() - 1] - times[0]; }
    Configuration config(int k) const { return unflatten(states.col(k), dim, n_bodies); }
    void validate() const;
};

DiscretePath two_point_path(const Configuration& x, const Configuration& y, const VectorXd& times);

/// Evaluates the piecewise-linear interpolant at arbitrary times (clamped).
MatrixXd sample_path(const DiscretePath& path, const VectorXd& times);

/// Linear-in-time resample onto a new grid spanning the same interval.
DiscretePath resample_path(const DiscretePath& path, const VectorXd& times);

struct ActionParts {
    double kinetic = 0.0;
    double potential = 0.0;
    double total = 0.0;
};

/// Action of the piecewise-linear interpolant: the kinetic term is exact,
/// the potential term uses 5-point Gauss-Legendre on each segment. Any
/// quadrature sample below the collision floor makes the result infinite.
ActionParts action_parts(const LagrangianModel& model, const DiscretePath& path);
double action(const LagrangianModel& model, const DiscretePath& path);
double action(const ProblemSpec& spec, const DiscretePath& path);

/// Potential term restricted to body pairs with pair_mask(i,j) true
/// (used to split intra- from inter-cluster contributions).
double masked_potential_action(const ProblemSpec& spec, const DiscretePath& path,
                               const std::function<bool(int, int)>& pair_mask);

/// Certifies a connector path against its closed-form action bound.
struct BoundCertificate {
    double action_computed = 0.0;
    double bound_value = 0.0;
    double alpha_used = 0.0;
    double beta_used = 0.0;
    bool satisfied = false;  // action_computed <= bound_value

    double kinetic_computed = 0.0;
    double potential_computed = 0.0;
    double kinetic_bound = 0.0;
    double potential_bound = 0.0;
    bool kinetic_ok = false;
    bool potential_ok = false;
    bool containment_ok = false;

    double radius = 0.0;   // R of the enclosing ball (per-cluster radius when clustered)
    double horizon = 0.0;  // T

    // clustered-connector extras
    double epsilon = 0.0;
    double cluster_size_R = 0.0;
    int n_clusters = 0;
    bool subcertificates_ok = true;
    double inter_potential_computed = 0.0;  // W_0
    double inter_potential_bound = 0.0;
};

struct ConnectOptions {
    int base_intervals = 48;   // uniform cells per leg before grading
    int grading_levels = 12;   // geometric halvings around each collision knot
};

/// Explicit bounded-action path from x to y in time T through the spread-out
/// intermediate configuration p_i = center + 6R(i-1) e_1, with each linear leg
/// reparametrized so collisions of the interpolation become integrable.
/// Certifies kinetic <= alpha R^2/T, potential <= beta T R^(-2 kappa) with
/// alpha = 640 (1+k)/(1-k) M N^4, beta = 2 (1+k)/(1-k) N^(4k+2) M^2, and
/// containment of every node in B(center, 6NR). Requires x, y in B(center, R).
std::pair<DiscretePath, BoundCertificate> connect(const ProblemSpec& spec, const Configuration& x,
                                                  const Configuration& y, double T,
                                                  const VectorXd& center, double R,
                                                  const ConnectOptions& opts = {});

/// Connector for arbitrary x, y: builds a (24N)-cluster partition of the
/// bodies at scale epsilon slightly above ||x-y||, connects inside each
/// doubled ball, and certifies the total against
/// alpha_1 T^-1 eps^2 + beta_1 T eps^(-2 kappa).
std::pair<DiscretePath, BoundCertificate> connect_clustered(const ProblemSpec& spec,
                                                            const Configuration& x,
                                                            const Configuration& y, double T,
                                                            const ConnectOptions& opts = {});

/// Constants of the clustered bound, assembled from the per-cluster
/// certificates (ball radius 2R), the inter-cluster term
/// W_0 <= N^2 M^2 (24N)^(-2k) R^(-2k) T, and eps <= R < (48N)^N eps.
std::pair<double, double> clustered_bound_constants(const ProblemSpec& spec);

/// Node times on [t0,t1]: n_base uniform cells plus geometric refinement
/// (ratio 1/2, `levels` halvings, one extra split per level) around each
/// point of `refine_at` that lies inside the interval.
VectorXd graded_times(double t0, double t1, int n_base, const std::vector<double>& refine_at,
                      int levels);

/// Same grading applied one-sidedly at the interval ends; used where paths
/// have t^(1/(1+kappa)) cusps (near-collision endpoints, homothetic ejections).
VectorXd endpoint_graded_times(double t0, double t1, int nodes, bool grade_left, bool grade_right,
                               int levels);

}  // namespace wkam
