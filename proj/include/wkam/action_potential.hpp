#pragma once
#include "wkam/paths.hpp"
#include <optional>

namespace wkam {

/// Upper estimate of the action potential together with the paper-tight
/// sandwich: (m/2T)||x-y||^2 <= phi <= connector bound. `value` is the action
/// of the best discrete path found, so it is an upper approximation of phi up
/// to quadrature error; acceptance never assumes it equals phi.
struct PhiEstimate {
    double value = kInfinity;
    DiscretePath path;
    double lower_bound = 0.0;
    double upper_bound = kInfinity;
    bool converged = false;
    int iterations = 0;
    double horizon = 0.0;           // T of the estimate (argmin T for free_phi)
    double enclosing_radius = 0.0;  // R of the ball behind upper_bound
};

struct MinimizeOptions {
    int max_iters = 5000;
    double grad_tol = 1e-8;
    double decrease_tol = 1e-12;
    int multistarts = 4;  // connector, straight line, two randomized bent paths
    uint64_t seed = 12345;
    int endpoint_grading_levels = 16;  // applied when an endpoint is near collision
};

/// Fixed-time action minimization over interior nodes with endpoints pinned.
PhiEstimate minimize_action(const ProblemSpec& spec, const Configuration& x,
                            const Configuration& y, double T, int nodes,
                            const std::optional<DiscretePath>& init = {},
                            const MinimizeOptions& opts = {});

/// Model-level core (used by the reduced problems); bounds are the generic
/// coordinate-wise kinetic lower bound and the best initial action.
PhiEstimate minimize_action_model(const LagrangianModel& model, const VectorXd& q0,
                                  const VectorXd& q1, double T, int nodes,
                                  const std::optional<DiscretePath>& init,
                                  const MinimizeOptions& opts,
                                  const std::vector<DiscretePath>& extra_inits = {});

struct FreePhiOptions {
    int nodes = 129;
    double bracket_lo = 1e-3;  // times max_norm(x-y)^(1+kappa)
    double bracket_hi = 1e3;
    double golden_tol = 2e-3;  // relative tolerance on log T
    MinimizeOptions minimize;
};

/// Free-time action potential: golden-section search over log T, each
/// evaluation warm-started from the previous argmin. Returns 0 for x == y.
PhiEstimate free_phi(const ProblemSpec& spec, const Configuration& x, const Configuration& y,
                     const FreePhiOptions& opts = {});

struct HomogeneityReport {
    double phi_base = 0.0;
    double phi_scaled = 0.0;
    double ratio = 0.0;
    double expected_ratio = 0.0;  // lambda^(1-kappa)
    double relative_error = 0.0;
};

/// Checks phi(lambda x, lambda y) = lambda^(1-kappa) phi(x, y); the scaled run
/// is warm-started from the scaled argmin of the base run.
HomogeneityReport certify_homogeneity(const ProblemSpec& spec, const Configuration& x,
                                      const Configuration& y, double lambda,
                                      const FreePhiOptions& opts = {});

struct DistanceAxiomReport {
    double worst_symmetry_gap = 0.0;    // max |phi(x,y) - phi(y,x)| / scale
    double worst_triangle_excess = 0.0; // max (phi(x,y) - phi(x,z) - phi(z,y)) / scale
    double slack = 0.0;                 // allowed one-sided estimator error
    bool satisfied = false;
};

/// Symmetry and triangle inequality of the estimates on sampled triples,
/// within 3x the estimator tolerance (estimates are one-sided).
DistanceAxiomReport certify_distance_axioms(
    const ProblemSpec& spec,
    const std::vector<std::array<Configuration, 3>>& triples,
    const FreePhiOptions& opts = {}, double estimator_tol = 1e-2);

/// Gradient of the discrete action with respect to the interior nodes;
/// exposed so tests can verify first-order optimality independently.
VectorXd discrete_action_gradient(const LagrangianModel& model, const DiscretePath& path);

}  // namespace wkam
