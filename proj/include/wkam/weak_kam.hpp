#pragma once
#include "wkam/action_potential.hpp"
#include <map>
#include <memory>

namespace wkam {

/// Reductions on which the grid solver runs. Both reproduce the full-problem
/// action on lifted paths:
///  - collinear two-body: separation s > 0, kinetic (m1 m2 / 2M) sdot^2,
///    potential m1 m2 s^(-2 kappa);
///  - planar center-fix: position x of the first body with the second at -x
///    (equal masses), kinetic m |xdot|^2, potential m^2 (2|x|)^(-2 kappa).
enum class ReducedKind { CollinearTwoBody, PlanarKeplerCenterFix };

class ReducedProblem {
public:
    ReducedProblem(ReducedKind kind, double kappa, double m1 = 1.0, double m2 = 1.0);

    ReducedKind kind() const { return kind_; }
    double kappa() const { return kappa_; }
    int dofs() const { return kind_ == ReducedKind::CollinearTwoBody ? 1 : 2; }

    /// coefficient of 1/2 |qdot|^2 in the reduced kinetic energy
    double reduced_mass() const { return mu_; }
    /// U_red(q) = potential_coeff * separation(q)^(-2 kappa)
    double potential_coeff() const { return u_coeff_; }
    double separation(const Eigen::Ref<const VectorXd>& q) const;
    double reduced_potential(const Eigen::Ref<const VectorXd>& q) const;

    const LagrangianModel& model() const { return *model_; }
    ProblemSpec full_spec() const;
    Configuration lift(const Eigen::Ref<const VectorXd>& q) const;
    DiscretePath lift_path(const DiscretePath& reduced) const;

    /// body max-norm displacement per unit reduced-coordinate displacement
    double maxnorm_factor() const { return kind_ == ReducedKind::CollinearTwoBody ? 0.5 : 1.0; }

    /// Hoelder modulus of dominated functions in reduced coordinates:
    /// phi(q1,q2) <= eta |q1-q2|^(1-kappa). Radial transfer gives
    /// sqrt(2 mu u_c)/(1-kappa); the planar case pays an extra arc term.
    double domination_modulus() const;

    /// Truncation radius for the Lax-Oleinik infimum at node q: points farther
    /// than this cannot realize the minimum for any eta-dominated function.
    /// Mirrors k_0(R,t) with the stationary-path bound phi(q,q,t) <= t U(q).
    double search_radius(const Eigen::Ref<const VectorXd>& q, double t, double eta) const;

private:
    ReducedKind kind_;
    double kappa_, m1_, m2_, mu_, u_coeff_;
    std::unique_ptr<LagrangianModel> model_;
};

/// Rectangular lattice (1-D or 2-D) with spacing h.
struct Grid {
    VectorXd origin;           // lower corner
    double h = 0.0;
    std::array<int, 2> dims = {0, 1};  // dims[1] == 1 for 1-D grids

    int size() const { return dims[0] * dims[1]; }
    int index(int i, int j = 0) const { return i + dims[0] * j; }
    VectorXd point(int idx) const;
    static Grid line(double lo, double hi, double h);
    static Grid box(double lo0, double hi0, double lo1, double hi1, double h);
};

/// Candidate weak KAM solution sampled on a grid; values are compared modulo
/// constants by pinning the reference node to zero.
struct GridFunction {
    Grid grid;
    VectorXd values;
    std::vector<uint8_t> excluded;  // collision neighborhood, never updated
    int reference_node = 0;

    void normalize();  // subtract the reference value
};

enum class SemigroupDirection { Backward, Forward };

struct SemigroupReport {
    double t_step = 0.0;
    double sup_change = kInfinity;
    double dominated_violation = 0.0;
    double drift_c = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Cache of pairwise fixed-time action-potential estimates on a grid.
/// Symmetric storage; built lazily and safe to reuse across iterations.
class PhiGridCache {
public:
    PhiGridCache(const ReducedProblem& problem, const Grid& grid, double t, int path_nodes = 49);
    double get(int i, int j);
    /// Overrides an entry (symmetric); lets tests drive the operator with a
    /// synthetic cost table.
    void set(int i, int j, double value) { cache_[std::minmax(i, j)] = value; }
    int evaluations() const { return static_cast<int>(cache_.size()); }
    int path_nodes() const { return path_nodes_; }

private:
    const ReducedProblem& problem_;
    Grid grid_;
    double t_;
    int path_nodes_;
    std::map<std::pair<int, int>, double> cache_;
};

struct LaxOptions {
    SemigroupDirection direction = SemigroupDirection::Backward;
    double eta_override = 0.0;  // 0: use the problem's domination modulus
    int path_nodes = 49;
    PhiGridCache* cache = nullptr;  // shared across calls when non-null
};

struct LaxStepResult {
    GridFunction u;               // normalized output
    double shift = 0.0;           // constant subtracted at the reference node
    std::vector<uint8_t> trusted; // nodes whose search ball stayed inside the domain
};

/// One application of the Lax-Oleinik operator on the grid:
/// backward (T_t^- u)(x) = min_y u(y) + phi(x,y,t), forward with sup and -phi.
LaxStepResult lax_oleinik_step(const ReducedProblem& problem, const GridFunction& u, double t,
                               const LaxOptions& opts = {});

struct IterateOptions {
    int max_iters = 1500;  // the normalized drift can decay like 1/k
    int domination_pairs = 24;
    uint64_t seed = 7;
    LaxOptions lax;
};

/// Computes every phi entry a step on u would request, in parallel (the
/// lazy path is single-threaded). Results are identical either way.
void prebuild_cache(const ReducedProblem& problem, const GridFunction& u, double t,
                    PhiGridCache& cache, int workers, double eta_override = 0.0);

/// Repeats normalized Lax-Oleinik steps until the sup-change on trusted nodes
/// drops below tol; reports the residual drift constant per unit time.
std::pair<GridFunction, SemigroupReport> iterate_to_fixed_point(const ReducedProblem& problem,
                                                                const GridFunction& u0, double t,
                                                                double tol,
                                                                const IterateOptions& opts = {});

enum class KeplerOracle { UPlus, UMinus, BusemannBPlus, RotationInvariant, PlanarBusemann };

/// Closed-form Kepler solutions. Collinear oracles take the two body
/// positions (x, y); planar oracles take the first-body position (x1, x2).
double kepler_oracle(KeplerOracle name, const Eigen::Ref<const VectorXd>& point);

/// Samples an oracle on a grid through the problem's lift.
GridFunction sample_oracle(const ReducedProblem& problem, KeplerOracle name, const Grid& grid,
                           double exclusion_radius = 0.0);

struct DominationReport {
    double worst_excess = -kInfinity;  // max of u(x)-u(y)-phi(x,y); <= 0 means dominated
    int pairs_checked = 0;
};

/// Evaluates u(x)-u(y)-phi_hat(x,y) on sampled node pairs (free-time phi).
DominationReport check_domination(const ReducedProblem& problem, const GridFunction& u,
                                  int n_pairs, uint64_t seed, int path_nodes = 49);

struct EikonalReport {
    VectorXd residual_fitted;      // |grad u|^2 - c_fit sep^(-2k), per node (NaN when untestable)
    VectorXd residual_displayed;   // against the constant 2 of the displayed equation
    double c_fit = 0.0;            // least-squares constant in |grad u|^2 = c sep^(-2k)
    double c_displayed = 2.0;
    double sup_residual_fitted = 0.0;     // over interior nodes away from kink collars
    double sup_residual_displayed = 0.0;
    double worst_subsolution_excess = 0.0;  // positive part of |grad u|^2 - rhs, one-sided diffs
};

struct EikonalOptions {
    double kink_collar_cells = 2.0;  // half-width of the excluded kink strip, in cells
    bool planar_busemann_kink = false;  // exclude the negative x1 half-line
};

/// Central finite-difference eikonal residual on the grid. The gradient is
/// squared in Euclidean coordinates of the reduced variable (collinear:
/// u_x^2 + u_y^2 = 2 f'(s)^2 after the lift), so the displayed collinear
/// equation has right-hand side 2 sep^(-2 kappa).
EikonalReport check_eikonal_residual(const ReducedProblem& problem, const GridFunction& u,
                                     const EikonalOptions& opts = {});

struct CalibratedRay {
    DiscretePath path;           // lifted to full configurations
    std::vector<int> node_sequence;
    VectorXd step_defects;       // u(x_k) -> u(x_{k+1}) calibration defect per step
    bool truncated = false;      // hit the domain boundary before t_max
};

/// Greedy descent along the Lax-Oleinik argmin, concatenating the minimizing
/// sub-paths; for a fixed point the output calibrates u up to grid tolerance.
CalibratedRay extract_calibrated_ray(const ReducedProblem& problem, const GridFunction& u,
                                     int start_node, double t_max, double dt,
                                     const LaxOptions& opts = {});

/// Grid tolerance used by the acceptance checks: one cell of variation.
inline double grid_tolerance(double h) { return h; }

}  // namespace wkam
