#include "wkam/weak_kam.hpp"
#include "wkam/parallel.hpp"
#include "wkam/rng.hpp"
#include <algorithm>
#include <cmath>
#include <set>

namespace wkam {

namespace {

/// Reduced mechanical model behind the grid solver; collision floor matches
/// the full problem through the lift.
class ReducedModel : public LagrangianModel {
public:
    ReducedModel(ReducedKind kind, double kappa, double m1, double m2, double mu, double u_coeff)
        : kind_(kind), kappa_(kappa), m1_(m1), m2_(m2) {
        weights_ = VectorXd::Constant(kind == ReducedKind::CollinearTwoBody ? 1 : 2, mu);
        u_coeff_ = u_coeff;
    }

    int dofs() const override { return static_cast<int>(weights_.size()); }
    const VectorXd& mass_weights() const override { return weights_; }

    double separation(const Eigen::Ref<const VectorXd>& q) const {
        return kind_ == ReducedKind::CollinearTwoBody ? q[0] : 2.0 * q.norm();
    }

    double body_scale(const Eigen::Ref<const VectorXd>& q) const {
        if (kind_ == ReducedKind::CollinearTwoBody)
            return std::abs(q[0]) * std::max(m1_, m2_) / (m1_ + m2_);
        return q.norm();
    }

    double potential(const Eigen::Ref<const VectorXd>& q) const override {
        double s = separation(q);
        if (!(s > collision_floor(body_scale(q)))) return kInfinity;
        return u_coeff_ * std::pow(s, -2.0 * kappa_);
    }

    void potential_gradient(const Eigen::Ref<const VectorXd>& q,
                            Eigen::Ref<VectorXd> g) const override {
        if (kind_ == ReducedKind::CollinearTwoBody) {
            g[0] = -2.0 * kappa_ * u_coeff_ * std::pow(q[0], -2.0 * kappa_ - 1.0);
        } else {
            double r = q.norm();
            double coeff = -2.0 * kappa_ * u_coeff_ * std::pow(2.0, -2.0 * kappa_) *
                           std::pow(r, -2.0 * kappa_ - 2.0);
            g = coeff * q;
        }
    }

    double min_separation(const Eigen::Ref<const VectorXd>& q) const override {
        return separation(q);
    }

private:
    ReducedKind kind_;
    double kappa_, m1_, m2_, u_coeff_;
    VectorXd weights_;
};

}  // namespace

ReducedProblem::ReducedProblem(ReducedKind kind, double kappa, double m1, double m2)
    : kind_(kind), kappa_(kappa), m1_(m1), m2_(m2) {
    if (!(kappa > 0.0 && kappa < 1.0))
        throw std::invalid_argument("ReducedProblem: kappa must lie in (0,1)");
    if (!(m1 > 0.0 && m2 > 0.0)) throw std::invalid_argument("ReducedProblem: masses must be positive");
    if (kind == ReducedKind::CollinearTwoBody) {
        mu_ = m1 * m2 / (m1 + m2);
        u_coeff_ = m1 * m2;
    } else {
        if (std::abs(m1 - m2) > 1e-12)
            throw std::invalid_argument("ReducedProblem: planar center-fix reduction needs equal masses");
        mu_ = 2.0 * m1;
        u_coeff_ = m1 * m2;  // potential = u_coeff (2|x|)^(-2k), folded in below
    }
    model_ = std::make_unique<ReducedModel>(kind, kappa, m1, m2, mu_, u_coeff_);
}

double ReducedProblem::separation(const Eigen::Ref<const VectorXd>& q) const {
    return static_cast<const ReducedModel&>(*model_).separation(q);
}

double ReducedProblem::reduced_potential(const Eigen::Ref<const VectorXd>& q) const {
    return model_->potential(q);
}

ProblemSpec ReducedProblem::full_spec() const {
    VectorXd m(2);
    m << m1_, m2_;
    return ProblemSpec(2, kind_ == ReducedKind::CollinearTwoBody ? 1 : 2, m, kappa_);
}

Configuration ReducedProblem::lift(const Eigen::Ref<const VectorXd>& q) const {
    if (kind_ == ReducedKind::CollinearTwoBody) {
        Configuration x(1, 2);
        double M = m1_ + m2_;
        x(0, 0) = -m2_ / M * q[0];
        x(0, 1) = m1_ / M * q[0];
        return x;
    }
    Configuration x(2, 2);
    x.col(0) = q;
    x.col(1) = -q;
    return x;
}

DiscretePath ReducedProblem::lift_path(const DiscretePath& reduced) const {
    DiscretePath out;
    out.times = reduced.times;
    out.dim = kind_ == ReducedKind::CollinearTwoBody ? 1 : 2;
    out.n_bodies = 2;
    out.states.resize(out.dim * 2, reduced.n_nodes());
    for (int k = 0; k < reduced.n_nodes(); ++k)
        out.states.col(k) = flatten(lift(reduced.states.col(k)));
    return out;
}

double ReducedProblem::domination_modulus() const {
    double base = std::sqrt(2.0 * mu_ * potential_coeff() *
                            (kind_ == ReducedKind::CollinearTwoBody
                                 ? 1.0
                                 : std::pow(2.0, -2.0 * kappa_)));
    if (kind_ == ReducedKind::CollinearTwoBody) return base / (1.0 - kappa_);
    return base * (1.0 / (1.0 - kappa_) + 3.14159265358979324);
}

double ReducedProblem::search_radius(const Eigen::Ref<const VectorXd>& q, double t,
                                     double eta) const {
    double u = reduced_potential(q);
    double a = t * eta / mu_;
    double k0 = a + std::sqrt(a * a + 2.0 * t * t * u / mu_);
    return std::max(1.0, k0);
}

VectorXd Grid::point(int idx) const {
    VectorXd p = origin;
    p[0] += h * (idx % dims[0]);
    if (p.size() > 1) p[1] += h * (idx / dims[0]);
    return p;
}

Grid Grid::line(double lo, double hi, double h) {
    Grid g;
    g.origin = VectorXd::Constant(1, lo);
    g.h = h;
    g.dims = {static_cast<int>(std::llround((hi - lo) / h)) + 1, 1};
    return g;
}

Grid Grid::box(double lo0, double hi0, double lo1, double hi1, double h) {
    Grid g;
    g.origin.resize(2);
    g.origin << lo0, lo1;
    g.h = h;
    g.dims = {static_cast<int>(std::llround((hi0 - lo0) / h)) + 1,
              static_cast<int>(std::llround((hi1 - lo1) / h)) + 1};
    return g;
}

void GridFunction::normalize() { values.array() -= values[reference_node]; }

PhiGridCache::PhiGridCache(const ReducedProblem& problem, const Grid& grid, double t,
                           int path_nodes)
    : problem_(problem), grid_(grid), t_(t), path_nodes_(path_nodes) {}

namespace {

/// Fixed-time reduced estimate with a straight start plus one outward bend;
/// the bend guards against collision-grazing chords and long-horizon hovering.
double reduced_phi_fixed_time(const ReducedProblem& problem, const VectorXd& qa,
                              const VectorXd& qb, double t, int path_nodes,
                              DiscretePath* argmin_out = nullptr) {
    const LagrangianModel& model = problem.model();
    MinimizeOptions mopts;
    mopts.grad_tol = 1e-9;
    mopts.max_iters = 2000;
    mopts.multistarts = 0;  // inits built here

    std::vector<DiscretePath> inits;
    {
        int nb = 17;
        DiscretePath bent;
        bent.times = VectorXd::LinSpaced(nb, 0.0, t);
        bent.dim = 1;
        bent.n_bodies = model.dofs();
        bent.states.resize(model.dofs(), nb);
        VectorXd dir;
        if (model.dofs() == 1) {
            dir = VectorXd::Constant(1, 1.0);
        } else {
            dir = qa + qb;
            double n = dir.norm();
            dir = n > 1e-12 ? VectorXd(dir / n) : VectorXd::Unit(2, 0);
        }
        double amp = 0.3 * std::max({problem.separation(qa), problem.separation(qb),
                                     std::pow(t, 1.0 / (1.0 + problem.kappa()))});
        for (int k = 0; k < nb; ++k) {
            double s = bent.times[k] / t;
            bent.states.col(k) =
                (1.0 - s) * qa + s * qb + std::sin(3.14159265358979324 * s) * amp * dir;
        }
        inits.push_back(std::move(bent));
    }

    PhiEstimate est = minimize_action_model(model, qa, qb, t, path_nodes, {}, mopts, inits);
    if (argmin_out) *argmin_out = est.path;
    return est.value;
}

/// Free-time reduced estimate: golden section over log T around the
/// zero-energy transit scale. An edge minimum is reported, not fatal - the
/// result is an upper approximation either way.
double reduced_phi_free(const ReducedProblem& problem, const VectorXd& qa, const VectorXd& qb,
                        int path_nodes, bool* edge_flag = nullptr) {
    double d_body = problem.maxnorm_factor() * (qa - qb).norm();
    if (d_body == 0.0) return 0.0;
    double center = std::pow(d_body, 1.0 + problem.kappa());
    double lo = std::log(1e-3 * center), hi = std::log(1e3 * center);

    std::map<double, double> evals;
    auto eval_at = [&](double u) {
        auto it = evals.find(u);
        if (it != evals.end()) return it->second;
        double v = reduced_phi_fixed_time(problem, qa, qb, std::exp(u), path_nodes);
        evals.emplace(u, v);
        return v;
    };

    const double gr = 0.6180339887498949;
    double a = lo, b = hi;
    eval_at(a);
    eval_at(b);
    while (b - a > 5e-3) {
        double c = b - gr * (b - a);
        double d = a + gr * (b - a);
        if (eval_at(c) <= eval_at(d)) b = d; else a = c;
    }

    double best_u = lo, best = kInfinity;
    for (const auto& [u, v] : evals)
        if (v < best) {
            best = v;
            best_u = u;
        }
    if (edge_flag) *edge_flag = best_u <= lo + 1e-12 || best_u >= hi - 1e-12;
    return best;
}

}  // namespace

double PhiGridCache::get(int i, int j) {
    auto key = std::minmax(i, j);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    double v = reduced_phi_fixed_time(problem_, grid_.point(key.first), grid_.point(key.second),
                                      t_, path_nodes_);
    cache_.emplace(key, v);
    return v;
}

namespace {

std::vector<int> ball_nodes(const Grid& grid, const VectorXd& center, double radius) {
    std::vector<int> out;
    if (grid.dims[1] == 1) {
        int i0 = static_cast<int>(std::floor((center[0] - radius - grid.origin[0]) / grid.h));
        int i1 = static_cast<int>(std::ceil((center[0] + radius - grid.origin[0]) / grid.h));
        for (int i = std::max(0, i0); i <= std::min(grid.dims[0] - 1, i1); ++i)
            out.push_back(i);
        return out;
    }
    int i0 = std::max(0, static_cast<int>(std::floor((center[0] - radius - grid.origin[0]) / grid.h)));
    int i1 = std::min(grid.dims[0] - 1,
                      static_cast<int>(std::ceil((center[0] + radius - grid.origin[0]) / grid.h)));
    int j0 = std::max(0, static_cast<int>(std::floor((center[1] - radius - grid.origin[1]) / grid.h)));
    int j1 = std::min(grid.dims[1] - 1,
                      static_cast<int>(std::ceil((center[1] + radius - grid.origin[1]) / grid.h)));
    const double r2 = radius * radius * (1.0 + 1e-12);
    for (int j = j0; j <= j1; ++j)
        for (int i = i0; i <= i1; ++i) {
            VectorXd p = grid.point(grid.index(i, j));
            if ((p - center).squaredNorm() <= r2) out.push_back(grid.index(i, j));
        }
    return out;
}

bool ball_inside_domain(const Grid& grid, const std::vector<VectorXd>& excluded_points,
                        const VectorXd& center, double radius) {
    for (int a = 0; a < center.size(); ++a) {
        double lo = grid.origin[a], hi = grid.origin[a] + grid.h * (grid.dims[a == 0 ? 0 : 1] - 1);
        if (center[a] - radius < lo - 1e-9 * grid.h) return false;
        if (center[a] + radius > hi + 1e-9 * grid.h) return false;
    }
    for (const VectorXd& p : excluded_points)
        if ((p - center).norm() <= radius) return false;
    return true;
}

}  // namespace

void prebuild_cache(const ReducedProblem& problem, const GridFunction& u, double t,
                    PhiGridCache& cache, int workers, double eta_override) {
    const Grid& grid = u.grid;
    double eta = eta_override > 0.0 ? eta_override : problem.domination_modulus();
    std::set<std::pair<int, int>> wanted;
    for (int idx = 0; idx < grid.size(); ++idx) {
        if (u.excluded[static_cast<size_t>(idx)]) continue;
        VectorXd q = grid.point(idx);
        double radius = problem.search_radius(q, t, eta);
        for (int cand : ball_nodes(grid, q, radius))
            if (!u.excluded[static_cast<size_t>(cand)]) wanted.insert(std::minmax(idx, cand));
    }
    std::vector<std::pair<int, int>> pairs(wanted.begin(), wanted.end());
    std::vector<double> values(pairs.size());
    parallel_for(static_cast<int>(pairs.size()), workers, [&](int k) {
        values[static_cast<size_t>(k)] =
            reduced_phi_fixed_time(problem, grid.point(pairs[static_cast<size_t>(k)].first),
                                   grid.point(pairs[static_cast<size_t>(k)].second), t,
                                   cache.path_nodes());
    });
    for (size_t k = 0; k < pairs.size(); ++k)
        cache.set(pairs[k].first, pairs[k].second, values[k]);
}

LaxStepResult lax_oleinik_step(const ReducedProblem& problem, const GridFunction& u, double t,
                               const LaxOptions& opts) {
    if (!(t > 0.0)) throw std::invalid_argument("lax_oleinik_step: t must be positive");
    const Grid& grid = u.grid;
    double eta = opts.eta_override > 0.0 ? opts.eta_override : problem.domination_modulus();

    std::unique_ptr<PhiGridCache> local;
    PhiGridCache* cache = opts.cache;
    if (!cache) {
        local = std::make_unique<PhiGridCache>(problem, grid, t, opts.path_nodes);
        cache = local.get();
    }

    LaxStepResult res;
    res.u = u;
    res.trusted.assign(static_cast<size_t>(grid.size()), 0);
    const bool backward = opts.direction == SemigroupDirection::Backward;

    std::vector<VectorXd> excluded_points;
    for (int idx = 0; idx < grid.size(); ++idx)
        if (u.excluded[static_cast<size_t>(idx)]) excluded_points.push_back(grid.point(idx));

    for (int idx = 0; idx < grid.size(); ++idx) {
        if (u.excluded[static_cast<size_t>(idx)]) continue;
        VectorXd q = grid.point(idx);
        double radius = problem.search_radius(q, t, eta);
        double best = backward ? kInfinity : -kInfinity;
        for (int cand : ball_nodes(grid, q, radius)) {
            if (u.excluded[static_cast<size_t>(cand)]) continue;
            double phi = cache->get(idx, cand);
            double val = backward ? u.values[cand] + phi : u.values[cand] - phi;
            if (backward ? val < best : val > best) best = val;
        }
        res.u.values[idx] = best;
        res.trusted[static_cast<size_t>(idx)] =
            ball_inside_domain(grid, excluded_points, q, radius) ? 1 : 0;
    }

    res.shift = res.u.values[res.u.reference_node];
    res.u.normalize();
    return res;
}

std::pair<GridFunction, SemigroupReport> iterate_to_fixed_point(const ReducedProblem& problem,
                                                                const GridFunction& u0, double t,
                                                                double tol,
                                                                const IterateOptions& opts) {
    if (!(tol > 0.0)) throw std::invalid_argument("iterate_to_fixed_point: tol must be positive");
    PhiGridCache cache(problem, u0.grid, t, opts.lax.path_nodes);
    LaxOptions lax = opts.lax;
    lax.cache = &cache;

    GridFunction u = u0;
    u.normalize();
    SemigroupReport rep;
    rep.t_step = t;

    std::vector<uint8_t> trusted;
    for (int it = 0; it < opts.max_iters; ++it) {
        LaxStepResult step = lax_oleinik_step(problem, u, t, lax);
        if (trusted.empty()) trusted = step.trusted;
        double change = 0.0;
        // the additive constant is estimated by the mean raw change on the
        // trusted region (T u = u + c t at a fixed point)
        double drift_sum = 0.0;
        int drift_n = 0;
        for (int idx = 0; idx < u.grid.size(); ++idx)
            if (trusted[static_cast<size_t>(idx)]) {
                change = std::max(change, std::abs(step.u.values[idx] - u.values[idx]));
                drift_sum += step.u.values[idx] + step.shift - u.values[idx];
                ++drift_n;
            }
        u = std::move(step.u);
        rep.sup_change = change;
        rep.drift_c = drift_n > 0 ? drift_sum / drift_n / t : step.shift / t;
        rep.iterations = it + 1;
        if (change < tol) {
            rep.converged = true;
            break;
        }
    }

    DominationReport dom = check_domination(problem, u, opts.domination_pairs, opts.seed);
    rep.dominated_violation = dom.worst_excess;
    return {u, rep};
}

double kepler_oracle(KeplerOracle name, const Eigen::Ref<const VectorXd>& point) {
    switch (name) {
        case KeplerOracle::UPlus:
            return 2.0 * std::sqrt(std::abs(point[0] - point[1]));
        case KeplerOracle::UMinus:
            return -2.0 * std::sqrt(std::abs(point[0] - point[1]));
        case KeplerOracle::BusemannBPlus:
            return point[0] >= point[1] ? kepler_oracle(KeplerOracle::UMinus, point)
                                        : kepler_oracle(KeplerOracle::UPlus, point);
        case KeplerOracle::RotationInvariant:
            return -std::pow(point[0] * point[0] + point[1] * point[1], 0.25);
        case KeplerOracle::PlanarBusemann: {
            double r = std::sqrt(point[0] * point[0] + point[1] * point[1]);
            return -std::sqrt(std::max(r + point[0], 0.0));
        }
    }
    throw std::invalid_argument("kepler_oracle: unknown oracle");
}

GridFunction sample_oracle(const ReducedProblem& problem, KeplerOracle name, const Grid& grid,
                           double exclusion_radius) {
    GridFunction u;
    u.grid = grid;
    u.values.resize(grid.size());
    u.excluded.assign(static_cast<size_t>(grid.size()), 0);

    VectorXd domain_center = grid.origin;
    domain_center[0] += 0.5 * grid.h * (grid.dims[0] - 1);
    if (domain_center.size() > 1) domain_center[1] += 0.5 * grid.h * (grid.dims[1] - 1);

    double best_center = kInfinity;
    for (int idx = 0; idx < grid.size(); ++idx) {
        VectorXd q = grid.point(idx);
        bool excl = problem.kind() == ReducedKind::PlanarKeplerCenterFix
                        ? q.norm() < exclusion_radius
                        : q[0] < exclusion_radius;
        u.excluded[static_cast<size_t>(idx)] = excl ? 1 : 0;
        Configuration x = problem.lift(q);
        VectorXd arg = problem.kind() == ReducedKind::CollinearTwoBody
                           ? (VectorXd(2) << x(0, 0), x(0, 1)).finished()
                           : VectorXd(q);
        u.values[idx] = kepler_oracle(name, arg);
        double dc = (q - domain_center).norm();
        if (!excl && dc < best_center) {
            best_center = dc;
            u.reference_node = idx;
        }
    }
    return u;
}

DominationReport check_domination(const ReducedProblem& problem, const GridFunction& u,
                                  int n_pairs, uint64_t seed, int path_nodes) {
    Rng rng(seed);
    std::vector<int> usable;
    for (int idx = 0; idx < u.grid.size(); ++idx)
        if (!u.excluded[static_cast<size_t>(idx)]) usable.push_back(idx);
    DominationReport rep;
    if (usable.size() < 2) return rep;
    for (int p = 0; p < n_pairs; ++p) {
        int i = usable[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(usable.size()) - 1))];
        int j = i;
        while (j == i)
            j = usable[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(usable.size()) - 1))];
        VectorXd qi = u.grid.point(i), qj = u.grid.point(j);
        double phi = reduced_phi_free(problem, qi, qj, path_nodes);
        double excess = std::abs(u.values[i] - u.values[j]) - phi;
        rep.worst_excess = std::max(rep.worst_excess, excess);
        ++rep.pairs_checked;
    }
    return rep;
}

EikonalReport check_eikonal_residual(const ReducedProblem& problem, const GridFunction& u,
                                     const EikonalOptions& opts) {
    const Grid& grid = u.grid;
    const double h = grid.h;
    const bool planar = problem.kind() == ReducedKind::PlanarKeplerCenterFix;
    EikonalReport rep;
    rep.residual_fitted.setConstant(grid.size(), std::nan(""));
    rep.residual_displayed.setConstant(grid.size(), std::nan(""));

    auto excluded = [&](int i, int j) {
        if (i < 0 || i >= grid.dims[0] || j < 0 || j >= grid.dims[1]) return true;
        return u.excluded[static_cast<size_t>(grid.index(i, j))] != 0;
    };
    auto in_kink_collar = [&](const VectorXd& q) {
        if (!opts.planar_busemann_kink) return false;
        double w = opts.kink_collar_cells * h;
        return std::abs(q[1]) <= w && q[0] <= w;
    };

    // |grad u|^2 by central differences and the basis sep_base^(-2k), where
    // sep_base is the separation (collinear) or the first-body radius (planar)
    std::vector<double> lhs(static_cast<size_t>(grid.size()), std::nan(""));
    std::vector<double> basis(static_cast<size_t>(grid.size()), std::nan(""));
    std::vector<uint8_t> testable(static_cast<size_t>(grid.size()), 0);

    for (int j = 0; j < grid.dims[1]; ++j)
        for (int i = 0; i < grid.dims[0]; ++i) {
            int idx = grid.index(i, j);
            if (excluded(i, j) || excluded(i - 1, j) || excluded(i + 1, j)) continue;
            if (planar && (excluded(i, j - 1) || excluded(i, j + 1))) continue;
            VectorXd q = grid.point(idx);
            double gx = (u.values[grid.index(i + 1, j)] - u.values[grid.index(i - 1, j)]) / (2 * h);
            double g2 = gx * gx;
            if (planar) {
                double gy =
                    (u.values[grid.index(i, j + 1)] - u.values[grid.index(i, j - 1)]) / (2 * h);
                g2 += gy * gy;
            } else {
                g2 *= 2.0;  // lifted collinear gradient: u_x^2 + u_y^2 = 2 f'(s)^2
            }
            double sep_base = planar ? q.norm() : q[0];
            lhs[static_cast<size_t>(idx)] = g2;
            basis[static_cast<size_t>(idx)] = std::pow(sep_base, -2.0 * problem.kappa());
            if (!in_kink_collar(q)) testable[static_cast<size_t>(idx)] = 1;
        }

    double num = 0.0, den = 0.0;
    for (int idx = 0; idx < grid.size(); ++idx)
        if (testable[static_cast<size_t>(idx)]) {
            num += lhs[static_cast<size_t>(idx)] * basis[static_cast<size_t>(idx)];
            den += basis[static_cast<size_t>(idx)] * basis[static_cast<size_t>(idx)];
        }
    rep.c_fit = den > 0.0 ? num / den : 0.0;

    for (int idx = 0; idx < grid.size(); ++idx) {
        if (std::isnan(lhs[static_cast<size_t>(idx)])) continue;
        double rf = lhs[static_cast<size_t>(idx)] - rep.c_fit * basis[static_cast<size_t>(idx)];
        double rd = lhs[static_cast<size_t>(idx)] - rep.c_displayed * basis[static_cast<size_t>(idx)];
        rep.residual_fitted[idx] = rf;
        rep.residual_displayed[idx] = rd;
        if (testable[static_cast<size_t>(idx)]) {
            rep.sup_residual_fitted = std::max(rep.sup_residual_fitted, std::abs(rf));
            rep.sup_residual_displayed = std::max(rep.sup_residual_displayed, std::abs(rd));
        }
    }

    // one-sided subsolution check, enforced at kinks as well: the extreme
    // one-sided slope bounds the superdifferential of a concave kink
    for (int j = 0; j < grid.dims[1]; ++j)
        for (int i = 0; i < grid.dims[0]; ++i) {
            int idx = grid.index(i, j);
            if (excluded(i, j)) continue;
            double g2 = 0.0;
            bool any = false;
            auto axis_slope = [&](int di, int dj) {
                double worst = 0.0;
                bool have = false;
                if (!excluded(i + di, j + dj)) {
                    double s = (u.values[grid.index(i + di, j + dj)] - u.values[idx]) / h;
                    worst = std::max(worst, std::abs(s));
                    have = true;
                }
                if (!excluded(i - di, j - dj)) {
                    double s = (u.values[idx] - u.values[grid.index(i - di, j - dj)]) / h;
                    worst = std::max(worst, std::abs(s));
                    have = true;
                }
                any = any || have;
                return worst;
            };
            double sx = axis_slope(1, 0);
            g2 += sx * sx;
            if (planar) {
                double sy = axis_slope(0, 1);
                g2 += sy * sy;
            } else {
                g2 *= 2.0;
            }
            if (!any) continue;
            VectorXd q = grid.point(idx);
            double sep_base = planar ? q.norm() : q[0];
            double rhs = rep.c_fit * std::pow(sep_base, -2.0 * problem.kappa());
            rep.worst_subsolution_excess = std::max(rep.worst_subsolution_excess, g2 - rhs);
        }
    return rep;
}

CalibratedRay extract_calibrated_ray(const ReducedProblem& problem, const GridFunction& u,
                                     int start_node, double t_max, double dt,
                                     const LaxOptions& opts) {
    if (!(dt > 0.0 && t_max > 0.0))
        throw std::invalid_argument("extract_calibrated_ray: need positive dt and t_max");
    const Grid& grid = u.grid;
    double eta = opts.eta_override > 0.0 ? opts.eta_override : problem.domination_modulus();

    std::unique_ptr<PhiGridCache> local;
    PhiGridCache* cache = opts.cache;
    if (!cache) {
        local = std::make_unique<PhiGridCache>(problem, grid, dt, opts.path_nodes);
        cache = local.get();
    }

    CalibratedRay ray;
    ray.node_sequence.push_back(start_node);
    std::vector<double> defects;
    std::vector<DiscretePath> segments;

    int current = start_node;
    int n_steps = static_cast<int>(std::llround(t_max / dt));
    for (int s = 0; s < n_steps; ++s) {
        VectorXd q = grid.point(current);
        double radius = problem.search_radius(q, dt, eta);
        int best = -1;
        double best_val = kInfinity;
        for (int cand : ball_nodes(grid, q, radius)) {
            if (u.excluded[static_cast<size_t>(cand)]) continue;
            double val = u.values[cand] + cache->get(current, cand);
            if (val < best_val) {
                best_val = val;
                best = cand;
            }
        }
        if (best < 0) {
            ray.truncated = true;
            break;
        }
        defects.push_back(best_val - u.values[current]);

        DiscretePath seg;
        reduced_phi_fixed_time(problem, grid.point(current), grid.point(best), dt,
                               opts.path_nodes, &seg);
        seg.times.array() += s * dt;
        segments.push_back(problem.lift_path(seg));
        ray.node_sequence.push_back(best);

        // boundary ring: stop rather than wrap around the domain edge
        int bi = best % grid.dims[0], bj = best / grid.dims[0];
        bool edge = bi == 0 || bi == grid.dims[0] - 1 ||
                    (grid.dims[1] > 1 && (bj == 0 || bj == grid.dims[1] - 1));
        current = best;
        if (edge) {
            ray.truncated = true;
            break;
        }
    }

    ray.step_defects = Eigen::Map<VectorXd>(defects.data(), static_cast<long>(defects.size()));
    if (!segments.empty()) {
        DiscretePath glued = segments[0];
        for (size_t s = 1; s < segments.size(); ++s) {
            int n1 = glued.n_nodes(), n2 = segments[s].n_nodes();
            DiscretePath next;
            next.dim = glued.dim;
            next.n_bodies = glued.n_bodies;
            next.times.resize(n1 + n2 - 1);
            next.states.resize(glued.states.rows(), n1 + n2 - 1);
            next.times.head(n1) = glued.times;
            next.states.leftCols(n1) = glued.states;
            next.times.tail(n2 - 1) = segments[s].times.tail(n2 - 1);
            next.states.rightCols(n2 - 1) = segments[s].states.rightCols(n2 - 1);
            glued = std::move(next);
        }
        ray.path = std::move(glued);
    }
    return ray;
}

}  // namespace wkam
