#include "wkam/paths.hpp"
#include <algorithm>
#include <cmath>
#include <set>

namespace wkam {

namespace {

// 5-point Gauss-Legendre nodes/weights on (0,1)
const double kGaussNode[5] = {0.046910077030668004, 0.230765344947158450, 0.5,
                              0.769234655052841550, 0.953089922969331996};
const double kGaussWeight[5] = {0.118463442528094544, 0.239314335249683234, 0.284444444444444444,
                                0.239314335249683234, 0.118463442528094544};

const double kContainTol = 1e-12;

}  // namespace

void DiscretePath::validate() const {
    if (times.size() < 2) throw std::invalid_argument("DiscretePath: need at least two nodes");
    if (states.cols() != times.size())
        throw std::invalid_argument("DiscretePath: node/time count mismatch");
    for (int k = 0; k + 1 < times.size(); ++k)
        if (!(times[k + 1] > times[k]))
            throw std::invalid_argument("DiscretePath: times must be strictly increasing");
}

DiscretePath two_point_path(const Configuration& x, const Configuration& y, const VectorXd& times) {
    DiscretePath p;
    p.dim = static_cast<int>(x.rows());
    p.n_bodies = static_cast<int>(x.cols());
    p.times = times;
    p.states.resize(x.size(), times.size());
    VectorXd qx = flatten(x), qy = flatten(y);
    double t0 = times[0], t1 = times[times.size() - 1];
    for (int k = 0; k < times.size(); ++k) {
        double s = (times[k] - t0) / (t1 - t0);
        p.states.col(k) = (1.0 - s) * qx + s * qy;
    }
    return p;
}

MatrixXd sample_path(const DiscretePath& path, const VectorXd& times) {
    MatrixXd out(path.states.rows(), times.size());
    int k = 0;
    for (int i = 0; i < times.size(); ++i) {
        double t = std::clamp(times[i], path.times[0], path.times[path.times.size() - 1]);
        while (k + 2 < path.times.size() && path.times[k + 1] < t) ++k;
        while (k > 0 && path.times[k] > t) --k;
        double h = path.times[k + 1] - path.times[k];
        double s = (t - path.times[k]) / h;
        out.col(i) = (1.0 - s) * path.states.col(k) + s * path.states.col(k + 1);
    }
    return out;
}

DiscretePath resample_path(const DiscretePath& path, const VectorXd& times) {
    DiscretePath out;
    out.dim = path.dim;
    out.n_bodies = path.n_bodies;
    out.times = times;
    out.states = sample_path(path, times);
    return out;
}

ActionParts action_parts(const LagrangianModel& model, const DiscretePath& path) {
    path.validate();
    ActionParts parts;
    const VectorXd& w = model.mass_weights();
    VectorXd q(model.dofs());
    for (int k = 0; k + 1 < path.n_nodes(); ++k) {
        double h = path.times[k + 1] - path.times[k];
        VectorXd delta = path.states.col(k + 1) - path.states.col(k);
        parts.kinetic += 0.5 * (w.array() * delta.array().square()).sum() / h;
        double seg = 0.0;
        for (int g = 0; g < 5; ++g) {
            q = path.states.col(k) + kGaussNode[g] * delta;
            double u = model.potential(q);
            if (!std::isfinite(u)) {
                parts.potential = kInfinity;
                parts.total = kInfinity;
                return parts;
            }
            seg += kGaussWeight[g] * u;
        }
        parts.potential += h * seg;
    }
    parts.total = parts.kinetic + parts.potential;
    return parts;
}

double action(const LagrangianModel& model, const DiscretePath& path) {
    return action_parts(model, path).total;
}

double action(const ProblemSpec& spec, const DiscretePath& path) {
    return action_parts(NBodyModel(spec), path).total;
}

double masked_potential_action(const ProblemSpec& spec, const DiscretePath& path,
                               const std::function<bool(int, int)>& pair_mask) {
    path.validate();
    const int d = spec.dim, n = spec.n_bodies;
    double total = 0.0;
    for (int k = 0; k + 1 < path.n_nodes(); ++k) {
        double h = path.times[k + 1] - path.times[k];
        double seg = 0.0;
        for (int g = 0; g < 5; ++g) {
            VectorXd q = path.states.col(k) + kGaussNode[g] * (path.states.col(k + 1) - path.states.col(k));
            Eigen::Map<const Configuration> x(q.data(), d, n);
            double scale = 0.0;
            for (int j = 0; j < n; ++j) scale = std::max(scale, x.col(j).norm());
            const double floor = collision_floor(scale);
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    if (!pair_mask(i, j)) continue;
                    double r = (x.col(i) - x.col(j)).norm();
                    if (r < floor) return kInfinity;
                    seg += kGaussWeight[g] * spec.masses[i] * spec.masses[j] *
                           std::pow(r, -2.0 * spec.kappa);
                }
        }
        total += h * seg;
    }
    return total;
}

VectorXd graded_times(double t0, double t1, int n_base, const std::vector<double>& refine_at,
                      int levels) {
    const double span = t1 - t0;
    std::set<double> pts;
    for (int i = 0; i <= n_base; ++i) pts.insert(t0 + span * i / n_base);
    for (double r : refine_at) {
        if (!(r > t0 && r < t1)) continue;
        double w = 0.5 * span / n_base;
        pts.insert(r);
        for (int side = -1; side <= 1; side += 2)
            for (int l = 0; l <= 2 * levels; ++l) {
                double t = r + side * w * std::pow(2.0, -0.5 * l);
                if (t > t0 && t < t1) pts.insert(t);
            }
    }
    // enforce strictly increasing times with a relative gap guard
    std::vector<double> keep;
    const double min_gap = 1e-13 * std::max(1.0, std::abs(t0) + std::abs(t1));
    for (double t : pts)
        if (keep.empty() || t - keep.back() > min_gap) keep.push_back(t);
    keep.back() = t1;
    return Eigen::Map<VectorXd>(keep.data(), static_cast<long>(keep.size()));
}

VectorXd endpoint_graded_times(double t0, double t1, int nodes, bool grade_left, bool grade_right,
                               int levels) {
    int n_base = std::max(nodes - 1, 2);
    std::vector<double> pts;
    double span = t1 - t0;
    for (int i = 0; i <= n_base; ++i) pts.push_back(t0 + span * i / n_base);
    auto add_graded = [&](double anchor, int dir) {
        double w = span / n_base;
        for (int l = 1; l <= 2 * levels; ++l)
            pts.push_back(anchor + dir * w * std::pow(2.0, -0.5 * l));
    };
    if (grade_left) add_graded(t0, +1);
    if (grade_right) add_graded(t1, -1);
    std::sort(pts.begin(), pts.end());
    std::vector<double> keep;
    const double min_gap = 1e-13 * std::max(1.0, std::abs(t0) + std::abs(t1));
    for (double t : pts)
        if (keep.empty() || t - keep.back() > min_gap) keep.push_back(t);
    keep.back() = t1;
    return Eigen::Map<VectorXd>(keep.data(), static_cast<long>(keep.size()));
}

namespace {

/// One reparametrized leg z(tau) = start + F(tau)(p - start) on tau in [0,1],
/// returned on the rescaled interval [t_begin, t_begin + t_span], optionally
/// traversed backwards (used for the return leg).
DiscretePath build_leg(const ProblemSpec& spec, const Configuration& start, const Configuration& p,
                       double t_begin, double t_span, bool reversed, const ConnectOptions& opts) {
    const int n = spec.n_bodies;
    VectorXd qs = flatten(start), qp = flatten(p);

    // collision parameters of the linear interpolation, one per body pair
    std::vector<double> params;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Eigen::VectorXd u = start.col(i) - start.col(j);
            Eigen::VectorXd v = (p.col(i) - p.col(j)) - u;
            double v2 = v.squaredNorm();
            if (v2 < 1e-24 * (1.0 + u.squaredNorm())) continue;  // pair does not move
            double tc = -u.dot(v) / v2;
            tc = std::clamp(tc, -0.5 + 1e-9, 0.5 - 1e-9);
            params.push_back(tc);
        }

    std::optional<ReparamMap> map;
    std::vector<double> knots;
    if (!params.empty()) {
        map = build_reparam(spec.kappa, Eigen::Map<VectorXd>(params.data(),
                                                             static_cast<long>(params.size())));
        for (int i = 0; i < map->b.size(); ++i) knots.push_back(map->b[i]);
    }

    VectorXd tau = graded_times(0.0, 1.0, opts.base_intervals, knots, opts.grading_levels);
    DiscretePath leg;
    leg.dim = spec.dim;
    leg.n_bodies = n;
    leg.times.resize(tau.size());
    leg.states.resize(qs.size(), tau.size());
    for (int k = 0; k < tau.size(); ++k) {
        double u = reversed ? tau[tau.size() - 1 - k] : tau[k];
        double f = map ? std::clamp(map->value(u), 0.0, 1.0) : u;
        double tk = reversed ? (1.0 - u) : u;
        leg.times[k] = t_begin + t_span * tk;
        leg.states.col(k) = qs + f * (qp - qs);
    }
    return leg;
}

DiscretePath join_legs(const DiscretePath& first, const DiscretePath& second) {
    DiscretePath out;
    out.dim = first.dim;
    out.n_bodies = first.n_bodies;
    int n1 = first.n_nodes(), n2 = second.n_nodes();
    out.times.resize(n1 + n2 - 1);
    out.states.resize(first.states.rows(), n1 + n2 - 1);
    out.times.head(n1) = first.times;
    out.states.leftCols(n1) = first.states;
    out.times.tail(n2 - 1) = second.times.tail(n2 - 1);
    out.states.rightCols(n2 - 1) = second.states.rightCols(n2 - 1);
    return out;
}

}  // namespace

std::pair<DiscretePath, BoundCertificate> connect(const ProblemSpec& spec, const Configuration& x,
                                                  const Configuration& y, double T,
                                                  const VectorXd& center, double R,
                                                  const ConnectOptions& opts) {
    if (!(T > 0.0)) throw std::invalid_argument("connect: T must be positive");
    if (!(R > 0.0)) throw std::invalid_argument("connect: R must be positive");
    const int n = spec.n_bodies;
    for (int i = 0; i < n; ++i)
        if ((x.col(i) - center).norm() > R * (1.0 + 1e-9) ||
            (y.col(i) - center).norm() > R * (1.0 + 1e-9))
            throw std::invalid_argument("connect: x and y must be contained in B(center, R)");

    // intermediate configuration strung out along the first coordinate axis
    Configuration p(spec.dim, n);
    VectorXd v = VectorXd::Zero(spec.dim);
    v[0] = 6.0 * R;
    for (int i = 0; i < n; ++i) p.col(i) = center + static_cast<double>(i) * v;

    DiscretePath out = join_legs(build_leg(spec, x, p, 0.0, T / 2.0, false, opts),
                                 build_leg(spec, y, p, T / 2.0, T / 2.0, true, opts));

    const double k = spec.kappa, M = spec.total_mass(), N = n;
    BoundCertificate cert;
    cert.alpha_used = 640.0 * (1.0 + k) / (1.0 - k) * M * std::pow(N, 4);
    cert.beta_used = 2.0 * (1.0 + k) / (1.0 - k) * std::pow(N, 4.0 * k + 2.0) * M * M;
    cert.radius = R;
    cert.horizon = T;
    cert.kinetic_bound = cert.alpha_used * R * R / T;
    cert.potential_bound = cert.beta_used * T * std::pow(R, -2.0 * k);
    cert.bound_value = cert.kinetic_bound + cert.potential_bound;

    ActionParts parts = action_parts(NBodyModel(spec), out);
    cert.kinetic_computed = parts.kinetic;
    cert.potential_computed = parts.potential;
    cert.action_computed = parts.total;
    cert.kinetic_ok = parts.kinetic <= cert.kinetic_bound;
    cert.potential_ok = parts.potential <= cert.potential_bound;
    cert.satisfied = parts.total <= cert.bound_value;

    cert.containment_ok = true;
    const double contain = 6.0 * N * R * (1.0 + kContainTol);
    for (int c = 0; c < out.n_nodes(); ++c) {
        Configuration xc = out.config(c);
        for (int i = 0; i < n; ++i)
            if ((xc.col(i) - center).norm() > contain) cert.containment_ok = false;
    }
    return {out, cert};
}

std::pair<double, double> clustered_bound_constants(const ProblemSpec& spec) {
    const double k = spec.kappa, M = spec.total_mass(), N = spec.n_bodies;
    double grow = std::pow(48.0 * N, 2.0 * N);  // (R/eps)^2 worst case
    double alpha1 = 640.0 * 4.0 * (1.0 + k) / (1.0 - k) * M * std::pow(N, 4) * grow;
    double beta1 = 2.0 * std::pow(2.0, -2.0 * k) * (1.0 + k) / (1.0 - k) *
                       std::pow(N, 4.0 * k + 2.0) * M * M +
                   N * N * M * M * std::pow(24.0 * N, -2.0 * k);
    return {alpha1, beta1};
}

std::pair<DiscretePath, BoundCertificate> connect_clustered(const ProblemSpec& spec,
                                                            const Configuration& x,
                                                            const Configuration& y, double T,
                                                            const ConnectOptions& opts) {
    if (!(T > 0.0)) throw std::invalid_argument("connect_clustered: T must be positive");
    const int n = spec.n_bodies;
    const double k = spec.kappa, M = spec.total_mass(), N = n;

    double diff = max_norm(x - y);
    double eps = std::max(diff * (1.0 + 1e-9), 1e-8 * (1.0 + max_norm(x)));
    double lambda = 24.0 * N;

    ClusterPartition part = cluster_partition(x, lambda, eps);
    std::vector<std::vector<int>> clusters = assign_clusters(x, y, part);
    const double Rc = 2.0 * part.size_R;  // per-cluster ball radius

    BoundCertificate cert;
    cert.horizon = T;
    cert.epsilon = eps;
    cert.cluster_size_R = part.size_R;
    cert.n_clusters = static_cast<int>(clusters.size());
    cert.radius = Rc;

    // connect each cluster inside its doubled ball and merge onto a common grid
    std::vector<DiscretePath> legs;
    std::set<double> merged_times;
    std::vector<int> body_cluster(static_cast<size_t>(n), -1);
    for (size_t ci = 0; ci < clusters.size(); ++ci) {
        const auto& idx = clusters[ci];
        for (int i : idx) body_cluster[static_cast<size_t>(i)] = static_cast<int>(ci);
        VectorXd msub(idx.size());
        Configuration xs(spec.dim, idx.size()), ys(spec.dim, idx.size());
        for (size_t a = 0; a < idx.size(); ++a) {
            msub[static_cast<long>(a)] = spec.masses[idx[a]];
            xs.col(static_cast<long>(a)) = x.col(idx[a]);
            ys.col(static_cast<long>(a)) = y.col(idx[a]);
        }
        ProblemSpec sub(static_cast<int>(idx.size()), spec.dim, msub, spec.kappa);
        // cluster center: the partition center covering these bodies
        VectorXd ctr;
        for (int j = 0; j < part.center_points.cols(); ++j)
            if ((xs.col(0) - part.center_points.col(j)).norm() <= Rc * (1.0 + 1e-9)) {
                ctr = part.center_points.col(j);
                break;
            }
        auto [leg, sub_cert] = connect(sub, xs, ys, T, ctr, Rc, opts);
        if (!(sub_cert.satisfied && sub_cert.kinetic_ok && sub_cert.potential_ok &&
              sub_cert.containment_ok))
            cert.subcertificates_ok = false;
        for (int t = 0; t < leg.n_nodes(); ++t) merged_times.insert(leg.times[t]);
        legs.push_back(std::move(leg));
    }

    std::vector<double> tv(merged_times.begin(), merged_times.end());
    VectorXd times = Eigen::Map<VectorXd>(tv.data(), static_cast<long>(tv.size()));

    DiscretePath out;
    out.dim = spec.dim;
    out.n_bodies = n;
    out.times = times;
    out.states.resize(spec.dim * n, times.size());
    for (size_t ci = 0; ci < clusters.size(); ++ci) {
        MatrixXd samples = sample_path(legs[ci], times);
        for (size_t a = 0; a < clusters[ci].size(); ++a) {
            int body = clusters[ci][a];
            out.states.middleRows(body * spec.dim, spec.dim) =
                samples.middleRows(static_cast<long>(a) * spec.dim, spec.dim);
        }
    }

    ActionParts parts = action_parts(NBodyModel(spec), out);
    cert.kinetic_computed = parts.kinetic;
    cert.potential_computed = parts.potential;
    cert.action_computed = parts.total;

    cert.inter_potential_computed = masked_potential_action(
        spec, out, [&](int i, int j) { return body_cluster[static_cast<size_t>(i)] !=
                                               body_cluster[static_cast<size_t>(j)]; });
    cert.inter_potential_bound =
        N * N * M * M * std::pow(24.0 * N, -2.0 * k) * std::pow(part.size_R, -2.0 * k) * T;

    auto [alpha1, beta1] = clustered_bound_constants(spec);
    cert.alpha_used = alpha1;
    cert.beta_used = beta1;
    cert.kinetic_bound = alpha1 * eps * eps / T;
    cert.potential_bound = beta1 * T * std::pow(eps, -2.0 * k);
    cert.bound_value = cert.kinetic_bound + cert.potential_bound;
    cert.kinetic_ok = parts.kinetic <= cert.kinetic_bound;
    cert.potential_ok = parts.potential <= cert.potential_bound;
    cert.satisfied = parts.total <= cert.bound_value &&
                     cert.inter_potential_computed <= cert.inter_potential_bound &&
                     cert.subcertificates_ok;
    cert.containment_ok = cert.subcertificates_ok;
    return {out, cert};
}

}  // namespace wkam
