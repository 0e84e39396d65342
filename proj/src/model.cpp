#include "wkam/model.hpp"
#include <cmath>

namespace wkam {

NBodyModel::NBodyModel(ProblemSpec spec) : spec_(std::move(spec)) {
    weights_.resize(dofs());
    for (int j = 0; j < spec_.n_bodies; ++j)
        weights_.segment(j * spec_.dim, spec_.dim).setConstant(spec_.masses[j]);
}

double NBodyModel::potential(const Eigen::Ref<const VectorXd>& q) const {
    const int d = spec_.dim, n = spec_.n_bodies;
    Eigen::Map<const Configuration> x(q.data(), d, n);
    double scale = 0.0;
    for (int j = 0; j < n; ++j) scale = std::max(scale, x.col(j).norm());
    const double floor = collision_floor(scale);
    double u = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double r = (x.col(i) - x.col(j)).norm();
            if (r < floor) return kInfinity;
            u += spec_.masses[i] * spec_.masses[j] * std::pow(r, -2.0 * spec_.kappa);
        }
    return u;
}

void NBodyModel::potential_gradient(const Eigen::Ref<const VectorXd>& q,
                                    Eigen::Ref<VectorXd> g) const {
    const int d = spec_.dim, n = spec_.n_bodies;
    Eigen::Map<const Configuration> x(q.data(), d, n);
    g.setZero();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            Eigen::VectorXd diff = x.col(i) - x.col(j);
            double r = diff.norm();
            double coeff = -2.0 * spec_.kappa * spec_.masses[i] * spec_.masses[j] *
                           std::pow(r, -2.0 * spec_.kappa - 2.0);
            g.segment(i * d, d) += coeff * diff;
            g.segment(j * d, d) -= coeff * diff;
        }
}

double NBodyModel::min_separation(const Eigen::Ref<const VectorXd>& q) const {
    const int d = spec_.dim, n = spec_.n_bodies;
    if (n < 2) return kInfinity;
    Eigen::Map<const Configuration> x(q.data(), d, n);
    double best = kInfinity;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) best = std::min(best, (x.col(i) - x.col(j)).norm());
    return best;
}

}  // namespace wkam
