#pragma once
#include "wkam/dynamics.hpp"
#include "wkam/problem.hpp"
#include <memory>

namespace wkam {

/// Mechanical system with diagonal kinetic metric and a (possibly singular)
/// force function: L(q, v) = 1/2 sum w_i v_i^2 + U(q). The trajectory
/// machinery (action quadrature, minimizers) is written against this
/// interface so reduced problems reuse it unchanged.
class LagrangianModel {
public:
    virtual ~LagrangianModel() = default;
    virtual int dofs() const = 0;
    virtual const VectorXd& mass_weights() const = 0;
    /// U(q); returns kInfinity below the collision floor.
    virtual double potential(const Eigen::Ref<const VectorXd>& q) const = 0;
    /// Euclidean gradient of U; only called at collision-free states.
    virtual void potential_gradient(const Eigen::Ref<const VectorXd>& q,
                                    Eigen::Ref<VectorXd> g) const = 0;
    /// Distance to the collision set (smallest pair separation or its analogue).
    virtual double min_separation(const Eigen::Ref<const VectorXd>& q) const = 0;

    double kinetic(const Eigen::Ref<const VectorXd>& v) const {
        return 0.5 * (mass_weights().array() * v.array().square()).sum();
    }
};

/// The N-body system itself; states are configurations flattened column-major
/// (body 0 coordinates first).
class NBodyModel : public LagrangianModel {
public:
    explicit NBodyModel(ProblemSpec spec);
    int dofs() const override { return spec_.dim * spec_.n_bodies; }
    const VectorXd& mass_weights() const override { return weights_; }
    double potential(const Eigen::Ref<const VectorXd>& q) const override;
    void potential_gradient(const Eigen::Ref<const VectorXd>& q,
                            Eigen::Ref<VectorXd> g) const override;
    double min_separation(const Eigen::Ref<const VectorXd>& q) const override;
    const ProblemSpec& spec() const { return spec_; }

private:
    ProblemSpec spec_;
    VectorXd weights_;
};

inline VectorXd flatten(const Configuration& x) {
    return Eigen::Map<const VectorXd>(x.data(), x.size());
}

inline Configuration unflatten(const Eigen::Ref<const VectorXd>& q, int dim, int n_bodies) {
    return Eigen::Map<const Configuration>(q.data(), dim, n_bodies);
}

}  // namespace wkam
