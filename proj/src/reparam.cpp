#include "wkam/reparam.hpp"
#include <algorithm>
#include <cmath>
#include <vector>

namespace wkam {

namespace {

double sgn(double x) { return x < 0.0 ? -1.0 : (x > 0.0 ? 1.0 : 0.0); }

/// Piecewise closed-form integrals of f_{b,c} and f_{b,c}^2. On the cell owned
/// by knot b_i (delimited by midpoints of consecutive knots) f equals
/// g_c(t - b_i), whose antiderivative is c(1+k) sign(x)|x|^(1/(1+k)).
struct SpeedField {
    const Eigen::VectorXd& b;
    double c, kappa;

    double anti_f(double x) const {
        return c * (1.0 + kappa) * sgn(x) * std::pow(std::abs(x), 1.0 / (1.0 + kappa));
    }
    double anti_f2(double x) const {
        return c * c * (1.0 + kappa) / (1.0 - kappa) * sgn(x) *
               std::pow(std::abs(x), (1.0 - kappa) / (1.0 + kappa));
    }

    template <class Anti>
    double integrate(double t0, double t1, Anti&& anti) const {
        if (t0 > t1) return -integrate(t1, t0, anti);
        const int m = static_cast<int>(b.size());
        double total = 0.0;
        double lo = t0;
        for (int i = 0; i < m; ++i) {
            double hi = (i + 1 < m) ? 0.5 * (b[i] + b[i + 1]) : t1;
            hi = std::min(hi, t1);
            if (hi > lo) {
                total += anti(hi - b[i]) - anti(lo - b[i]);
                lo = hi;
            }
            if (lo >= t1) break;
        }
        return total;
    }

    double int_f(double t0, double t1) const {
        return integrate(t0, t1, [this](double x) { return anti_f(x); });
    }
    double int_f2(double t0, double t1) const {
        return integrate(t0, t1, [this](double x) { return anti_f2(x); });
    }
    double eval(double t) const {
        double best = 0.0;
        for (int i = 0; i < b.size(); ++i) {
            double d = std::abs(t - b[i]);
            double g = d == 0.0 ? std::numeric_limits<double>::infinity()
                                : c * std::pow(d, -kappa / (1.0 + kappa));
            best = std::max(best, g);
        }
        return best;
    }
};

/// Solves int_0^g f_{b',c} = w for g; the integral is strictly increasing.
double invert_primitive(const SpeedField& f, double w) {
    if (w == 0.0) return 0.0;
    double lo, hi;
    if (w > 0.0) {
        lo = 0.0;
        hi = 1.0;
        while (f.int_f(0.0, hi) < w) hi *= 2.0;
    } else {
        hi = 0.0;
        lo = -1.0;
        while (f.int_f(0.0, lo) > w) lo *= 2.0;
    }
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        double v = f.int_f(0.0, mid);
        if (v < w) lo = mid; else hi = mid;
        if (hi - lo < 1e-16 * (1.0 + std::abs(mid))) break;
    }
    return 0.5 * (lo + hi);
}

/// Knots for a given speed scale: gap recursion B_i = 2^-k [A_i / (c(1+k))]^(1+k),
/// then the offset of b_1 from the monotone equation F(b_1) = a_1.
Eigen::VectorXd knots_for_scale(const Eigen::VectorXd& a, double kappa, double c) {
    const int m = static_cast<int>(a.size());
    Eigen::VectorXd bshift(m);  // knots with b_1 pinned at 0
    bshift[0] = 0.0;
    for (int i = 0; i + 1 < m; ++i) {
        double gap = std::pow(2.0, -kappa) *
                     std::pow((a[i + 1] - a[i]) / (c * (1.0 + kappa)), 1.0 + kappa);
        bshift[i + 1] = bshift[i] + gap;
    }
    SpeedField f{bshift, c, kappa};
    // F(b_1) = a_1 becomes int_0^gamma f_{b',c} = -a_1 with gamma = -b_1
    double gamma = invert_primitive(f, -a[0]);
    return (bshift.array() - gamma).matrix();
}

}  // namespace

double ReparamMap::value(double t) const {
    SpeedField f{b, c, kappa};
    return f.int_f(0.0, t);
}

double ReparamMap::speed(double t) const {
    SpeedField f{b, c, kappa};
    return f.eval(t);
}

double ReparamMap::integral(double t0, double t1) const {
    SpeedField f{b, c, kappa};
    return f.int_f(t0, t1);
}

double ReparamMap::energy(double t0, double t1) const {
    SpeedField f{b, c, kappa};
    return f.int_f2(t0, t1);
}

ReparamMap build_reparam(double kappa, Eigen::VectorXd a_in) {
    if (!(kappa > 0.0 && kappa < 1.0))
        throw std::invalid_argument("build_reparam: kappa must lie in (0,1)");
    if (a_in.size() < 1) throw std::invalid_argument("build_reparam: need at least one target");

    std::vector<double> vals(a_in.data(), a_in.data() + a_in.size());
    std::sort(vals.begin(), vals.end());
    std::vector<double> dedup;
    for (double v : vals)
        if (dedup.empty() || v - dedup.back() > 1e-12) dedup.push_back(v);
    Eigen::VectorXd a = Eigen::Map<Eigen::VectorXd>(dedup.data(), static_cast<long>(dedup.size()));
    const int m = static_cast<int>(a.size());

    double a_min = a.cwiseAbs().minCoeff();
    double c_lo = 1.0 / (2.0 * m * (1.0 + kappa));
    double c_hi = 2.0 + a_min;

    auto total = [&](double c) {
        Eigen::VectorXd b = knots_for_scale(a, kappa, c);
        SpeedField f{b, c, kappa};
        return f.int_f(0.0, 1.0);
    };

    double d_lo = total(c_lo), d_hi = total(c_hi);
    if (!(d_lo <= 1.0 && d_hi >= 1.0))
        throw std::runtime_error("build_reparam: bisection bracket for the speed scale "
                                 "failed to straddle 1");
    double c = 0.5 * (c_lo + c_hi);
    for (int it = 0; it < 200; ++it) {
        c = 0.5 * (c_lo + c_hi);
        double d = total(c);
        if (std::abs(d - 1.0) <= 1e-13) break;
        if (d < 1.0) c_lo = c; else c_hi = c;
    }

    ReparamMap map;
    map.kappa = kappa;
    map.a = std::move(a);
    map.c = c;
    map.b = knots_for_scale(map.a, kappa, c);
    return map;
}

}  // namespace wkam
