#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>

namespace wkam {

struct LbfgsOptions {
    int max_iters = 5000;
    double grad_tol = 1e-8;       // stop when ||g||_inf < grad_tol (1 + |f|)
    double decrease_tol = 1e-12;  // or relative decrease below this over `stall_window` steps
    int stall_window = 5;
    int memory = 8;
    int max_line_search = 60;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    bool converged = false;
    bool stalled = false;  // stopped through the decrease criterion
    double grad_norm_inf = std::numeric_limits<double>::infinity();
};

/// Limited-memory BFGS with Armijo backtracking. The objective may return
/// +inf (rejected state); the line search then shrinks, which keeps iterates
/// clear of collision configurations. fg(x, grad) must fill grad whenever the
/// value is finite.
inline LbfgsResult lbfgs_minimize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& fg,
    Eigen::VectorXd x0, const LbfgsOptions& opts = {}) {
    using Eigen::VectorXd;
    LbfgsResult res;
    const long n = x0.size();
    VectorXd g(n), g_new(n), d(n), x_new(n);
    double f = fg(x0, g);
    if (!std::isfinite(f)) {
        res.x = std::move(x0);
        res.f = f;
        return res;
    }

    std::deque<VectorXd> s_hist, y_hist;
    std::deque<double> rho_hist;
    std::deque<double> recent;
    VectorXd x = std::move(x0);

    for (int it = 0; it < opts.max_iters; ++it) {
        res.iterations = it;
        res.grad_norm_inf = g.lpNorm<Eigen::Infinity>();
        if (res.grad_norm_inf < opts.grad_tol * (1.0 + std::abs(f))) {
            res.converged = true;
            break;
        }

        // two-loop recursion
        d = -g;
        std::vector<double> alpha(s_hist.size());
        for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
            alpha[static_cast<size_t>(i)] =
                rho_hist[static_cast<size_t>(i)] * s_hist[static_cast<size_t>(i)].dot(d);
            d -= alpha[static_cast<size_t>(i)] * y_hist[static_cast<size_t>(i)];
        }
        if (!s_hist.empty()) {
            const VectorXd& s = s_hist.back();
            const VectorXd& y = y_hist.back();
            d *= s.dot(y) / y.squaredNorm();
        }
        for (size_t i = 0; i < s_hist.size(); ++i) {
            double beta = rho_hist[i] * y_hist[i].dot(d);
            d += (alpha[i] - beta) * s_hist[i];
        }

        double slope = g.dot(d);
        if (!(slope < 0.0)) {  // fall back to steepest descent
            d = -g;
            slope = -g.squaredNorm();
        }

        double step = 1.0;
        double f_new = std::numeric_limits<double>::infinity();
        bool accepted = false;
        for (int ls = 0; ls < opts.max_line_search; ++ls) {
            x_new = x + step * d;
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new <= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // resolution of the line search exhausted

        VectorXd s = x_new - x;
        VectorXd y = g_new - g;
        double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > opts.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }

        double drop = f - f_new;
        x.swap(x_new);
        f = f_new;
        g.swap(g_new);

        recent.push_back(drop);
        if (static_cast<int>(recent.size()) > opts.stall_window) recent.pop_front();
        if (static_cast<int>(recent.size()) == opts.stall_window) {
            double total = 0.0;
            for (double r : recent) total += r;
            if (total < opts.decrease_tol * (1.0 + std::abs(f))) {
                res.converged = true;
                res.stalled = true;
                res.iterations = it + 1;
                break;
            }
        }
    }

    res.x = std::move(x);
    res.f = f;
    res.grad_norm_inf = g.lpNorm<Eigen::Infinity>();
    return res;
}

}  // namespace wkam
