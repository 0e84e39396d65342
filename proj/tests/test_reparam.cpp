#include "wkam/reparam.hpp"
#include "wkam/rng.hpp"
#include "test_support.hpp"
#include <doctest.h>

using namespace wkam;

namespace {

/// Speed f(anchor + offset) with knot distances formed through the exact
/// offset, so evaluations arbitrarily close to a knot carry no cancellation.
double speed_at(const ReparamMap& map, double anchor, double offset) {
    double best = 0.0;
    for (int i = 0; i < map.b.size(); ++i) {
        double base = anchor - map.b[i];
        double d = std::abs(base) < 1e-13 ? std::abs(offset) : std::abs(base + offset);
        double g = d == 0.0 ? std::numeric_limits<double>::infinity()
                            : map.c * std::pow(d, -map.kappa / (1.0 + map.kappa));
        best = std::max(best, g);
    }
    return best;
}

/// Independent quadrature of f or f^2 over [lo,hi] whose endpoints may be
/// knots: split at the midpoint and pull the algebraic endpoint singularity
/// out with the substitution t = end -+ u^p.
double quad_speed(const ReparamMap& map, double lo, double hi, bool squared) {
    double p = squared ? (1.0 + map.kappa) / (1.0 - map.kappa) : (1.0 + map.kappa);
    double mid = 0.5 * (lo + hi);
    auto half = [&](double end, double dir, double span) {
        double U = std::pow(span, 1.0 / p);
        auto g = [&](double u) {
            double f = speed_at(map, end, dir * std::pow(u, p));
            if (squared) f *= f;
            return f * p * std::pow(u, p - 1.0);
        };
        return test::adaptive_simpson(g, 1e-12 * U, U, 1e-11);
    };
    return half(lo, +1.0, mid - lo) + half(hi, -1.0, hi - mid);
}

}  // namespace

TEST_CASE("reparam with single centered target") {
    for (double kappa : {0.3, 0.5, 0.7}) {
        ReparamMap map = build_reparam(kappa, Eigen::VectorXd::Zero(1));
        CHECK(map.b[0] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(map.c == doctest::Approx(1.0 / (1.0 + kappa)).epsilon(1e-9));
        CHECK(map.value(0.0) == doctest::Approx(0.0));
        CHECK(map.value(1.0) == doctest::Approx(1.0).epsilon(1e-9));
        // F(t) = t^(1/(1+kappa)) in this case
        CHECK(map.value(0.5) == doctest::Approx(std::pow(0.5, 1.0 / (1.0 + kappa))).epsilon(1e-9));
    }
}

TEST_CASE("reparam conditions verified by independent quadrature") {
    ReparamMap map = build_reparam(0.5, Eigen::VectorXd::Constant(1, 0.4));
    double left = quad_speed(map, 0.0, map.b[0], false);
    double right = quad_speed(map, map.b[0], 1.0, false);
    CHECK(left + right == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(left == doctest::Approx(0.4).epsilon(1e-8));
    CHECK(map.value(map.b[0]) == doctest::Approx(0.4).epsilon(1e-10));
    CHECK(map.value(0.0) == doctest::Approx(0.0));
}

TEST_CASE("reparam lemma items on a fixed three-target instance") {
    Eigen::VectorXd a(3);
    a << -0.3, 0.1, 0.45;
    double kappa = 0.7;
    ReparamMap map = build_reparam(kappa, a);
    const int m = 3;

    CHECK(map.value(1.0) == doctest::Approx(1.0).epsilon(1e-9));
    for (int i = 0; i < m; ++i)
        CHECK(map.value(map.b[i]) == doctest::Approx(a[i]).epsilon(1e-9));

    // item 1 on a grid
    for (int g = 0; g <= 4096; ++g) {
        double t = g / 4096.0;
        double F = map.value(t);
        for (int i = 0; i < m; ++i) {
            double lhs = std::abs(F - a[i]);
            double rhs = 1.0 / (2.0 * m) * std::pow(std::abs(t - map.b[i]), 1.0 / (1.0 + kappa));
            CHECK(lhs >= rhs - 1e-9);
        }
    }

    // item 2: closed-form energy under the lemma bound
    double energy = map.energy(0.0, 1.0);
    double a_min = a.cwiseAbs().minCoeff();
    double bound = (4.0 + 2.0 * a_min) * (m + 1) * (1.0 + kappa) / (1.0 - kappa);
    CHECK(energy <= bound);
    // and against quadrature between knots
    double quad = 0.0;
    std::vector<double> cuts{0.0};
    for (int i = 0; i < m; ++i)
        if (map.b[i] > 0.0 && map.b[i] < 1.0) cuts.push_back(map.b[i]);
    cuts.push_back(1.0);
    std::sort(cuts.begin(), cuts.end());
    for (size_t i = 0; i + 1 < cuts.size(); ++i)
        quad += quad_speed(map, cuts[i], cuts[i + 1], true);
    CHECK(energy == doctest::Approx(quad).epsilon(1e-6));
    // the plain integral too
    double qint = 0.0;
    for (size_t i = 0; i + 1 < cuts.size(); ++i)
        qint += quad_speed(map, cuts[i], cuts[i + 1], false);
    CHECK(map.integral(0.0, 1.0) == doctest::Approx(qint).epsilon(1e-8));
}

TEST_CASE("reparam property: random instances satisfy both lemma items") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        int m = rng.uniform_int(1, 10);
        double kappa = rng.uniform(0.1, 0.9);
        Eigen::VectorXd a(m);
        for (int i = 0; i < m; ++i) a[i] = rng.uniform(-0.5 + 1e-3, 0.5 - 1e-3);
        ReparamMap map = build_reparam(kappa, a);
        int meff = static_cast<int>(map.a.size());

        CHECK(std::abs(map.value(1.0) - 1.0) <= 1e-9);
        CHECK(std::abs(map.value(0.0)) <= 1e-12);
        for (int i = 0; i < meff; ++i)
            CHECK(std::abs(map.value(map.b[i]) - map.a[i]) <= 1e-9);

        for (int g = 0; g <= 512; ++g) {
            double t = g / 512.0;
            double F = map.value(t);
            for (int i = 0; i < meff; ++i) {
                double rhs = 1.0 / (2.0 * meff) *
                             std::pow(std::abs(t - map.b[i]), 1.0 / (1.0 + kappa));
                CHECK(std::abs(F - map.a[i]) >= rhs - 1e-9);
            }
        }
        double bound = (4.0 + 2.0 * map.a.cwiseAbs().minCoeff()) * (meff + 1) * (1.0 + kappa) /
                       (1.0 - kappa);
        CHECK(map.energy(0.0, 1.0) <= bound);

        // monotonicity spot check
        double prev = map.value(0.0);
        for (int g = 1; g <= 64; ++g) {
            double cur = map.value(g / 64.0);
            CHECK(cur >= prev - 1e-14);
            prev = cur;
        }
    }
}

TEST_CASE("reparam input validation") {
    CHECK_THROWS_AS(build_reparam(1.2, Eigen::VectorXd::Zero(1)), std::invalid_argument);
    CHECK_THROWS_AS(build_reparam(0.5, Eigen::VectorXd()), std::invalid_argument);
}

TEST_CASE("reparam deduplicates nearly equal targets") {
    Eigen::VectorXd a(3);
    a << 0.2, 0.2 + 1e-15, -0.1;
    ReparamMap map = build_reparam(0.5, a);
    CHECK(map.a.size() == 2);
}
