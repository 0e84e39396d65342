#include "wkam/dynamics.hpp"
#include "test_support.hpp"
#include <doctest.h>

using namespace wkam;

namespace {
ProblemSpec two_body_kepler() { return ProblemSpec::unit_masses(2, 1, 0.5); }
}

TEST_CASE("potential values") {
    ProblemSpec spec = two_body_kepler();
    Configuration x(1, 2);
    x << 0.0, 1.0;
    CHECK(potential(spec, x) == doctest::Approx(1.0));
    x << 0.0, 4.0;
    CHECK(potential(spec, x) == doctest::Approx(0.25));
    x << 1.0, 1.0;
    CHECK(potential(spec, x) == kInfinity);

    // kappa only enters through the pair distance exponent
    ProblemSpec spec7 = ProblemSpec::unit_masses(2, 1, 0.7);
    x << 0.0, 1.0;
    CHECK(potential(spec7, x) == doctest::Approx(1.0));
}

TEST_CASE("potential gradient matches finite differences") {
    Rng rng(11);
    for (double kappa : {0.3, 0.5, 0.7}) {
        ProblemSpec spec(3, 3, (VectorXd(3) << 1.0, 2.0, 0.5).finished(), kappa);
        for (int trial = 0; trial < 30; ++trial) {
            Configuration x = test::random_collisionless(rng, spec, 2.0, 0.1);
            Configuration g = potential_gradient_euclidean(spec, x);
            Configuration fd = test::fd_potential_gradient(spec, x);
            CHECK((g - fd).norm() <= 1e-6 * (1.0 + fd.norm()));
        }
    }
}

TEST_CASE("two-body attraction magnitude 1/r^2") {
    ProblemSpec spec = two_body_kepler();
    for (double r : {0.5, 1.0, 2.0, 7.0}) {
        Configuration x(1, 2);
        x << 0.0, r;
        Configuration g = potential_gradient(spec, x);  // mass gradient, unit masses
        CHECK(g(0, 0) == doctest::Approx(1.0 / (r * r)).epsilon(1e-12));
        CHECK(g(0, 1) == doctest::Approx(-1.0 / (r * r)).epsilon(1e-12));
    }
}

TEST_CASE("equilateral triangle gradient points inward") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    Configuration x(2, 3);
    x << 0.0, 1.0, 0.5, 0.0, 0.0, std::sqrt(3.0) / 2.0;
    VectorXd center = x.rowwise().mean();
    Configuration g = potential_gradient(spec, x);
    for (int j = 0; j < 3; ++j) {
        VectorXd radial = x.col(j) - center;
        double align = g.col(j).dot(radial) / (g.col(j).norm() * radial.norm());
        CHECK(align == doctest::Approx(-1.0).epsilon(1e-10));
    }
}

TEST_CASE("hamiltonian and energy") {
    ProblemSpec spec = two_body_kepler();
    Configuration x(1, 2);
    x << 0.0, 1.0;
    Configuration p = Configuration::Zero(1, 2);
    CHECK(hamiltonian(spec, x, p) == doctest::Approx(-potential(spec, x)));

    p << 1.0, -1.0;  // |p|^2 = 2 at unit masses
    CHECK(hamiltonian(spec, x, p) == doctest::Approx(0.0));

    // E = H o Leg
    Rng rng(3);
    ProblemSpec spec3(3, 2, (VectorXd(3) << 2.0, 1.0, 3.0).finished(), 0.4);
    for (int trial = 0; trial < 20; ++trial) {
        Configuration xx = test::random_collisionless(rng, spec3, 2.0, 0.2);
        Configuration v = test::random_configuration(rng, 2, 3, 1.0);
        EnergyReport rep = energy_report(spec3, xx, v);
        CHECK(rep.total_energy == doctest::Approx(rep.kinetic - rep.potential_value));
        CHECK(hamiltonian(spec3, xx, legendre(spec3, v)) ==
              doctest::Approx(rep.total_energy).epsilon(1e-12));
    }
}

TEST_CASE("energy conservation along the flow (test integrator)") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    Rng rng(17);
    for (int trial = 0; trial < 3; ++trial) {
        Configuration x = test::random_collisionless(rng, spec, 1.5, 0.5);
        Configuration v = test::random_configuration(rng, 2, 3, 0.3);
        double e0 = energy_report(spec, x, v).total_energy;
        test::integrate_motion(spec, x, v, 1.0);
        double e1 = energy_report(spec, x, v).total_energy;
        CHECK(std::abs(e1 - e0) <= 1e-6 * (1.0 + std::abs(e0)));
    }
}

TEST_CASE("central configuration: two bodies") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    CentralSearchOptions opts;
    opts.restarts = 8;
    CentralConfiguration central = find_central_configuration(spec, 5, opts);
    CHECK(central.u0 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-8));
    CHECK(central.is_minimal);
    CHECK(moment_of_inertia(spec, central.config) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(central.residual < 1e-8);
}

TEST_CASE("central configuration: Lagrange triangle") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 9);
    CHECK(central.u0 == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(central.is_minimal);
    // side length 1 at I = 1
    double side = (central.config.col(0) - central.config.col(1)).norm();
    CHECK(side == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("central configuration: collinear three-body exceeds planar minimum") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 1, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 13);

    // brute-force oracle: with COM = 0 and I = 1 the collinear shape has a
    // single degree of freedom, the gap ratio r = g1/(g1+g2)
    double best = kInfinity;
    for (int i = 1; i < 2000; ++i) {
        double r = static_cast<double>(i) / 2000.0;
        double x1 = 0.0, x2 = r, x3 = 1.0;
        double c = (x1 + x2 + x3) / 3.0;
        x1 -= c; x2 -= c; x3 -= c;
        double I = x1 * x1 + x2 * x2 + x3 * x3;
        double s = 1.0 / std::sqrt(I);
        x1 *= s; x2 *= s; x3 *= s;
        double u = 1.0 / std::abs(x2 - x1) + 1.0 / std::abs(x3 - x2) + 1.0 / std::abs(x3 - x1);
        best = std::min(best, u);
    }
    CHECK(central.u0 == doctest::Approx(best).epsilon(1e-5));
    CHECK(central.u0 > 3.0);
}

TEST_CASE("scale invariance of I^kappa U") {
    Rng rng(23);
    ProblemSpec spec(3, 2, (VectorXd(3) << 1.0, 2.0, 3.0).finished(), 0.6);
    for (int trial = 0; trial < 20; ++trial) {
        Configuration x = test::random_collisionless(rng, spec, 2.0, 0.2);
        double lambda = rng.uniform(0.1, 10.0);
        double a = std::pow(moment_of_inertia(spec, x), spec.kappa) * potential(spec, x);
        Configuration xs = lambda * x;
        double b = std::pow(moment_of_inertia(spec, xs), spec.kappa) * potential(spec, xs);
        CHECK(b == doctest::Approx(a).epsilon(1e-10));
    }
}

TEST_CASE("parabolic homothetic motion") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 21);
    REQUIRE(central.u0 == doctest::Approx(3.0).epsilon(1e-6));

    SUBCASE("scale constant c = 13.5^(1/3)") {
        CHECK(parabolic_scale_constant(central, spec) ==
              doctest::Approx(std::cbrt(13.5)).epsilon(1e-6));
    }
    SUBCASE("zero energy along the trajectory") {
        for (double t : {0.1, 1.0, 5.0}) {
            auto [x, v] = parabolic_homothetic(central, spec, t);
            CHECK(std::abs(energy_report(spec, x, v).total_energy) <= 1e-9);
        }
    }
    SUBCASE("equations of motion residual") {
        const double c = parabolic_scale_constant(central, spec);
        const double k = spec.kappa;
        for (double t : {0.1, 0.5, 2.0, 10.0}) {
            auto [x, v] = parabolic_homothetic(central, spec, t);
            double e = 1.0 / (1.0 + k);
            Configuration xdd = c * e * (e - 1.0) * std::pow(t, e - 2.0) * central.config;
            Configuration rhs = potential_gradient(spec, x);
            CHECK((xdd - rhs).norm() <= 1e-6 * rhs.norm());
        }
    }
    SUBCASE("time homogeneity") {
        auto [x1, v1] = parabolic_homothetic(central, spec, 2.0);
        auto [x2, v2] = parabolic_homothetic(central, spec, 6.0);
        double ratio = std::pow(3.0, 1.0 / 1.5);
        CHECK((x2 - ratio * x1).norm() <= 1e-10 * x2.norm());
    }
    SUBCASE("t <= 0 rejected") {
        CHECK_THROWS_AS(parabolic_homothetic(central, spec, 0.0), std::invalid_argument);
    }
}

TEST_CASE("parabolic closed-form action") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 21);
    REQUIRE(central.u0 == doctest::Approx(3.0).epsilon(1e-6));

    double value = parabolic_action_closed_form(central, spec, 1.0);
    double c = std::cbrt(13.5);
    CHECK(value == doctest::Approx(c * c / 1.5 + 9.0 / c).epsilon(1e-5));
    CHECK(value == doctest::Approx(7.5595).epsilon(1e-4));

    auto [kin, pot] = parabolic_action_terms(central, spec, 1.0);
    CHECK(std::abs(kin - pot) <= 1e-9 * kin);  // zero-energy equipartition

    // scaling in T
    CHECK(parabolic_action_closed_form(central, spec, 8.0) ==
          doctest::Approx(value * 2.0).epsilon(1e-12));
}
