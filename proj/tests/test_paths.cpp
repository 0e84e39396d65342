#include "wkam/paths.hpp"
#include "wkam/dynamics.hpp"
#include "wkam/io.hpp"
#include "test_support.hpp"
#include <doctest.h>

using namespace wkam;

TEST_CASE("stationary path action is T * U") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    Configuration x(2, 2);
    x << 0.0, 2.0, 0.0, 0.0;
    double T = 3.0;
    DiscretePath p = two_point_path(x, x, VectorXd::LinSpaced(9, 0.0, T));
    ActionParts parts = action_parts(NBodyModel(spec), p);
    CHECK(parts.kinetic == doctest::Approx(0.0));
    CHECK(parts.total == doctest::Approx(T * potential(spec, x)).epsilon(1e-12));
}

TEST_CASE("segment through a collision yields the infinity sentinel") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    Configuration x(1, 2), y(1, 2);
    x << -1.0, 1.0;
    y << 1.0, -1.0;  // bodies swap: the straight segment collides at midtime
    DiscretePath p = two_point_path(x, y, VectorXd::LinSpaced(2, 0.0, 1.0));
    CHECK(action(spec, p) == kInfinity);
}

TEST_CASE("parabolic path action matches the closed form") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 21);
    REQUIRE(central.u0 == doctest::Approx(3.0).epsilon(1e-6));

    double T = 1.0;
    VectorXd times = endpoint_graded_times(0.0, T, 2000, true, false, 24);
    DiscretePath path;
    path.dim = 2;
    path.n_bodies = 3;
    path.times = times;
    path.states.resize(6, times.size());
    path.states.col(0).setZero();
    for (int k = 1; k < times.size(); ++k)
        path.states.col(k) = flatten(parabolic_homothetic(central, spec, times[k]).first);

    double closed = parabolic_action_closed_form(central, spec, T);
    ActionParts parts = action_parts(NBodyModel(spec), path);
    CHECK(parts.total == doctest::Approx(closed).epsilon(1e-3));
}

TEST_CASE("action quadrature converges at second order on the parabolic path") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 4);
    auto discretize = [&](int n) {
        // away from t = 0 the path is smooth; convergence order is measured
        // on [0.5, 1.5]
        VectorXd times = VectorXd::LinSpaced(n, 0.5, 1.5);
        DiscretePath p;
        p.dim = 2;
        p.n_bodies = 2;
        p.times = times;
        p.states.resize(4, n);
        for (int k = 0; k < n; ++k)
            p.states.col(k) = flatten(parabolic_homothetic(central, spec, times[k]).first);
        return action(spec, p);
    };
    double a1 = discretize(65), a2 = discretize(129), a3 = discretize(257);
    double order = std::log2(std::abs(a1 - a2) / std::abs(a2 - a3));
    CHECK(order >= 1.9);
}

TEST_CASE("connect: degenerate single body and x == y") {
    ProblemSpec spec = ProblemSpec::unit_masses(1, 2, 0.5);
    VectorXd center = VectorXd::Zero(2);
    Configuration p(2, 1);
    p.setZero();  // the intermediate configuration itself
    auto [path, cert] = connect(spec, p, p, 2.0, center, 1.0);
    CHECK(cert.satisfied);
    CHECK(cert.action_computed == doctest::Approx(0.0));
    CHECK(cert.containment_ok);
}

TEST_CASE("connect: x == y still passes the certificate") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    Rng rng(31);
    Configuration x = test::random_configuration(rng, 2, 3, 0.8);
    VectorXd center = VectorXd::Zero(2);
    auto [path, cert] = connect(spec, x, x, 2.0, center, 1.0);
    CHECK(cert.satisfied);
    CHECK(cert.kinetic_ok);
    CHECK(cert.potential_ok);
    CHECK(cert.containment_ok);
    CHECK(path.config(0).isApprox(x, 1e-12));
    CHECK(path.config(path.n_nodes() - 1).isApprox(x, 1e-12));
}

TEST_CASE("connect: random pairs satisfy Theorem-1 style certificates") {
    for (double kappa : {0.3, 0.5, 0.7}) {
        ProblemSpec spec = ProblemSpec::unit_masses(2, 2, kappa);
        VectorXd center = VectorXd::Zero(2);
        Rng rng(1234);
        for (int seed = 0; seed < 25; ++seed) {
            Configuration x = test::random_configuration(rng, 2, 2, 1.0 / std::sqrt(2.0));
            Configuration y = test::random_configuration(rng, 2, 2, 1.0 / std::sqrt(2.0));
            auto [path, cert] = connect(spec, x, y, 2.0, center, 1.0);
            CHECK(std::isfinite(cert.action_computed));
            CHECK(cert.satisfied);
            CHECK(cert.kinetic_ok);
            CHECK(cert.potential_ok);
            CHECK(cert.containment_ok);
        }
    }
}

TEST_CASE("connect: precondition violations") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    VectorXd center = VectorXd::Zero(2);
    Configuration in(2, 2), out(2, 2);
    in << 0.1, -0.1, 0.0, 0.0;
    out << 5.0, -0.1, 0.0, 0.0;
    CHECK_THROWS_AS(connect(spec, out, in, 2.0, center, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(connect(spec, in, in, 0.0, center, 1.0), std::invalid_argument);
}

TEST_CASE("connect: time rescaling scales kinetic and potential parts exactly") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    Rng rng(77);
    Configuration x = test::random_configuration(rng, 2, 3, 0.7);
    Configuration y = test::random_configuration(rng, 2, 3, 0.7);
    VectorXd center = VectorXd::Zero(2);
    auto [path, cert] = connect(spec, x, y, 2.0, center, 1.0);

    double S = 5.0;
    DiscretePath rescaled = path;
    rescaled.times = path.times * (S / 2.0);
    ActionParts a = action_parts(NBodyModel(spec), path);
    ActionParts b = action_parts(NBodyModel(spec), rescaled);
    CHECK(b.kinetic == doctest::Approx(a.kinetic * 2.0 / S).epsilon(1e-12));
    CHECK(b.potential == doctest::Approx(a.potential * S / 2.0).epsilon(1e-12));
}

TEST_CASE("connect_clustered: x == y stays near stationary") {
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    Rng rng(5);
    Configuration x = test::random_collisionless(rng, spec, 1.0, 0.3);
    auto [path, cert] = connect_clustered(spec, x, x, 1.0);
    CHECK(cert.satisfied);
    CHECK(cert.subcertificates_ok);
    // every body stays within its cluster containment ball
    double max_dev = 0.0;
    for (int k = 0; k < path.n_nodes(); ++k)
        max_dev = std::max(max_dev, max_norm(path.config(k) - x));
    CHECK(max_dev <= 12.0 * 3.0 * cert.cluster_size_R * (1.0 + 1e-9));
    // action close to the stationary value
    CHECK(cert.action_computed == doctest::Approx(potential(spec, x) * 1.0).epsilon(1e-2));
}

TEST_CASE("connect_clustered: two separated groups decompose") {
    // lambda = 24N = 72, so the far body must clear (2 lambda)^2 eps to stay
    // its own cluster after the near pair merges
    ProblemSpec spec = ProblemSpec::unit_masses(3, 1, 0.5);
    Configuration x(1, 3), y(1, 3);
    x << 0.0, 0.4, 1.0e5;
    y << 0.05, 0.35, 1.0e5;  // third body far away and fixed
    auto [path, cert] = connect_clustered(spec, x, y, 2.0);
    CHECK(cert.n_clusters == 2);
    CHECK(cert.satisfied);
    CHECK(cert.inter_potential_computed <= cert.inter_potential_bound);
    CHECK(path.config(0).isApprox(x, 1e-12));
    CHECK(path.config(path.n_nodes() - 1).isApprox(y, 1e-12));
}

TEST_CASE("connect_clustered: loop bound mu T^((1-k)/(1+k))") {
    // phi(x,x,T) through the clustered connector obeys the corollary scaling
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    Rng rng(13);
    Configuration x = test::random_collisionless(rng, spec, 1.0, 0.5);
    auto [alpha1, beta1] = clustered_bound_constants(spec);
    for (double T : {0.5, 1.0, 4.0}) {
        auto [path, cert] = connect_clustered(spec, x, x, T);
        double mu = alpha1 + beta1;
        double k = spec.kappa;
        // with eps = T^(1/(1+k)) the certificate bound collapses to
        // mu T^((1-k)/(1+k)); the realized eps is never larger
        double eps_star = std::pow(T, 1.0 / (1.0 + k));
        double loop_bound = mu * std::pow(T, (1.0 - k) / (1.0 + k));
        CHECK(alpha1 * eps_star * eps_star / T + beta1 * T * std::pow(eps_star, -2.0 * k) ==
              doctest::Approx(loop_bound).epsilon(1e-12));
        CHECK(cert.action_computed <= loop_bound * (1.0 + 1e-9));
    }
}

TEST_CASE("path CSV round trip") {
    Rng rng(3);
    Configuration x = test::random_configuration(rng, 3, 2, 1.0);
    Configuration y = test::random_configuration(rng, 3, 2, 1.0);
    DiscretePath p = two_point_path(x, y, VectorXd::LinSpaced(7, 0.0, 2.0));
    DiscretePath q = path_from_csv(path_to_csv(p));
    CHECK(q.dim == p.dim);
    CHECK(q.n_bodies == p.n_bodies);
    CHECK((q.times - p.times).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((q.states - p.states).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("certificate JSON carries the constants") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    Configuration x(2, 2), y(2, 2);
    x << 0.3, -0.3, 0.0, 0.0;
    y << 0.0, 0.0, 0.3, -0.3;
    auto [path, cert] = connect(spec, x, y, 2.0, VectorXd::Zero(2), 1.0);
    ordered_json j = certificate_to_json(cert);
    CHECK(j["alpha_used"].get<double>() == doctest::Approx(640.0 * 3.0 * 2.0 * 16.0));
    CHECK(j["beta_used"].get<double>() == doctest::Approx(2.0 * 3.0 * 16.0 * 4.0));
    CHECK(j["satisfied"].get<bool>());
}
