#include "wkam/action_potential.hpp"
#include "wkam/dynamics.hpp"
#include "test_support.hpp"
#include <doctest.h>

using namespace wkam;

namespace {

Configuration collinear_pair(double separation) {
    Configuration x(1, 2);
    x << -0.5 * separation, 0.5 * separation;
    return x;
}

}  // namespace

TEST_CASE("minimize_action: stationary endpoints at short horizon") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    Configuration x = collinear_pair(10.0);  // U = 0.1
    double T = 0.05;
    PhiEstimate est = minimize_action(spec, x, x, T, 33, {}, {});
    CHECK(est.converged);
    CHECK(est.value == doctest::Approx(T * potential(spec, x)).epsilon(1e-3));
    CHECK(est.value >= est.lower_bound);
    CHECK(est.value <= est.upper_bound * (1.0 + 1e-9));
}

TEST_CASE("minimize_action: kinetic lower bound holds for random pairs") {
    Rng rng(8);
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    for (int trial = 0; trial < 5; ++trial) {
        Configuration x = test::random_collisionless(rng, spec, 1.0, 0.2);
        Configuration y = test::random_collisionless(rng, spec, 1.0, 0.2);
        double T = rng.uniform(0.5, 2.0);
        PhiEstimate est = minimize_action(spec, x, y, T, 49, {}, {});
        CHECK(est.value >= spec.min_mass() / (2.0 * T) * std::pow(max_norm(x - y), 2) - 1e-12);
        CHECK(est.value <= est.upper_bound * (1.0 + 1e-9));
    }
}

TEST_CASE("minimize_action: matches the zero-energy expansion at the transit time") {
    // collinear two-body 1 -> 4, kappa = 1/2: free action 2(sqrt4 - sqrt1) = 2
    // reached at the parabolic transit time T = (1/3)(4^1.5 - 1)
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    double T = (std::pow(4.0, 1.5) - 1.0) / 3.0;
    PhiEstimate est = minimize_action(spec, collinear_pair(1.0), collinear_pair(4.0), T, 129, {}, {});
    CHECK(est.converged);
    CHECK(est.value == doctest::Approx(2.0).epsilon(0.01));
}

TEST_CASE("converged minimizers pass an independent first-order check") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    Rng rng(14);
    Configuration x = test::random_collisionless(rng, spec, 1.0, 0.4);
    Configuration y = test::random_collisionless(rng, spec, 1.0, 0.4);
    PhiEstimate est = minimize_action(spec, x, y, 1.0, 49, {}, {});
    REQUIRE(est.converged);
    // convergence can be claimed through the stall criterion, so the
    // independent stationarity tolerance is looser than grad_tol
    VectorXd grad = discrete_action_gradient(NBodyModel(spec), est.path);
    CHECK(grad.lpNorm<Eigen::Infinity>() <= 1e-5 * (1.0 + std::abs(est.value)));
}

TEST_CASE("discrete action gradient matches finite differences") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 2, 0.5);
    Rng rng(4);
    Configuration x = test::random_collisionless(rng, spec, 1.0, 0.5);
    Configuration y = test::random_collisionless(rng, spec, 1.0, 0.5);
    DiscretePath p = two_point_path(x, y, VectorXd::LinSpaced(9, 0.0, 1.0));
    // bend it so the gradient is generic
    for (int k = 1; k + 1 < p.n_nodes(); ++k)
        p.states.col(k).array() += 0.05 * std::sin(1.0 + k);

    NBodyModel model(spec);
    VectorXd g = discrete_action_gradient(model, p);
    double a0 = action(model, p);
    int interior = p.n_nodes() - 2;
    const double h = 1e-6;
    int idx = 0;
    for (int k = 1; k <= interior; ++k)
        for (int r = 0; r < p.states.rows(); ++r, ++idx) {
            DiscretePath q = p;
            q.states(r, k) += h;
            double fd = (action(model, q) - a0) / h;
            CHECK(g[idx] == doctest::Approx(fd).epsilon(5e-4));
        }
}

TEST_CASE("free_phi: identical endpoints give zero") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    Configuration x = collinear_pair(2.0);
    PhiEstimate est = free_phi(spec, x, x);
    CHECK(est.value == 0.0);
    CHECK(est.converged);
}

TEST_CASE("free_phi: two-body expansion oracle 2(sqrt(s2) - sqrt(s1))") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    FreePhiOptions opts;
    opts.nodes = 129;
    PhiEstimate est = free_phi(spec, collinear_pair(1.0), collinear_pair(4.0), opts);
    CHECK(est.value == doctest::Approx(2.0).epsilon(0.01));
    CHECK(est.value >= est.lower_bound);

    // Hoelder cap from the clustered constants
    auto [alpha1, beta1] = clustered_bound_constants(spec);
    double eta = alpha1 + beta1;
    CHECK(est.value <= eta * std::pow(max_norm(collinear_pair(1.0) - collinear_pair(4.0)),
                                      1.0 - spec.kappa));
}

TEST_CASE("free_phi: monotone node refinement never increases the value") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    double T = (std::pow(4.0, 1.5) - 1.0) / 3.0;
    PhiEstimate coarse = minimize_action(spec, collinear_pair(1.0), collinear_pair(4.0), T, 65,
                                         {}, {});
    PhiEstimate fine = minimize_action(spec, collinear_pair(1.0), collinear_pair(4.0), T, 129,
                                       coarse.path, {});
    CHECK(fine.value <= coarse.value + 1e-9);
}

TEST_CASE("certify_homogeneity at lambda = 1 and lambda = 4") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    FreePhiOptions opts;
    opts.nodes = 65;
    HomogeneityReport unit = certify_homogeneity(spec, collinear_pair(1.0), collinear_pair(4.0),
                                                 1.0, opts);
    CHECK(unit.ratio == doctest::Approx(1.0));

    HomogeneityReport rep = certify_homogeneity(spec, collinear_pair(1.0), collinear_pair(4.0),
                                                4.0, opts);
    CHECK(rep.expected_ratio == doctest::Approx(2.0));
    CHECK(rep.relative_error <= 0.02);

    HomogeneityReport down = certify_homogeneity(spec, collinear_pair(1.0), collinear_pair(4.0),
                                                 0.25, opts);
    CHECK(down.expected_ratio == doctest::Approx(0.5));
    CHECK(down.relative_error <= 0.02);
}

TEST_CASE("certify_distance_axioms: calibrated ray triples are tight") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    std::vector<std::array<Configuration, 3>> triples;
    triples.push_back({collinear_pair(1.0), collinear_pair(4.0), collinear_pair(2.25)});
    FreePhiOptions opts;
    opts.nodes = 65;
    DistanceAxiomReport rep = certify_distance_axioms(spec, triples, opts);
    CHECK(rep.satisfied);
    // along the homothetic ray the triangle inequality is an equality:
    // 2(sqrt(4)-1) = 2(sqrt(2.25)-1) + 2(sqrt(4)-sqrt(2.25))
    CHECK(rep.worst_triangle_excess <= rep.slack);
    CHECK(rep.worst_symmetry_gap <= rep.slack);
}

TEST_CASE("local Lipschitz bound phi(z, z+x) <= k(z) ||x||") {
    // k(z) = MN/2 + M^2 N^2 (delta(z)/2)^(-2k) for ||x|| < delta(z)/4; the
    // estimator is one-sided, so the check carries 3x its tolerance as slack
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    Rng rng(41);
    Configuration z = test::random_collisionless(rng, spec, 1.0, 0.5);
    double delta = min_mutual_distance(z);
    double M = spec.total_mass(), N = spec.n_bodies;
    double kz = M * N / 2.0 +
                M * M * N * N * std::pow(delta / 2.0, -2.0 * spec.kappa);
    FreePhiOptions opts;
    opts.nodes = 65;
    const double slack = 3.0 * 1e-2;
    for (double scale : {0.5, 0.24}) {
        Configuration x(2, 3);
        for (int j = 0; j < 3; ++j)
            for (int i = 0; i < 2; ++i) x(i, j) = rng.normal();
        x *= scale * (delta / 4.0) / max_norm(x);
        PhiEstimate est = free_phi(spec, z, Configuration(z + x), opts);
        CHECK(est.value <= kz * max_norm(x) * (1.0 + slack));
    }
}

TEST_CASE("parabolic homothetic motion is not beaten by the optimizer") {
    // the minimal parabolic solution is globally minimizing; the estimator
    // should land on its action from either side up to discretization
    ProblemSpec spec = ProblemSpec::unit_masses(3, 2, 0.5);
    CentralConfiguration central = find_central_configuration(spec, 21);
    REQUIRE(central.is_minimal);
    double T = 1.0;
    Configuration origin = Configuration::Zero(2, 3);
    Configuration target = parabolic_homothetic(central, spec, T).first;
    double closed = parabolic_action_closed_form(central, spec, T);
    PhiEstimate est = minimize_action(spec, origin, target, T, 129, {}, {});
    CHECK(est.value >= closed * (1.0 - 5e-3));
    CHECK(est.value <= closed * (1.0 + 1e-2));
}

TEST_CASE("certify_distance_axioms: degenerate triple") {
    ProblemSpec spec = ProblemSpec::unit_masses(2, 1, 0.5);
    Configuration x = collinear_pair(2.0);
    std::vector<std::array<Configuration, 3>> triples{{x, x, x}};
    DistanceAxiomReport rep = certify_distance_axioms(spec, triples);
    CHECK(rep.satisfied);
    CHECK(rep.worst_triangle_excess <= 0.0);
}
