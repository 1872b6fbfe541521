#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cmc/stability.hpp"

namespace {

using namespace cmc;
constexpr double pi = std::numbers::pi;

NodeMask parameter_disk(const ParamGrid& g, double s0, double t0, double r) {
    NodeMask m(g.size(), false);
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) m[g.index(i, j)] = std::hypot(g.s(i) - s0, g.t(j) - t0) < r;
    return m;
}

TEST(Geodesic, PlaneDistancesAndStretch) {
    const auto mesh = build_reference(ReferenceKind::plane, 1.0, ParamGrid::make(0, 1, 0, 1, 11, 11));
    const auto f = geodesic_distance(mesh, 0);
    EXPECT_NEAR(f.dist[mesh.grid.index(10, 0)], 1.0, 1e-14);
    EXPECT_NEAR(f.dist[mesh.grid.index(10, 10)], std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(f.stretch, 1.0 / std::cos(pi / 8), 1e-12);
    for (std::size_t k = 0; k < mesh.size(); ++k) {
        const double chord = mesh.position[k].norm();
        EXPECT_GE(f.dist[k], chord - 1e-14);
        EXPECT_LE(f.dist[k], f.stretch * chord + 1e-14);
    }
}

TEST(Geodesic, CutoffLeavesFarNodesUnreached) {
    const auto mesh = build_reference(ReferenceKind::plane, 1.0, ParamGrid::make(0, 1, 0, 1, 11, 11));
    const auto d = graph_distances(mesh, 0, 0.35);
    EXPECT_TRUE(std::isinf(d[mesh.grid.index(10, 10)]));
    EXPECT_NEAR(d[mesh.grid.index(3, 0)], 0.3, 1e-14);
    EXPECT_THROW(graph_distances(mesh, mesh.size()), InvalidArgument);
}

TEST(DeltaStability, PlaneDomainsAreStable) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 41, 41);
    const auto ctx = OperatorContext::from_mesh(build_reference(ReferenceKind::plane, 1.0, g));
    const auto disk = parameter_disk(g, 0, 0, 0.9);
    for (double delta : {0.0, 0.5, 0.9}) {
        const auto rep = delta_stability_test(ctx, disk, delta);
        EXPECT_TRUE(rep.stable);
        // first Dirichlet eigenvalue of the disk of radius 0.9: j_{0,1}^2 / 0.81
        EXPECT_NEAR(rep.lambda1, 2.404825557695773 * 2.404825557695773 / 0.81, 0.3);
    }
}

TEST(DeltaStability, PrincipalModeIsPositiveAndNormalized) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 31, 31);
    const auto ctx = OperatorContext::from_mesh(build_reference(ReferenceKind::plane, 1.0, g));
    const auto mode = principal_mode(ctx, parameter_disk(g, 0, 0, 0.8), 0.0);
    EXPECT_NEAR(mode.phi.sup_norm(), 1.0, 1e-14);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_GE(mode.phi[k], -1e-12);
}

double cap_lambda(double angle) {
    const double L = 1.15 * std::tan(0.3 * pi);
    const auto g = ParamGrid::make(-L, L, -L, L, 61, 61);
    const auto ctx = OperatorContext::from_mesh(build_stereographic_sphere(1.0, g));
    return delta_stability_test(ctx, parameter_disk(g, 0, 0, std::tan(angle / 2)), 0.0).lambda1;
}

TEST(DeltaStability, SphereCapOnsetAtTheHemisphere) {
    // lambda_1(-Delta - 2) on a cap of angle a changes sign at a = pi/2
    const double below = cap_lambda(0.45 * pi), above = cap_lambda(0.55 * pi);
    ASSERT_GT(below, 0.0);
    ASSERT_LT(above, 0.0);
    const double onset = 0.45 * pi + 0.1 * pi * below / (below - above);
    EXPECT_NEAR(onset, pi / 2, 0.05 * pi / 2);
}

TEST(DeltaStability, DenseOracleOnACoarseCap) {
    const double L = 1.2;
    const auto g = ParamGrid::make(-L, L, -L, L, 15, 15);
    const auto ctx = OperatorContext::from_mesh(build_stereographic_sphere(1.0, g));
    const auto dom = parameter_disk(g, 0, 0, 1.1);
    const auto sys = assemble_dirichlet(ctx, dom);
    const Eigen::MatrixXd a = Eigen::MatrixXd(sys.stability_matrix(0.5));
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> dense(0.5 * (a + a.transpose()),
                                                                    Eigen::MatrixXd(sys.mass.asDiagonal()));
    EXPECT_NEAR(delta_stability_test(ctx, dom, 0.5).lambda1, dense.eigenvalues()[0], 1e-7);
}

TEST(DeltaStability, DomainPreconditions) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 21, 21);
    const auto ctx = OperatorContext::from_mesh(build_reference(ReferenceKind::plane, 1.0, g));
    EXPECT_THROW(delta_stability_test(ctx, parameter_disk(g, 0, 0, 0.1), 0.0), InvalidArgument);  // too small
    auto two = parameter_disk(g, -0.6, 0, 0.3);
    const auto other = parameter_disk(g, 0.6, 0, 0.3);
    for (std::size_t k = 0; k < two.size(); ++k) two[k] = two[k] || other[k];
    EXPECT_THROW(delta_stability_test(ctx, two, 0.0), InvalidArgument);  // disconnected
    EXPECT_THROW(delta_stability_test(ctx, parameter_disk(g, 0, 0, 0.5), 1.0), InvalidArgument);
    EXPECT_THROW(delta_stability_test(ctx, NodeMask(5, true), 0.0), GridMismatch);
}

TEST(LogCertificate, PrincipalModeOfALargerStableDomainCertifies) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 41, 41);
    const auto ctx = OperatorContext::from_mesh(build_reference(ReferenceKind::plane, 1.0, g));
    const auto mode = principal_mode(ctx, parameter_disk(g, 0, 0, 0.95), 0.0);
    EXPECT_TRUE(log_certificate_test(ctx, mode.phi, parameter_disk(g, 0, 0, 0.7), 0.0));
}

TEST(LogCertificate, RejectsNonPositiveFunctions) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 21, 21);
    const auto ctx = OperatorContext::from_mesh(build_reference(ReferenceKind::plane, 1.0, g));
    EXPECT_THROW(log_certificate_test(ctx, ScalarField(g), parameter_disk(g, 0, 0, 0.5), 0.0), InvalidArgument);
}

TEST(LogCertificate, SoundOnRandomizedInstances) {
    // never "stable by certificate" while spectrally unstable
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0, 1);
    const double L = 1.15 * std::tan(0.35 * pi);
    const auto g = ParamGrid::make(-L, L, -L, L, 41, 41);
    const auto ctx = OperatorContext::from_mesh(build_stereographic_sphere(1.0, g));
    int certified = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const double angle = (0.3 + 0.35 * unif(rng)) * pi;  // caps on both sides of the hemisphere
        const double r = std::tan(angle / 2);
        const double delta = std::vector<double>{0.0, 0.5, 0.9}[trial % 3];
        const auto dom = parameter_disk(g, 0, 0, r);
        ScalarField u(g);
        if (trial % 2 == 0) {
            const auto outer = principal_mode(ctx, parameter_disk(g, 0, 0, std::min(L * 0.95, r * 1.15)), delta);
            u = outer.phi;
        } else {
            const double a = unif(rng), b = unif(rng);
            u = ScalarField::sample(g, [&](double s, double t) { return 1.0 + 0.5 * std::sin(3 * a * s + b * t); });
        }
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!dom[k]) u[k] = 0.0;
        bool positive = true;
        for (std::size_t k = 0; k < g.size(); ++k) positive = positive && (!dom[k] || u[k] > 0.0);
        if (!positive) continue;
        const bool cert = log_certificate_test(ctx, u, dom, delta);
        const auto rep = delta_stability_test(ctx, dom, delta);
        if (cert) {
            ++certified;
            EXPECT_TRUE(rep.stable) << "trial " << trial << " angle " << angle << " lambda1 " << rep.lambda1;
        }
    }
    EXPECT_GE(certified, 3);
}

TEST(SpaceForm, AreaFormulas) {
    EXPECT_NEAR(space_form_area(0.0, 2.0), 4 * pi, 1e-12);
    EXPECT_NEAR(space_form_area(-1.0, 1.0), 2 * pi * (std::cosh(1.0) - 1), 1e-12);
    EXPECT_NEAR(space_form_area(-1e-10, 1.0), pi, 1e-8);
}

TEST(Bishop, HelicoidBallsObeyTheBound) {
    const auto mesh = build_helicoid(ParamGrid::make(-3, 3, -pi, pi, 121, 121));
    const std::size_t origin = mesh.grid.index(60, 60);
    const double h = max_edge_length(mesh);
    double prev_ratio = 0.0, prev_R = 0.0;
    for (double R : {0.25, 0.5, 1.0}) {
        const auto b = bishop_check(mesh, origin, R);
        EXPECT_NEAR(b.K_low, -1.0, h * h);
        EXPECT_LE(b.area, b.bound) << "R = " << R;
        const double ratio = b.area / b.bound;
        if (prev_R > 0.0) {
            EXPECT_LE(ratio, prev_ratio * (1.0 + 3.0 * b.h / R));
        }
        prev_ratio = ratio;
        prev_R = R;
    }
}

TEST(Bishop, BallReachingTheBoundaryIsRejected) {
    const auto mesh = build_helicoid(ParamGrid::make(-1, 1, -1, 1, 21, 21));
    EXPECT_THROW(bishop_check(mesh, mesh.grid.index(10, 10), 5.0), InvalidArgument);
}

TEST(LocalFlatness, HelicoidBallsUnderTheHypothesis) {
    const auto mesh = build_helicoid(ParamGrid::make(-3, 3, -pi, pi, 121, 121));
    const std::size_t origin = mesh.grid.index(60, 60);
    for (double s : {0.25, 0.5, 0.7}) {
        const auto lf = local_flatness_checks(mesh, origin, s);
        ASSERT_TRUE(lf.hypothesis) << s;
        EXPECT_TRUE(lf.normal_ok) << s << ": " << lf.normal_deviation << " vs " << lf.normal_bound;
        EXPECT_TRUE(lf.chord_arc_ok) << s << ": " << lf.chord_arc_min;
        EXPECT_TRUE(lf.height_ok) << s;
        EXPECT_TRUE(lf.projection_ok) << s;
    }
}

TEST(GeodesicBall, IsConnectedAndGrowsWithRadius) {
    const auto mesh = build_helicoid(ParamGrid::make(-2, 2, -2, 2, 41, 41));
    const auto small = geodesic_ball(mesh, mesh.grid.index(20, 20), 0.5);
    const auto large = geodesic_ball(mesh, mesh.grid.index(20, 20), 1.0);
    EXPECT_TRUE(domain_connected(mesh.grid, small));
    for (std::size_t k = 0; k < small.size(); ++k)
        if (small[k]) {
            EXPECT_TRUE(large[k]);
        }
    EXPECT_LT(domain_unknowns(mesh.grid, small), domain_unknowns(mesh.grid, large));
}

}  // namespace
