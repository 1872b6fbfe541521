#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numbers>

#include "cmc/multigraph.hpp"
#include "cmc/operators.hpp"
#include "cmc/rescale.hpp"

namespace {

using namespace cmc;
constexpr double pi = std::numbers::pi;

double interior_max_abs(const ParamGrid& g, const std::function<double(std::size_t)>& f, int ring = 1) {
    double m = 0.0;
    for (int i = ring; i < g.n_s - ring; ++i)
        for (int j = ring; j < g.n_t - ring; ++j) m = std::max(m, std::abs(f(g.index(i, j))));
    return m;
}

TEST(RescaleParams, RejectsNonPositiveFactors) {
    const auto mesh = build_helicoid(ParamGrid::make(-1, 1, -1, 1, 11, 11));
    EXPECT_THROW(rescale_mesh(mesh, 0.0), InvalidArgument);
    EXPECT_THROW(rescale_mesh(mesh, -2.0), InvalidArgument);
    EXPECT_THROW(rescale_mesh(mesh, INFINITY), InvalidArgument);
}

TEST(RescaleMesh, UnitFactorIsIdentity) {
    const auto mesh = build_helicoid(ParamGrid::make(-1, 1, -1, 1, 11, 11));
    const auto same = rescale_mesh(mesh, 1.0);
    EXPECT_EQ(same.position, mesh.position);
    EXPECT_EQ(same.normal, mesh.normal);
    EXPECT_EQ(same.grid, mesh.grid);
}

TEST(RescaleMesh, UnitSphereToRadiusTwo) {
    const auto g = ParamGrid::make(0, 2 * pi, 0.4, pi - 0.4, 121, 91);
    const auto fs = compute_forms_and_shape(rescale_mesh(build_reference(ReferenceKind::sphere, 1.0, g), 2.0));
    EXPECT_LE(interior_max_abs(g, [&](std::size_t k) { return fs.shape.H[k] - 1.0; }), 1e-2);
    EXPECT_LE(interior_max_abs(g, [&](std::size_t k) { return fs.shape.A2[k] - 0.5; }), 1e-2);
}

TEST(RescaleMesh, HelicoidAxisCurvature) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 81, 81);
    const auto fs = compute_forms_and_shape(rescale_mesh(build_helicoid(g), 3.0));
    EXPECT_NEAR(fs.shape.A2[g.index(40, 40)], 2.0 / 9.0, 1e-3);
}

TEST(RescaleMesh, TransformationLawsOnAllFixtures) {
    const std::vector<std::pair<const char*, SurfaceMesh>> fixtures{
        {"helicoid", build_helicoid(ParamGrid::make(-2, 2, -pi, pi, 41, 61))},
        {"sphere", build_reference(ReferenceKind::sphere, 1.0, ParamGrid::make(0, 2 * pi, 0.5, pi - 0.5, 61, 41))},
        {"cylinder", build_reference(ReferenceKind::cylinder, 1.5, ParamGrid::make(-1, 1, 0, pi, 21, 41))},
        {"plane", build_reference(ReferenceKind::plane, 1.0, ParamGrid::make(-1, 1, -1, 1, 11, 11))},
        {"catenoid", build_catenoid(1.0, ParamGrid::make(-1, 1, 0, 2 * pi, 41, 81))},
        {"stereographic sphere", build_stereographic_sphere(1.0, ParamGrid::make(-1, 1, -1, 1, 41, 41))},
    };
    for (const auto& [name, mesh] : fixtures) {
        const auto base = compute_forms_and_shape(mesh).shape;
        for (double R : {0.5, 2.0, 5.0}) {
            const auto scaled = rescale_mesh(mesh, R);
            const auto s = compute_forms_and_shape(scaled).shape;
            const double h = max_edge_length(scaled);
            const auto& g = mesh.grid;
            EXPECT_LE(interior_max_abs(g, [&](std::size_t k) { return s.H[k] - base.H[k] / R; }), h * h)
                << name << " R=" << R;
            EXPECT_LE(interior_max_abs(g, [&](std::size_t k) { return s.A2[k] - base.A2[k] / (R * R); }), h * h)
                << name << " R=" << R;
        }
    }
}

TEST(RescaleField, ConstantScalesByR) {
    const auto g = ParamGrid::make(-1, 1, -2, 2, 9, 11);
    const auto w = rescale_field(ScalarField::constant(g, 0.75), 4.0);
    EXPECT_EQ(w.grid(), scaled_grid(g, 4.0));
    for (double v : w.values()) EXPECT_DOUBLE_EQ(v, 3.0);
}

TEST(RescaleField, NodewiseIdentity) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 11, 11);
    const auto u = ScalarField::sample(g, [](double x, double y) { return std::sin(x) * std::exp(y); });
    const double R = 2.5;
    const auto w = rescale_field(u, R);
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            const double x = w.grid().s(i), y = w.grid().t(j);
            EXPECT_NEAR(w.at(i, j), R * std::sin(x / R) * std::exp(y / R), 1e-14);
        }
}

TEST(RescaleField, MismatchedTargetGridIsRejected) {
    const auto g = ParamGrid::make(-1, 1, -1, 1, 11, 11);
    const ScalarField u(g);
    EXPECT_NO_THROW(rescale_field(u, 2.0, ParamGrid::make(-2, 2, -2, 2, 11, 11)));
    EXPECT_THROW(rescale_field(u, 2.0, ParamGrid::make(-2, 2, -2, 2, 12, 11)), GridMismatch);
    EXPECT_THROW(rescale_field(u, 2.0, ParamGrid::make(-1, 1, -1, 1, 11, 11)), GridMismatch);
}

TEST(RescaleField, HemisphereGraphCurvatureHalves) {
    // lower unit hemisphere over [-0.5, 0.5]^2 becomes the radius-2 hemisphere
    const auto g = ParamGrid::make(-0.5, 0.5, -0.5, 0.5, 81, 81);
    const auto u = ScalarField::sample(g, [](double x, double y) { return -std::sqrt(1 - x * x - y * y); });
    const auto h0 = euclidean_graph_H(u);
    const auto h1 = euclidean_graph_H(rescale_field(u, 2.0));
    for (std::size_t k = 0; k < h0.size(); ++k) EXPECT_NEAR(h1[k], h0[k] / 2.0, 1e-12);
    EXPECT_LE(interior_max_abs(h1.grid(), [&](std::size_t k) { return h1[k] - 1.0; }, 2), 1e-3);
}

TEST(RescaleMesh, CertificateTransport) {
    const auto mesh = build_helicoid(ParamGrid::make(-5, 5, -3 * pi, 3 * pi, 101, 241));
    const auto base = detect(mesh, 2, 2.0, 0.5);
    ASSERT_TRUE(base.has_value());
    for (double R : {0.5, 2.0}) {
        const auto scaled = detect(rescale_mesh(mesh, R), 2, 2.0, 0.5);
        ASSERT_TRUE(scaled.has_value()) << R;
        EXPECT_EQ(scaled->N, base->N);
        EXPECT_EQ(scaled->omega, base->omega);
        EXPECT_LE(scaled->R_bar, R * base->R_bar * 1.1 * (1 + 1e-12)) << R;
        EXPECT_GE(scaled->R_bar, R * base->R_bar / 1.1 * (1 - 1e-12)) << R;
    }
}

}  // namespace
