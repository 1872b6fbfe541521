#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "cmc/errors.hpp"
#include "cmc/finite_difference.hpp"
#include "cmc/grid.hpp"

namespace cmc {

using Vec3 = Eigen::Vector3d;

/// Structured immersion of a parameter patch with a unit normal per node.
///
/// Normals always come from the normalized cross product X_s x X_t of the
/// finite-difference coordinate tangents, so the orientation is fixed by the
/// parametrization and a mesh is fully determined by its positions.
struct SurfaceMesh {
    ParamGrid grid;
    std::vector<Vec3> position;
    std::vector<Vec3> normal;

    std::size_t size() const { return position.size(); }
    const Vec3& x(int i, int j) const { return position[grid.index(i, j)]; }
    const Vec3& n(int i, int j) const { return normal[grid.index(i, j)]; }
};

namespace detail {

inline std::string node_list(const ParamGrid& g, const std::vector<std::size_t>& nodes) {
    std::string out;
    const std::size_t shown = std::min<std::size_t>(nodes.size(), 12);
    for (std::size_t n = 0; n < shown; ++n) {
        if (n) out += ", ";
        out += "(" + std::to_string(g.i_of(nodes[n])) + "," + std::to_string(g.j_of(nodes[n])) + ")";
    }
    if (nodes.size() > shown) out += ", ... (" + std::to_string(nodes.size()) + " total)";
    return out;
}

}  // namespace detail

/// Unit normals from finite-difference tangents. Throws DegenerateMetric where
/// the tangents are (numerically) parallel.
inline std::vector<Vec3> compute_normals(const ParamGrid& grid, const std::vector<Vec3>& position) {
    const auto xs = fd::d_s(grid, position);
    const auto xt = fd::d_t(grid, position);
    std::vector<Vec3> normal(position.size());
    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < position.size(); ++k) {
        const Vec3 c = xs[k].cross(xt[k]);
        const double scale = xs[k].norm() * xt[k].norm();
        const double len = c.norm();
        if (!(len > 1e-12 * scale) || !std::isfinite(len)) {
            bad.push_back(k);
            normal[k] = Vec3::UnitZ();
            continue;
        }
        normal[k] = c / len;
    }
    if (!bad.empty())
        throw DegenerateMetric("degenerate immersion (X_s x X_t = 0) at nodes " +
                                   detail::node_list(grid, bad),
                               bad);
    return normal;
}

/// Nodes whose normal makes an angle >= pi/2 with a grid neighbour.
inline std::vector<std::size_t> orientation_flips(const SurfaceMesh& mesh) {
    std::vector<std::size_t> bad;
    const auto& g = mesh.grid;
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            const Vec3& n0 = mesh.n(i, j);
            if ((i + 1 < g.n_s && n0.dot(mesh.n(i + 1, j)) <= 0.0) ||
                (j + 1 < g.n_t && n0.dot(mesh.n(i, j + 1)) <= 0.0))
                bad.push_back(g.index(i, j));
        }
    return bad;
}

/// Builds a mesh from node positions, recomputing normals. Rejects folds.
inline SurfaceMesh mesh_from_positions(const ParamGrid& grid, std::vector<Vec3> position) {
    grid.validate();
    if (position.size() != grid.size()) throw InvalidArgument("mesh: position count does not match grid");
    for (const auto& p : position)
        if (!p.allFinite()) throw InvalidArgument("mesh: non-finite position");
    SurfaceMesh mesh{grid, std::move(position), {}};
    mesh.normal = compute_normals(grid, mesh.position);
    if (auto flips = orientation_flips(mesh); !flips.empty())
        throw DegenerateMetric("normal field flips orientation near nodes " +
                                   detail::node_list(grid, flips),
                               flips);
    return mesh;
}

/// Samples a parametrization X(s, t) on the grid.
template <class Param>
SurfaceMesh build_parametric(const ParamGrid& grid, Param&& x) {
    grid.validate();
    std::vector<Vec3> pos(grid.size());
    for (int i = 0; i < grid.n_s; ++i)
        for (int j = 0; j < grid.n_t; ++j) pos[grid.index(i, j)] = x(grid.s(i), grid.t(j));
    return mesh_from_positions(grid, std::move(pos));
}

/// Helicoid (s sin t, s cos t, t); X_s x X_t = (cos t, -sin t, -s).
inline SurfaceMesh build_helicoid(const ParamGrid& grid) {
    return build_parametric(grid, [](double s, double t) {
        return Vec3(s * std::sin(t), s * std::cos(t), t);
    });
}

enum class ReferenceKind { plane, cylinder, sphere };

/// Closed-form fixtures. Orientation is chosen so that, with H = k1 + k2 and
/// II = <X_ij, N>, the cylinder and sphere have positive mean curvature 1/r and 2/r.
///  - plane:    (s, t, 0)
///  - cylinder: (r cos t, r sin t, s), s = height, t = angle
///  - sphere:   r (sin t cos s, sin t sin s, cos t), s = azimuth, t = polar angle in (0, pi)
inline SurfaceMesh build_reference(ReferenceKind kind, double r, const ParamGrid& grid) {
    grid.validate();
    switch (kind) {
        case ReferenceKind::plane:
            return build_parametric(grid, [](double s, double t) { return Vec3(s, t, 0.0); });
        case ReferenceKind::cylinder:
            if (!(r > 0.0)) throw InvalidArgument("cylinder radius must be positive");
            return build_parametric(grid, [r](double s, double t) {
                return Vec3(r * std::cos(t), r * std::sin(t), s);
            });
        case ReferenceKind::sphere:
            if (!(r > 0.0)) throw InvalidArgument("sphere radius must be positive");
            if (!(grid.t_min > 0.0) || !(grid.t_max < std::numbers::pi))
                throw InvalidArgument("sphere grid must keep the polar angle strictly inside (0, pi)");
            return build_parametric(grid, [r](double s, double t) {
                return Vec3(r * std::sin(t) * std::cos(s), r * std::sin(t) * std::sin(s), r * std::cos(t));
            });
    }
    throw InvalidArgument("unknown reference kind");
}

/// Sphere of radius r through inverse stereographic projection; the parameter
/// origin maps to the north pole and the disk of radius tan(a/2) to the polar
/// cap of angle a. Pole-free, so caps larger than a hemisphere are representable.
inline SurfaceMesh build_stereographic_sphere(double r, const ParamGrid& grid) {
    if (!(r > 0.0)) throw InvalidArgument("sphere radius must be positive");
    return build_parametric(grid, [r](double s, double t) {
        const double q = 1.0 + s * s + t * t;
        return Vec3(r * 2.0 * t / q, r * 2.0 * s / q, r * (1.0 - s * s - t * t) / q);
    });
}

/// Catenoid (a cosh(s/a) cos t, a cosh(s/a) sin t, s).
inline SurfaceMesh build_catenoid(double a, const ParamGrid& grid) {
    if (!(a > 0.0)) throw InvalidArgument("catenoid neck radius must be positive");
    return build_parametric(grid, [a](double s, double t) {
        const double c = a * std::cosh(s / a);
        return Vec3(c * std::cos(t), c * std::sin(t), s);
    });
}

/// Flat disk in polar parameters (s cos t, s sin t, 0), s = radius.
inline SurfaceMesh build_polar_disk(const ParamGrid& grid) {
    if (!(grid.s_min > 0.0)) throw InvalidArgument("polar disk needs s_min > 0");
    return build_parametric(grid, [](double s, double t) {
        return Vec3(s * std::cos(t), s * std::sin(t), 0.0);
    });
}

struct FundamentalForms {
    std::vector<double> E, F, G;  // first fundamental form
    std::vector<double> e, f, g;  // second fundamental form, e = <X_ss, N>

    double det(std::size_t k) const { return E[k] * G[k] - F[k] * F[k]; }
};

/// Curvature fields, H = k1 + k2 (sum convention), A2 = k1^2 + k2^2.
///
/// K is the extrinsic Gauss curvature (eg - f^2)/det and A2 = tr(S^2) of the
/// shape operator S = I^{-1} II. K_intrinsic is computed from the metric alone
/// (Brioschi formula), which makes H^2 = A2 + 2 K_intrinsic a genuine check of
/// the Gauss equation rather than an algebraic identity.
struct ShapeData {
    std::vector<double> H, K, A2, K_intrinsic;
};

struct FormsAndShape {
    FundamentalForms forms;
    ShapeData shape;
};

/// First and second fundamental forms by second-order finite differences of the
/// immersion, and the derived curvature fields.
inline FormsAndShape compute_forms_and_shape(const SurfaceMesh& mesh) {
    const auto& g = mesh.grid;
    const std::size_t n = mesh.size();
    const auto X = fd::jet(g, mesh.position);

    FormsAndShape out;
    auto& ff = out.forms;
    ff.E.resize(n); ff.F.resize(n); ff.G.resize(n);
    ff.e.resize(n); ff.f.resize(n); ff.g.resize(n);
    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < n; ++k) {
        ff.E[k] = X.s[k].squaredNorm();
        ff.F[k] = X.s[k].dot(X.t[k]);
        ff.G[k] = X.t[k].squaredNorm();
        const Vec3& N = mesh.normal[k];
        ff.e[k] = X.ss[k].dot(N);
        ff.f[k] = X.st[k].dot(N);
        ff.g[k] = X.tt[k].dot(N);
        const double det = ff.det(k);
        if (!(det > 1e-14 * ff.E[k] * ff.G[k]) || !(ff.E[k] > 0.0) || !(ff.G[k] > 0.0))
            bad.push_back(k);
    }
    if (!bad.empty())
        throw DegenerateMetric("degenerate metric (EG - F^2 <= 0) at nodes " + detail::node_list(g, bad),
                               bad);

    auto& sh = out.shape;
    sh.H.resize(n); sh.K.resize(n); sh.A2.resize(n); sh.K_intrinsic.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double E = ff.E[k], F = ff.F[k], G = ff.G[k];
        const double e = ff.e[k], f = ff.f[k], gg = ff.g[k];
        const double det = E * G - F * F;
        // S = I^{-1} II
        const double s11 = (G * e - F * f) / det;
        const double s12 = (G * f - F * gg) / det;
        const double s21 = (E * f - F * e) / det;
        const double s22 = (E * gg - F * f) / det;
        sh.H[k] = (e * G - 2.0 * f * F + gg * E) / det;
        sh.K[k] = (e * gg - f * f) / det;
        sh.A2[k] = s11 * s11 + 2.0 * s12 * s21 + s22 * s22;
    }

    // Brioschi formula from E, F, G and their derivatives.
    const auto dE = fd::jet(g, ff.E);
    const auto dF = fd::jet(g, ff.F);
    const auto dG = fd::jet(g, ff.G);
    for (std::size_t k = 0; k < n; ++k) {
        const double E = ff.E[k], F = ff.F[k], G = ff.G[k];
        Eigen::Matrix3d m1;
        m1 << -0.5 * dE.tt[k] + dF.st[k] - 0.5 * dG.ss[k], 0.5 * dE.s[k], dF.s[k] - 0.5 * dE.t[k],
            dF.t[k] - 0.5 * dG.s[k], E, F,
            0.5 * dG.t[k], F, G;
        Eigen::Matrix3d m2;
        m2 << 0.0, 0.5 * dE.t[k], 0.5 * dG.s[k],
            0.5 * dE.t[k], E, F,
            0.5 * dG.s[k], F, G;
        const double det = E * G - F * F;
        sh.K_intrinsic[k] = (m1.determinant() - m2.determinant()) / (det * det);
    }
    return out;
}

/// |H^2 - A2 - 2 K_intrinsic| per node.
inline std::vector<double> gauss_residual_field(const ShapeData& shape) {
    std::vector<double> r(shape.H.size());
    for (std::size_t k = 0; k < r.size(); ++k)
        r[k] = std::abs(shape.H[k] * shape.H[k] - shape.A2[k] - 2.0 * shape.K_intrinsic[k]);
    return r;
}

/// Max Gauss-equation residual over nodes at least `ring` steps from the
/// boundary. K_intrinsic differentiates E, F, G a second time, so only nodes two
/// rings in have stencils free of one-sided boundary values.
inline double gauss_residual(const ShapeData& shape, const ParamGrid& grid, int ring = 2) {
    const auto r = gauss_residual_field(shape);
    double m = 0.0;
    for (int i = ring; i < grid.n_s - ring; ++i)
        for (int j = ring; j < grid.n_t - ring; ++j) m = std::max(m, r[grid.index(i, j)]);
    return m;
}

/// Moves every node along its normal: x' = x + u(x) N(x). Normals are
/// recomputed from the new immersion.
inline SurfaceMesh normal_variation(const SurfaceMesh& mesh, const ScalarField& u) {
    require_same_grid(mesh.grid, u.grid(), "normal_variation");
    std::vector<Vec3> pos(mesh.size());
    for (std::size_t k = 0; k < pos.size(); ++k) pos[k] = mesh.position[k] + u[k] * mesh.normal[k];
    return mesh_from_positions(mesh.grid, std::move(pos));
}

/// Largest Euclidean length of a grid edge.
inline double max_edge_length(const SurfaceMesh& mesh) {
    const auto& g = mesh.grid;
    double h = 0.0;
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            if (i + 1 < g.n_s) h = std::max(h, (mesh.x(i + 1, j) - mesh.x(i, j)).norm());
            if (j + 1 < g.n_t) h = std::max(h, (mesh.x(i, j + 1) - mesh.x(i, j)).norm());
        }
    return h;
}

}  // namespace cmc
