#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <queue>
#include <vector>

#include "cmc/geodesic.hpp"
#include "cmc/linear.hpp"
#include "cmc/operators.hpp"

namespace cmc {

struct StabilityReport {
    double delta = 0.0;
    double lambda1 = 0.0;  // principal Dirichlet eigenvalue of -Delta - (1 - delta)|A|^2
    bool stable = false;   // lambda1 >= -eig_tol
    NodeMask domain;
    double eig_tol = 1e-8;
};

/// Nodes of `domain` that carry unknowns (domain minus the boundary ring).
inline std::size_t domain_unknowns(const ParamGrid& g, const NodeMask& domain) {
    std::size_t n = 0;
    for (std::size_t k = 0; k < g.size(); ++k) n += domain[k] && !g.is_boundary(k);
    return n;
}

/// True if the interior nodes of the domain form one 8-connected component.
inline bool domain_connected(const ParamGrid& g, const NodeMask& domain) {
    std::vector<char> seen(g.size(), 0);
    std::size_t start = g.size(), total = 0;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (domain[k] && !g.is_boundary(k)) {
            ++total;
            if (start == g.size()) start = k;
        }
    if (total == 0) return false;
    std::queue<std::size_t> q;
    q.push(start);
    seen[start] = 1;
    std::size_t reached = 0;
    while (!q.empty()) {
        const std::size_t k = q.front();
        q.pop();
        ++reached;
        const int i = g.i_of(k), j = g.j_of(k);
        for (const auto& nb : detail::kNeighbours) {
            const int ii = i + nb[0], jj = j + nb[1];
            if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
            const std::size_t l = g.index(ii, jj);
            if (!seen[l] && domain[l] && !g.is_boundary(l)) {
                seen[l] = 1;
                q.push(l);
            }
        }
    }
    return reached == total;
}

inline void require_stability_domain(const ParamGrid& g, const NodeMask& domain, double delta) {
    if (domain.size() != g.size()) throw GridMismatch("stability domain mask does not match grid");
    if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in [0, 1)");
    if (domain_unknowns(g, domain) < 9) throw InvalidArgument("stability domain needs at least 9 interior nodes");
    if (!domain_connected(g, domain)) throw InvalidArgument("stability domain is not connected");
}

struct PrincipalMode {
    double lambda = 0.0;
    ScalarField phi;  // nonnegative-mean, unit sup norm, zero outside the domain
};

/// Principal Dirichlet eigenpair of -Delta - (1 - delta)|A|^2 on the domain.
inline PrincipalMode principal_mode(const OperatorContext& ctx, const NodeMask& domain, double delta) {
    require_stability_domain(ctx.grid, domain, delta);
    const auto sys = assemble_dirichlet(ctx, domain);
    const double c = 1.0 - delta;
    const SparseMatrix a = sys.stability_matrix(c);
    // -Delta >= 0, so the spectrum lies above -c max|A|^2; shift strictly below it
    const double sigma = -c * sys.potential.maxCoeff() - 1.0;
    const FactoredMatrix shifted(DirichletSystem::add_diagonal(a, -sigma * sys.mass));
    const auto pair = nearest_eigenpair(a, sys.mass, shifted, sigma);
    auto phi = sys.extend(pair.vector);
    if (std::accumulate(phi.values().begin(), phi.values().end(), 0.0) < 0.0) phi *= -1.0;
    phi *= 1.0 / phi.sup_norm();
    return {pair.value, std::move(phi)};
}

inline StabilityReport delta_stability_test(const OperatorContext& ctx, const NodeMask& domain, double delta,
                                            double eig_tol = 1e-8) {
    const auto mode = principal_mode(ctx, domain, delta);
    return {delta, mode.lambda, mode.lambda >= -eig_tol, domain, eig_tol};
}

/// Pointwise sufficient condition for delta-stability: u > 0 on the domain and
/// Delta u + (1 - delta)|A|^2 u <= cert_tol at every interior domain node, with
/// u extended by zero outside the domain (the Dirichlet condition).
/// cert_tol defaults to 1e-8 ||u||_inf.
inline bool log_certificate_test(const OperatorContext& ctx, const ScalarField& u, const NodeMask& domain,
                                 double delta, double cert_tol = -1.0) {
    require_same_grid(ctx.grid, u.grid(), "log_certificate_test");
    const auto& g = ctx.grid;
    if (domain.size() != g.size()) throw GridMismatch("certificate domain mask does not match grid");
    if (!(delta >= 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in [0, 1)");
    ScalarField v(g);
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!domain[k]) continue;
        if (!(u[k] > 0.0)) throw InvalidArgument("certificate function must be positive on the domain");
        v[k] = u[k];
    }
    const double tol = cert_tol >= 0.0 ? cert_tol : 1e-8 * v.sup_norm();
    const auto lap = laplace_beltrami(ctx, v);
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!domain[k] || g.is_boundary(k)) continue;
        if (lap[k] + (1.0 - delta) * ctx.shape.A2[k] * v[k] > tol) return false;
    }
    return true;
}

/// Nodes with graph distance < R from the source.
inline NodeMask geodesic_ball(const SurfaceMesh& mesh, std::size_t source, double R) {
    const auto d = graph_distances(mesh, source, R);
    NodeMask m(d.size(), false);
    for (std::size_t k = 0; k < d.size(); ++k) m[k] = d[k] < R;
    return m;
}

/// Area of the geodesic disk of radius R in the constant-curvature plane of
/// curvature K; the flat value is used for K >= 0.
inline double space_form_area(double K, double R) {
    if (K >= 0.0) return std::numbers::pi * R * R;
    const double sh = std::sinh(0.5 * std::sqrt(-K) * R);
    return 4.0 * std::numbers::pi * sh * sh / (-K);  // = 2 pi (cosh(sqrt(-K) R) - 1) / (-K)
}

struct BishopResult {
    double area = 0.0;
    double bound = 0.0;
    bool ok = false;
    double K_low = 0.0;
    double h = 0.0;  // largest edge touching the ball
};

inline BishopResult bishop_check(const SurfaceMesh& mesh, std::size_t source, double R) {
    if (!(R > 0.0)) throw InvalidArgument("bishop_check: R must be positive");
    const auto& g = mesh.grid;
    const auto ctx = OperatorContext::from_mesh(mesh);
    const auto ball = geodesic_ball(mesh, source, R);
    BishopResult out;
    out.K_low = *std::min_element(ctx.shape.K.begin(), ctx.shape.K.end());
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!ball[k]) continue;
        if (g.is_boundary(k)) throw InvalidArgument("bishop_check: geodesic ball reaches the mesh boundary");
        out.area += ctx.area_weight(k);
        const int i = g.i_of(k), j = g.j_of(k);
        for (const auto& nb : detail::kNeighbours) {
            if (nb[0] && nb[1]) continue;
            out.h = std::max(out.h, (mesh.x(i + nb[0], j + nb[1]) - mesh.position[k]).norm());
        }
    }
    out.bound = space_form_area(out.K_low, R);
    out.ok = out.area <= out.bound * (1.0 + 3.0 * out.h / R);
    return out;
}

/// Measured local-flatness quantities around one node, each with its bound.
struct LocalFlatness {
    double s = 0.0;
    double t = 0.0;         // radius used for the height and projection checks (s / 2)
    double sup_A = 0.0;     // sup |A| over the geodesic ball of radius s
    double rho = 0.25;
    double rho_bar = 0.0;   // 4 rho / sup_mesh |A|
    bool hypothesis = false;  // s sup|A| <= 4 rho
    double slack = 0.0;     // 2 h
    double stretch = 1.0;   // graph-metric overestimation factor, applied to the chord-arc check

    double normal_deviation = 0.0, normal_bound = 0.0;
    double chord_arc_min = 1.0, chord_arc_bound = 0.9;
    double height_max = 0.0, height_bound = 0.0;
    double projection_radius = 0.0, projection_bound = 0.0;

    bool normal_ok = false, chord_arc_ok = false, height_ok = false, projection_ok = false;
    bool all_ok() const { return normal_ok && chord_arc_ok && height_ok && projection_ok; }
};

inline LocalFlatness local_flatness_checks(const SurfaceMesh& mesh, std::size_t source, double s, double rho = 0.25) {
    if (!(s > 0.0)) throw InvalidArgument("local_flatness_checks: s must be positive");
    const auto& g = mesh.grid;
    const auto ctx = OperatorContext::from_mesh(mesh);
    const auto dist = graph_distances(mesh, source, 2.0 * s);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (dist[k] < 2.0 * s && g.is_boundary(k))
            throw InvalidArgument("local_flatness_checks: geodesic ball of radius 2s reaches the mesh boundary");

    LocalFlatness out;
    out.s = s;
    out.t = 0.5 * s;
    out.rho = rho;
    const Vec3& x = mesh.position[source];
    const Vec3& n = mesh.normal[source];
    double sup_mesh_A = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const double a = std::sqrt(std::max(0.0, ctx.shape.A2[k]));
        if (!g.is_boundary(k)) sup_mesh_A = std::max(sup_mesh_A, a);
        if (dist[k] < s) out.sup_A = std::max(out.sup_A, a);
    }
    out.slack = 2.0 * max_edge_length(mesh);
    out.stretch = grid_metric_stretch(mesh);
    out.hypothesis = s * out.sup_A <= 4.0 * rho;
    out.rho_bar = sup_mesh_A > 0.0 ? 4.0 * rho / sup_mesh_A : std::numeric_limits<double>::infinity();

    for (std::size_t k = 0; k < g.size(); ++k) {
        if (dist[k] < s) {
            const double c = std::clamp(mesh.normal[k].dot(n), -1.0, 1.0);
            out.normal_deviation = std::max(out.normal_deviation, std::acos(c));
        }
        if (dist[k] < 2.0 * s && k != source && dist[k] > 0.0)
            out.chord_arc_min = std::min(out.chord_arc_min, (mesh.position[k] - x).norm() / dist[k]);
        if (dist[k] < out.t) out.height_max = std::max(out.height_max, std::abs((mesh.position[k] - x).dot(n)));
    }
    out.normal_bound = s * out.sup_A;
    out.height_bound = out.t * out.t / s;

    // component of the extrinsic ball B_t(x) containing x, grown along grid edges
    const double t = out.t;
    std::vector<char> in(g.size(), 0);
    std::queue<std::size_t> q;
    q.push(source);
    in[source] = 1;
    double proj = std::numeric_limits<double>::infinity();
    while (!q.empty()) {
        const std::size_t k = q.front();
        q.pop();
        const int i = g.i_of(k), j = g.j_of(k);
        for (const auto& nb : detail::kNeighbours) {
            const int ii = i + nb[0], jj = j + nb[1];
            if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
            const std::size_t l = g.index(ii, jj);
            if (in[l]) continue;
            const Vec3 d = mesh.position[l] - x;
            if (d.norm() < t) {
                in[l] = 1;
                q.push(l);
            } else {
                // k is on the rim of the component: its projected radius bounds the projected disk
                const Vec3 dk = mesh.position[k] - x;
                proj = std::min(proj, (dk - dk.dot(n) * n).norm());
            }
        }
    }
    out.projection_radius = proj;
    out.projection_bound = t < out.rho_bar ? std::sqrt(t * t - std::pow(t, 4) / (out.rho_bar * out.rho_bar)) : 0.0;

    out.normal_ok = out.normal_deviation <= out.normal_bound + out.slack;
    out.chord_arc_ok = out.chord_arc_min * out.stretch >= out.chord_arc_bound - out.slack;
    out.height_ok = out.height_max <= out.height_bound + out.slack;
    out.projection_ok = out.projection_radius >= out.projection_bound - out.slack;
    return out;
}

}  // namespace cmc
