#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "cmc/geometry.hpp"
#include "cmc/grid.hpp"

namespace cmc {

/// Geometry needed by the metric-aware operators of one surface patch.
struct OperatorContext {
    ParamGrid grid;
    FundamentalForms forms;
    ShapeData shape;

    static OperatorContext from_mesh(const SurfaceMesh& mesh) {
        auto fs = compute_forms_and_shape(mesh);
        return {mesh.grid, std::move(fs.forms), std::move(fs.shape)};
    }

    /// Nodal area weight sqrt(EG - F^2) h_s h_t.
    double area_weight(std::size_t k) const {
        return std::sqrt(forms.det(k)) * grid.h_s() * grid.h_t();
    }
    std::vector<double> area_weights() const {
        std::vector<double> w(grid.size());
        for (std::size_t k = 0; k < w.size(); ++k) w[k] = area_weight(k);
        return w;
    }
};

/// Nine-point stencil of the divergence-form operator sqrt(det) * Delta at an
/// interior node. Offsets are (di, dj) in {-1, 0, 1}^2, stored at (di+1)*3 + (dj+1).
///
/// With a = G/sqrt(det), b = -F/sqrt(det), c = E/sqrt(det):
///   sqrt(det) Delta u = d_s(a u_s + b u_t) + d_t(b u_s + c u_t),
/// discretized with midpoint-averaged a, c for the diagonal fluxes and central
/// differences for the mixed fluxes. Weighted by h_s h_t the stencil is
/// symmetric between any two interior nodes and its coefficients sum to zero.
struct LaplaceStencil {
    std::array<double, 9> c{};
    double& at(int di, int dj) { return c[(di + 1) * 3 + (dj + 1)]; }
    double at(int di, int dj) const { return c[(di + 1) * 3 + (dj + 1)]; }
};

inline LaplaceStencil laplace_stencil(const OperatorContext& ctx, int i, int j) {
    const auto& g = ctx.grid;
    const auto& ff = ctx.forms;
    auto coef = [&](int ii, int jj, int which) {
        const std::size_t k = g.index(ii, jj);
        const double root = std::sqrt(ff.det(k));
        switch (which) {
            case 0: return ff.G[k] / root;
            case 1: return -ff.F[k] / root;
            default: return ff.E[k] / root;
        }
    };
    const double hs2 = g.h_s() * g.h_s();
    const double ht2 = g.h_t() * g.h_t();
    const double hst = 4.0 * g.h_s() * g.h_t();

    LaplaceStencil st;
    const double a0 = coef(i, j, 0);
    const double a_p = 0.5 * (a0 + coef(i + 1, j, 0)) / hs2;
    const double a_m = 0.5 * (a0 + coef(i - 1, j, 0)) / hs2;
    const double c0 = coef(i, j, 2);
    const double c_p = 0.5 * (c0 + coef(i, j + 1, 2)) / ht2;
    const double c_m = 0.5 * (c0 + coef(i, j - 1, 2)) / ht2;
    st.at(1, 0) += a_p;
    st.at(-1, 0) += a_m;
    st.at(0, 1) += c_p;
    st.at(0, -1) += c_m;
    st.at(0, 0) -= a_p + a_m + c_p + c_m;

    const double b_ip = coef(i + 1, j, 1), b_im = coef(i - 1, j, 1);
    const double b_jp = coef(i, j + 1, 1), b_jm = coef(i, j - 1, 1);
    st.at(1, 1) += (b_ip + b_jp) / hst;
    st.at(-1, -1) += (b_im + b_jm) / hst;
    st.at(1, -1) -= (b_ip + b_jm) / hst;
    st.at(-1, 1) -= (b_im + b_jp) / hst;
    return st;
}

/// Laplace-Beltrami operator of the patch metric. Only interior nodes are
/// trusted; boundary-ring entries of the result are set to 0.
inline ScalarField laplace_beltrami(const OperatorContext& ctx, const ScalarField& u) {
    require_same_grid(ctx.grid, u.grid(), "laplace_beltrami");
    const auto& g = ctx.grid;
    ScalarField out(g);
    for (int i = 1; i + 1 < g.n_s; ++i)
        for (int j = 1; j + 1 < g.n_t; ++j) {
            const auto st = laplace_stencil(ctx, i, j);
            const double u0 = u.at(i, j);
            double acc = 0.0;
            // differences against the centre value annihilate constants exactly
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj)
                    if (di || dj) acc += st.at(di, dj) * (u.at(i + di, j + dj) - u0);
            out.at(i, j) = acc / std::sqrt(ctx.forms.det(g.index(i, j)));
        }
    return out;
}

/// Jacobi operator L u = Delta u + |A|^2 u (interior nodes; boundary entries 0).
inline ScalarField jacobi_apply(const OperatorContext& ctx, const ScalarField& u) {
    auto out = laplace_beltrami(ctx, u);
    const auto& g = ctx.grid;
    for (std::size_t k = 0; k < out.size(); ++k)
        if (!g.is_boundary(k)) out[k] += ctx.shape.A2[k] * u[k];
    return out;
}

/// Mean curvature div(grad u / sqrt(1 + |grad u|^2)) of the graph z = u(s, t)
/// over the flat (s, t) plane. Second-order one-sided differences on the boundary.
inline ScalarField euclidean_graph_H(const ScalarField& u) {
    const auto& g = u.grid();
    const auto us = fd::d_s(g, u.values());
    const auto ut = fd::d_t(g, u.values());
    std::vector<double> fs(u.size()), ft(u.size());
    for (std::size_t k = 0; k < u.size(); ++k) {
        const double w = std::sqrt(1.0 + us[k] * us[k] + ut[k] * ut[k]);
        fs[k] = us[k] / w;
        ft[k] = ut[k] / w;
    }
    const auto dfs = fd::d_s(g, fs);
    const auto dft = fd::d_t(g, ft);
    std::vector<double> h(u.size());
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = dfs[k] + dft[k];
    return ScalarField(g, std::move(h));
}

/// Mean curvature of the normal graph x + u(x) N(x), reported on the base grid.
inline ScalarField exact_normal_graph_H(const SurfaceMesh& mesh, const ScalarField& u) {
    const auto varied = normal_variation(mesh, u);
    auto fs = compute_forms_and_shape(varied);
    return ScalarField(mesh.grid, std::move(fs.shape.H));
}

/// Defect between the linearization and the true change of mean curvature:
///   Q(u) = L u - (H[x + uN] - H_base),  H_base = ctx.shape.H.
/// Boundary-ring entries are 0 (the Dirichlet problem never reads them).
inline ScalarField remainder_Q(const OperatorContext& ctx, const SurfaceMesh& mesh, const ScalarField& u) {
    require_same_grid(ctx.grid, mesh.grid, "remainder_Q");
    auto q = jacobi_apply(ctx, u);
    const auto h = exact_normal_graph_H(mesh, u);
    for (std::size_t k = 0; k < q.size(); ++k) {
        if (ctx.grid.is_boundary(k))
            q[k] = 0.0;
        else
            q[k] -= h[k] - ctx.shape.H[k];
    }
    return q;
}

/// Area-weighted nodal inner product sum_k w_k a_k b_k.
inline double inner_product_dA(const OperatorContext& ctx, const ScalarField& a, const ScalarField& b) {
    require_same_grid(a.grid(), b.grid(), "inner_product_dA");
    require_same_grid(ctx.grid, a.grid(), "inner_product_dA");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) acc += ctx.area_weight(k) * a[k] * b[k];
    return acc;
}

}  // namespace cmc
