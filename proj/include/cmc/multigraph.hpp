#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "cmc/geodesic.hpp"
#include "cmc/operators.hpp"

namespace cmc {

/// Node nearest the Euclidean origin; the base point of the multigraph search.
inline std::size_t base_node(const SurfaceMesh& mesh) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < mesh.size(); ++k)
        if (mesh.position[k].squaredNorm() < mesh.position[best].squaredNorm()) best = k;
    return best;
}

/// Orthonormal frame (e1, e2, axis) centred on the base node. e1 is the part of
/// the base normal orthogonal to the axis (falling back to the s-tangent), so the
/// frame moves with the mesh under rigid motions.
struct AxisFrame {
    Vec3 center = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    Vec3 e1 = Vec3::UnitX();
    Vec3 e2 = Vec3::UnitY();

    static AxisFrame make(const SurfaceMesh& mesh, const Vec3& axis, const Vec3& center, std::size_t base) {
        const double an = axis.norm();
        if (!(an > 0.0) || !axis.allFinite()) throw InvalidArgument("multigraph axis must be a nonzero finite vector");
        AxisFrame f;
        f.center = center;
        f.axis = axis / an;
        auto orth = [&](const Vec3& v) { return Vec3(v - v.dot(f.axis) * f.axis); };
        Vec3 e = orth(mesh.normal[base]);
        if (e.norm() < 1e-6) {
            const auto& g = mesh.grid;
            const int i = g.i_of(base), j = g.j_of(base);
            const int ii = i + 1 < g.n_s ? i + 1 : i - 1;
            e = orth(mesh.x(ii, j) - mesh.x(i, j));
        }
        if (e.norm() < 1e-12) {
            const int c = f.axis.cwiseAbs().minCoeff() == std::abs(f.axis.x()) ? 0 : 1;
            e = orth(Vec3::Unit(c));
        }
        f.e1 = e.normalized();
        f.e2 = f.axis.cross(f.e1);
        return f;
    }

    Vec3 local(const Vec3& p) const {
        const Vec3 d = p - center;
        return {d.dot(e1), d.dot(e2), d.dot(axis)};
    }
};

/// Per-node cylindrical coordinates about an axis, theta unwrapped along the mesh.
struct CoverChart {
    AxisFrame frame;
    std::size_t base = 0;
    std::vector<double> rho, theta, z;
    std::vector<char> charted;
    std::vector<std::size_t> excluded;  // nodes closer than rho_floor to the axis
};

namespace detail {

inline double wrap_angle(double a) {
    a = std::remainder(a, 2.0 * std::numbers::pi);
    return a;
}

/// Breadth-first theta unwrapping of every 8-connected component of `mask`,
/// seeded at `first` (if in the mask) and then at the lowest index of each
/// remaining component. Throws NotChartable if some grid edge still jumps by
/// pi or more afterwards, i.e. the increments around a cycle do not telescope.
inline std::vector<double> unwrap_theta(const ParamGrid& g, const std::vector<double>& raw,
                                        const std::vector<char>& mask, std::size_t first) {
    std::vector<double> theta(g.size(), 0.0);
    std::vector<char> done(g.size(), 0);
    auto grow = [&](std::size_t seed) {
        std::queue<std::size_t> q;
        theta[seed] = raw[seed];
        done[seed] = 1;
        q.push(seed);
        while (!q.empty()) {
            const std::size_t k = q.front();
            q.pop();
            const int i = g.i_of(k), j = g.j_of(k);
            for (const auto& nb : kNeighbours) {
                const int ii = i + nb[0], jj = j + nb[1];
                if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
                const std::size_t l = g.index(ii, jj);
                if (!mask[l] || done[l]) continue;
                theta[l] = theta[k] + wrap_angle(raw[l] - raw[k]);
                done[l] = 1;
                q.push(l);
            }
        }
    };
    if (first < g.size() && mask[first]) grow(first);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (mask[k] && !done[k]) grow(k);

    std::vector<std::size_t> bad;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!mask[k]) continue;
        const int i = g.i_of(k), j = g.j_of(k);
        for (const auto& nb : kNeighbours) {
            const int ii = i + nb[0], jj = j + nb[1];
            if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
            const std::size_t l = g.index(ii, jj);
            if (mask[l] && std::abs(theta[l] - theta[k]) >= std::numbers::pi) {
                bad.push_back(k);
                break;
            }
        }
    }
    if (!bad.empty())
        throw NotChartable("theta does not unwrap consistently (the axis passes through the surface) near nodes " +
                               node_list(g, bad),
                           bad);
    return theta;
}

}  // namespace detail

inline CoverChart unwrap_to_cover(const SurfaceMesh& mesh, const Vec3& axis, double rho_floor = 1e-6) {
    const auto& g = mesh.grid;
    CoverChart c;
    c.base = base_node(mesh);
    c.frame = AxisFrame::make(mesh, axis, mesh.position[c.base], c.base);
    const std::size_t n = g.size();
    c.rho.resize(n);
    c.z.resize(n);
    c.charted.assign(n, 0);
    std::vector<double> raw(n);
    std::size_t first = n;
    double first_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < n; ++k) {
        const Vec3 p = c.frame.local(mesh.position[k]);
        c.rho[k] = std::hypot(p.x(), p.y());
        c.z[k] = p.z();
        raw[k] = std::atan2(p.y(), p.x());
        if (c.rho[k] < rho_floor) {
            c.excluded.push_back(k);
            continue;
        }
        c.charted[k] = 1;
        const double d = (mesh.position[k] - mesh.position[c.base]).norm();
        if (d < first_d) {
            first_d = d;
            first = k;
        }
    }
    c.theta = detail::unwrap_theta(g, raw, c.charted, first);
    return c;
}

struct MultigraphCertificate {
    Vec3 axis = Vec3::UnitZ();
    int N = 1;
    double R_bar = 0.0;
    double omega = 2.0;
    double epsilon = 0.0;
    double grad_bound = 0.0;
    double dist_to_origin = 0.0;

    // chart reconstruction data
    Vec3 center = Vec3::Zero();
    std::size_t base_node = 0;
    std::size_t anchor_node = 0;
    double anchor_theta = 0.0;
    double theta_center = 0.0;
    double stretch = 1.0;

    // samples u(rho_a, theta_b), stored row-major in a (rho index)
    int n_rho = 0;
    int n_theta = 0;
    std::vector<double> rho, theta, u;

    double sample(int a, int b) const { return u[static_cast<std::size_t>(a) * n_theta + b]; }
};

struct DetectOptions {
    int axis_count = 21;
    double rho_floor = 1e-6;
    double ladder_ratio = 1.1;
    int max_samples_per_axis = 4096;
    /// Agreement required between overlapping interpolants at one sample.
    double value_tol = 1e-9;
};

/// Icosahedral axis sample: the 15 edge-midpoint axes (coordinate axes first)
/// followed by the 6 vertex axes, one unit vector per antipodal pair.
inline std::vector<Vec3> icosahedral_axes() {
    const double phi = 0.5 * (1.0 + std::sqrt(5.0));
    std::vector<Vec3> v;
    for (double a : {-1.0, 1.0})
        for (double b : {-phi, phi}) {
            v.emplace_back(0.0, a, b);
            v.emplace_back(a, b, 0.0);
            v.emplace_back(b, 0.0, a);
        }
    auto canonical = [](Vec3 d) {
        d.normalize();
        for (int c = 0; c < 3; ++c) {
            if (std::abs(d[c]) > 1e-12) {
                if (d[c] < 0.0) d = -d;
                break;
            }
        }
        return d;
    };
    auto push_unique = [](std::vector<Vec3>& list, const Vec3& d) {
        for (const auto& e : list)
            if ((e - d).norm() < 1e-9) return;
        list.push_back(d);
    };
    std::vector<Vec3> mids;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            if (std::abs((v[i] - v[j]).norm() - 2.0) < 1e-9) push_unique(mids, canonical(0.5 * (v[i] + v[j])));
    auto zeros = [](const Vec3& d) { return (d.array().abs() < 1e-12).count(); };
    std::stable_sort(mids.begin(), mids.end(), [&](const Vec3& a, const Vec3& b) {
        if (zeros(a) != zeros(b)) return zeros(a) > zeros(b);
        return std::lexicographical_compare(b.data(), b.data() + 3, a.data(), a.data() + 3);
    });
    std::vector<Vec3> out = mids;
    std::vector<Vec3> verts;
    for (const auto& p : v) push_unique(verts, canonical(p));
    for (const auto& p : verts) out.push_back(p);
    return out;
}

/// Normal and principal directions at the interior node of largest |A|^2.
inline std::vector<Vec3> principal_axes(const SurfaceMesh& mesh) {
    const auto& g = mesh.grid;
    const auto fs = compute_forms_and_shape(mesh);
    std::size_t best = g.size();
    for (std::size_t k = 0; k < g.size(); ++k)
        if (!g.is_boundary(k) && (best == g.size() || fs.shape.A2[k] > fs.shape.A2[best])) best = k;
    if (best == g.size()) best = 0;
    const auto& ff = fs.forms;
    Eigen::Matrix2d first, second;
    first << ff.E[best], ff.F[best], ff.F[best], ff.G[best];
    second << ff.e[best], ff.f[best], ff.f[best], ff.g[best];
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::Matrix2d> es(second, first);
    const auto X = fd::jet(g, mesh.position);
    std::vector<Vec3> axes{mesh.normal[best]};
    for (int c = 0; c < 2; ++c) {
        const Eigen::Vector2d d = es.eigenvectors().col(c);
        axes.push_back((d[0] * X.s[best] + d[1] * X.t[best]).normalized());
    }
    return axes;
}

inline std::vector<Vec3> candidate_axes(const SurfaceMesh& mesh, int count) {
    auto axes = principal_axes(mesh);
    for (const auto& a : icosahedral_axes()) axes.push_back(a);
    if (count < 1) throw InvalidArgument("axis count must be positive");
    if (static_cast<std::size_t>(count) < axes.size()) axes.resize(static_cast<std::size_t>(count));
    return axes;
}

namespace detail {

struct SheetSamples {
    int n_rho = 0, n_theta = 0;
    std::vector<double> rho, theta, u;
    std::vector<int> hits;
    bool single_valued = true;
};

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = k + 1 == n ? b : a + (b - a) * k / (n - 1);
    return out;
}

/// Barycentric coordinates of (x, y) in the triangle with corners p[0..2].
inline bool barycentric(const std::array<Eigen::Vector2d, 3>& p, double x, double y, std::array<double, 3>& w) {
    const double det = (p[1].x() - p[0].x()) * (p[2].y() - p[0].y()) - (p[2].x() - p[0].x()) * (p[1].y() - p[0].y());
    if (std::abs(det) < 1e-300) return false;
    w[1] = ((x - p[0].x()) * (p[2].y() - p[0].y()) - (p[2].x() - p[0].x()) * (y - p[0].y())) / det;
    w[2] = ((p[1].x() - p[0].x()) * (y - p[0].y()) - (x - p[0].x()) * (p[1].y() - p[0].y())) / det;
    w[0] = 1.0 - w[1] - w[2];
    constexpr double tol = -1e-12;
    return w[0] >= tol && w[1] >= tol && w[2] >= tol;
}

/// Sup of sqrt(u_rho^2 + (u_theta / rho)^2) over the sample grid.
inline double sample_gradient(const std::vector<double>& rho, const std::vector<double>& theta,
                              const std::vector<double>& u, int n_rho, int n_theta) {
    const double hr = (rho.back() - rho.front()) / (n_rho - 1);
    const double ht = (theta.back() - theta.front()) / (n_theta - 1);
    double sup = 0.0;
    for (int a = 0; a < n_rho; ++a)
        for (int b = 0; b < n_theta; ++b) {
            const double ur = fd::first<double>([&](int m) { return u[static_cast<std::size_t>(m) * n_theta + b]; },
                                                a, n_rho, hr);
            const double ut = fd::first<double>([&](int m) { return u[static_cast<std::size_t>(a) * n_theta + m]; },
                                                b, n_theta, ht);
            const double r = rho[static_cast<std::size_t>(a)];
            sup = std::max(sup, std::sqrt(ur * ur + (ut / r) * (ut / r)));
        }
    return sup;
}

}  // namespace detail

namespace detail {

/// Everything detect/verify need about one axis.
struct AxisData {
    AxisFrame frame;
    std::vector<double> rho, z, raw;
    double radial_margin = 0.0;  // largest rho change along a triangle edge
};

inline AxisData axis_data(const SurfaceMesh& mesh, const Vec3& axis, const Vec3& center, std::size_t base) {
    const auto& g = mesh.grid;
    AxisData d;
    d.frame = AxisFrame::make(mesh, axis, center, base);
    d.rho.resize(g.size());
    d.z.resize(g.size());
    d.raw.resize(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec3 p = d.frame.local(mesh.position[k]);
        d.rho[k] = std::hypot(p.x(), p.y());
        d.z[k] = p.z();
        d.raw[k] = std::atan2(p.y(), p.x());
    }
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            if (i + 1 < g.n_s)
                d.radial_margin = std::max(d.radial_margin, std::abs(d.rho[g.index(i + 1, j)] - d.rho[g.index(i, j)]));
            if (j + 1 < g.n_t)
                d.radial_margin = std::max(d.radial_margin, std::abs(d.rho[g.index(i, j + 1)] - d.rho[g.index(i, j)]));
            if (i + 1 < g.n_s && j + 1 < g.n_t)
                d.radial_margin =
                    std::max(d.radial_margin, std::abs(d.rho[g.index(i + 1, j + 1)] - d.rho[g.index(i, j)]));
        }
    return d;
}

/// Nodes with rho in [R - margin, omega R + margin] (and above rho_floor).
inline std::vector<char> band_mask(const AxisData& d, double R, double omega, double rho_floor) {
    std::vector<char> m(d.rho.size(), 0);
    for (std::size_t k = 0; k < m.size(); ++k)
        m[k] = d.rho[k] >= std::max(rho_floor, R - d.radial_margin) && d.rho[k] <= omega * R + d.radial_margin;
    return m;
}

/// 8-connected components of a mask, each listed in increasing node order.
inline std::vector<std::vector<std::size_t>> components(const ParamGrid& g, const std::vector<char>& mask) {
    std::vector<std::vector<std::size_t>> out;
    std::vector<char> seen(g.size(), 0);
    for (std::size_t s = 0; s < g.size(); ++s) {
        if (!mask[s] || seen[s]) continue;
        std::vector<std::size_t> comp;
        std::queue<std::size_t> q;
        q.push(s);
        seen[s] = 1;
        while (!q.empty()) {
            const std::size_t k = q.front();
            q.pop();
            comp.push_back(k);
            const int i = g.i_of(k), j = g.j_of(k);
            for (const auto& nb : kNeighbours) {
                const int ii = i + nb[0], jj = j + nb[1];
                if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
                const std::size_t l = g.index(ii, jj);
                if (mask[l] && !seen[l]) {
                    seen[l] = 1;
                    q.push(l);
                }
            }
        }
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
    }
    return out;
}

/// Triangles of the grid triangulation whose corners all lie in `mask`.
inline std::vector<std::array<std::size_t, 3>> masked_triangles(const ParamGrid& g, const std::vector<char>& mask) {
    std::vector<std::array<std::size_t, 3>> tris;
    for (int i = 0; i + 1 < g.n_s; ++i)
        for (int j = 0; j + 1 < g.n_t; ++j) {
            const std::size_t a = g.index(i, j), b = g.index(i + 1, j), c = g.index(i + 1, j + 1),
                              d = g.index(i, j + 1);
            if (mask[a] && mask[b] && mask[c]) tris.push_back({a, b, c});
            if (mask[a] && mask[c] && mask[d]) tris.push_back({a, c, d});
        }
    return tris;
}

/// Finest local angular and radial steps of the sheet: for each node the
/// largest |d theta| (|d rho|) to a 4-neighbour in the sheet, minimized over nodes.
inline std::pair<double, double> sheet_steps(const ParamGrid& g, const std::vector<char>& mask,
                                             const std::vector<double>& rho, const std::vector<double>& theta) {
    double dr = std::numeric_limits<double>::infinity(), dt = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!mask[k]) continue;
        const int i = g.i_of(k), j = g.j_of(k);
        double lr = 0.0, lt = 0.0;
        for (const auto& nb : kNeighbours) {
            if (nb[0] && nb[1]) continue;
            const int ii = i + nb[0], jj = j + nb[1];
            if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
            const std::size_t l = g.index(ii, jj);
            if (!mask[l]) continue;
            lr = std::max(lr, std::abs(rho[l] - rho[k]));
            lt = std::max(lt, std::abs(theta[l] - theta[k]));
        }
        if (lr > 0.0) dr = std::min(dr, lr);
        if (lt > 0.0) dt = std::min(dt, lt);
    }
    return {dr, dt};
}

}  // namespace detail

/// Searches for an N-valued graph over [R, omega R] x [-N pi, N pi] (about the
/// sheet's own theta midpoint) with |grad u| <= epsilon and intrinsic distance
/// from the base node at most 4 R (graph distance, stretch-corrected).
/// Returns the first hit in axis order, then ladder order (smallest R first).
inline std::optional<MultigraphCertificate> detect(const SurfaceMesh& mesh, int N, double omega, double epsilon,
                                                   const DetectOptions& opt = {}) {
    if (N < 1) throw InvalidArgument("detect: N must be a positive integer");
    if (!(omega > 1.0)) throw InvalidArgument("detect: omega must exceed 1");
    if (!(epsilon > 0.0)) throw InvalidArgument("detect: epsilon must be positive");
    const auto& g = mesh.grid;
    const std::size_t base = base_node(mesh);
    const Vec3 center = mesh.position[base];
    const auto dist = graph_distances(mesh, base);
    const double stretch = grid_metric_stretch(mesh);
    const double span = 2.0 * N * std::numbers::pi;

    for (const Vec3& axis : candidate_axes(mesh, opt.axis_count)) {
        const auto ad = detail::axis_data(mesh, axis, center, base);
        const double rho_max = *std::max_element(ad.rho.begin(), ad.rho.end());
        for (double R = 10.0 * opt.rho_floor; omega * R <= rho_max; R *= opt.ladder_ratio) {
            const auto band = detail::band_mask(ad, R, omega, opt.rho_floor);
            for (const auto& comp : detail::components(g, band)) {
                std::vector<char> sheet(g.size(), 0);
                for (std::size_t k : comp) sheet[k] = 1;
                std::vector<double> theta;
                try {
                    theta = detail::unwrap_theta(g, ad.raw, sheet, comp.front());
                } catch (const NotChartable&) {
                    continue;
                }
                double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
                for (std::size_t k : comp) {
                    tmin = std::min(tmin, theta[k]);
                    tmax = std::max(tmax, theta[k]);
                }
                if (tmax - tmin < span) continue;
                const double tc = 0.5 * (tmin + tmax);

                const auto [dr, dt] = detail::sheet_steps(g, sheet, ad.rho, theta);
                if (!std::isfinite(dr) || !std::isfinite(dt)) continue;
                const int n_rho = std::clamp(static_cast<int>(std::ceil((omega - 1.0) * R / dr)) + 1, 5,
                                             opt.max_samples_per_axis);
                const int n_theta =
                    std::clamp(static_cast<int>(std::ceil(span / dt)) + 1, 5, opt.max_samples_per_axis);

                detail::SheetSamples smp;
                smp.n_rho = n_rho;
                smp.n_theta = n_theta;
                smp.rho = detail::linspace(R, omega * R, n_rho);
                smp.theta = detail::linspace(tc - 0.5 * span, tc + 0.5 * span, n_theta);
                smp.u.assign(static_cast<std::size_t>(n_rho) * n_theta, 0.0);
                smp.hits.assign(smp.u.size(), 0);
                const double hr = (smp.rho.back() - smp.rho.front()) / (n_rho - 1);
                const double ht = span / (n_theta - 1);
                for (const auto& tri : detail::masked_triangles(g, sheet)) {
                    std::array<Eigen::Vector2d, 3> p;
                    for (int c = 0; c < 3; ++c) p[c] = {ad.rho[tri[c]], theta[tri[c]]};
                    const double r0 = std::min({p[0].x(), p[1].x(), p[2].x()});
                    const double r1 = std::max({p[0].x(), p[1].x(), p[2].x()});
                    const double t0 = std::min({p[0].y(), p[1].y(), p[2].y()});
                    const double t1 = std::max({p[0].y(), p[1].y(), p[2].y()});
                    const int a0 = std::max(0, static_cast<int>(std::floor((r0 - R) / hr)));
                    const int a1 = std::min(n_rho - 1, static_cast<int>(std::ceil((r1 - R) / hr)));
                    const int b0 = std::max(0, static_cast<int>(std::floor((t0 - smp.theta.front()) / ht)));
                    const int b1 = std::min(n_theta - 1, static_cast<int>(std::ceil((t1 - smp.theta.front()) / ht)));
                    for (int a = a0; a <= a1 && smp.single_valued; ++a)
                        for (int b = b0; b <= b1; ++b) {
                            std::array<double, 3> w;
                            if (!detail::barycentric(p, smp.rho[a], smp.theta[b], w)) continue;
                            const double val = w[0] * ad.z[tri[0]] + w[1] * ad.z[tri[1]] + w[2] * ad.z[tri[2]];
                            const std::size_t s = static_cast<std::size_t>(a) * n_theta + b;
                            if (smp.hits[s] == 0) {
                                smp.u[s] = val;
                            } else if (std::abs(val - smp.u[s]) > opt.value_tol * (1.0 + std::abs(val))) {
                                smp.single_valued = false;
                                break;
                            }
                            ++smp.hits[s];
                        }
                    if (!smp.single_valued) break;
                }
                if (!smp.single_valued) continue;
                if (std::find(smp.hits.begin(), smp.hits.end(), 0) != smp.hits.end()) continue;

                const double grad = detail::sample_gradient(smp.rho, smp.theta, smp.u, n_rho, n_theta);
                if (grad > epsilon) continue;

                double d0 = std::numeric_limits<double>::infinity();
                for (std::size_t k : comp)
                    if (ad.rho[k] >= R && ad.rho[k] <= omega * R && std::abs(theta[k] - tc) <= 0.5 * span)
                        d0 = std::min(d0, dist[k]);
                if (!(d0 <= 4.0 * R * stretch)) continue;

                MultigraphCertificate cert;
                cert.axis = ad.frame.axis;
                cert.N = N;
                cert.R_bar = R;
                cert.omega = omega;
                cert.epsilon = epsilon;
                cert.grad_bound = grad;
                cert.dist_to_origin = d0;
                cert.center = center;
                cert.base_node = base;
                cert.anchor_node = comp.front();
                cert.anchor_theta = theta[comp.front()];
                cert.theta_center = tc;
                cert.stretch = stretch;
                cert.n_rho = n_rho;
                cert.n_theta = n_theta;
                cert.rho = std::move(smp.rho);
                cert.theta = std::move(smp.theta);
                cert.u = std::move(smp.u);
                return cert;
            }
        }
    }
    return std::nullopt;
}

/// Diagnostics of verify_certificate; `ok` is the verdict.
struct CertificateCheck {
    bool ok = false;
    double measured_grad = 0.0;
    double max_sample_error = 0.0;
    std::size_t uncovered = 0;
    std::size_t multivalued = 0;
    std::string reason;
};

/// Re-derives the chart from the certificate's axis, centre and anchor, then
/// re-locates every sample point by exhaustive triangle search (independent of
/// the raster pass used by detect) and re-measures the invariants. Tolerances
/// are twice those of detect.
inline CertificateCheck verify_certificate_details(const SurfaceMesh& mesh, const MultigraphCertificate& cert,
                                                   const DetectOptions& opt = {}) {
    CertificateCheck out;
    const auto& g = mesh.grid;
    auto fail = [&](std::string why) {
        out.ok = false;
        out.reason = std::move(why);
        return out;
    };
    if (cert.n_rho < 2 || cert.n_theta < 2 || cert.u.size() != static_cast<std::size_t>(cert.n_rho) * cert.n_theta)
        return fail("certificate sample grid is empty or inconsistent");
    if (cert.base_node >= g.size() || cert.anchor_node >= g.size()) return fail("certificate node index out of range");
    if (!(cert.omega > 1.0) || !(cert.R_bar > 0.0) || cert.N < 1) return fail("certificate parameters out of range");

    const double span = 2.0 * cert.N * std::numbers::pi;
    const auto rho_s = detail::linspace(cert.R_bar, cert.omega * cert.R_bar, cert.n_rho);
    const auto theta_s = detail::linspace(cert.theta_center - 0.5 * span, cert.theta_center + 0.5 * span, cert.n_theta);
    const double grid_tol = 1e-9 * (1.0 + std::abs(cert.theta_center) + cert.omega * cert.R_bar);
    if (cert.rho.size() != rho_s.size() || cert.theta.size() != theta_s.size())
        return fail("sample coordinates do not match the certificate parameters");
    for (std::size_t a = 0; a < rho_s.size(); ++a)
        if (std::abs(cert.rho[a] - rho_s[a]) > grid_tol) return fail("sample radii do not match the certificate");
    for (std::size_t b = 0; b < theta_s.size(); ++b)
        if (std::abs(cert.theta[b] - theta_s[b]) > grid_tol) return fail("sample angles do not match the certificate");

    const auto ad = detail::axis_data(mesh, cert.axis, cert.center, cert.base_node);
    const auto band = detail::band_mask(ad, cert.R_bar, cert.omega, opt.rho_floor);
    if (!band[cert.anchor_node]) return fail("anchor node is outside the certified annulus");
    if (std::abs(detail::wrap_angle(cert.anchor_theta - ad.raw[cert.anchor_node])) > 1e-6)
        return fail("anchor angle does not match the mesh");
    std::vector<char> sheet(g.size(), 0);
    for (const auto& comp : detail::components(g, band))
        if (std::binary_search(comp.begin(), comp.end(), cert.anchor_node))
            for (std::size_t k : comp) sheet[k] = 1;
    std::vector<double> raw = ad.raw;
    raw[cert.anchor_node] = cert.anchor_theta;  // fixes the sheet of the cover
    std::vector<double> theta;
    try {
        theta = detail::unwrap_theta(g, raw, sheet, cert.anchor_node);
    } catch (const NotChartable& e) {
        return fail(e.what());
    }

    const auto tris = detail::masked_triangles(g, sheet);
    const double tol = 2.0 * opt.value_tol;
    std::vector<double> u(cert.u.size(), 0.0);
    for (int a = 0; a < cert.n_rho; ++a)
        for (int b = 0; b < cert.n_theta; ++b) {
            int hits = 0;
            double first = 0.0;
            bool multi = false;
            for (const auto& tri : tris) {
                std::array<Eigen::Vector2d, 3> p;
                for (int c = 0; c < 3; ++c) p[c] = {ad.rho[tri[c]], theta[tri[c]]};
                std::array<double, 3> w;
                if (!detail::barycentric(p, rho_s[a], theta_s[b], w)) continue;
                const double val = w[0] * ad.z[tri[0]] + w[1] * ad.z[tri[1]] + w[2] * ad.z[tri[2]];
                if (hits == 0)
                    first = val;
                else if (std::abs(val - first) > tol * (1.0 + std::abs(val)))
                    multi = true;
                ++hits;
            }
            const std::size_t s = static_cast<std::size_t>(a) * cert.n_theta + b;
            if (hits == 0) ++out.uncovered;
            if (multi) ++out.multivalued;
            u[s] = first;
            if (hits) out.max_sample_error = std::max(out.max_sample_error, std::abs(first - cert.u[s]));
        }
    if (out.uncovered) return fail(std::to_string(out.uncovered) + " sample points fall outside the charted sheet");
    if (out.multivalued) return fail(std::to_string(out.multivalued) + " sample points are not single-valued");
    if (out.max_sample_error > tol * (1.0 + cert.omega * cert.R_bar + std::abs(cert.theta_center)))
        return fail("re-interpolated heights disagree with the certificate samples");
    out.measured_grad = detail::sample_gradient(rho_s, theta_s, u, cert.n_rho, cert.n_theta);
    if (out.measured_grad > cert.grad_bound * (1.0 + tol) + tol)
        return fail("measured gradient exceeds the certified bound");
    if (cert.grad_bound > cert.epsilon) return fail("certified gradient bound exceeds epsilon");

    const auto dist = graph_distances(mesh, cert.base_node);
    double d0 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < g.size(); ++k)
        if (sheet[k] && ad.rho[k] >= cert.R_bar && ad.rho[k] <= cert.omega * cert.R_bar &&
            std::abs(theta[k] - cert.theta_center) <= 0.5 * span)
            d0 = std::min(d0, dist[k]);
    if (!(d0 <= 4.0 * cert.R_bar * grid_metric_stretch(mesh))) return fail("sheet is farther than 4 R from the base point");
    if (std::abs(d0 - cert.dist_to_origin) > 1e-9 * (1.0 + d0)) return fail("intrinsic distance does not match the certificate");
    out.ok = true;
    return out;
}

inline bool verify_certificate(const SurfaceMesh& mesh, const MultigraphCertificate& cert) {
    return verify_certificate_details(mesh, cert).ok;
}

}  // namespace cmc
