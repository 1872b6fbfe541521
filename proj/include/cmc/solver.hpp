#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "cmc/geodesic.hpp"
#include "cmc/linear.hpp"
#include "cmc/operators.hpp"

namespace cmc {

/// Default Appendix-style patch: s in [-2, 2], t in [-2 pi, 2 pi], 161 x 241 nodes.
inline ParamGrid default_helicoid_grid() {
    return ParamGrid::make(-2.0, 2.0, -2.0 * std::numbers::pi, 2.0 * std::numbers::pi, 161, 241);
}

struct SolverConfig {
    double H_target = 1e-2;
    int max_iter = 50;
    double step_tol = 1e-10;
    double residual_tol = 1e-4;
    ParamGrid grid = default_helicoid_grid();
    double spectral_floor = 1e-6;
    std::uint64_t seed = 20240611;
    int probes = 16;

    void validate() const {
        grid.validate();
        if (!std::isfinite(H_target)) throw InvalidArgument("SolverConfig: H_target must be finite");
        if (!(step_tol > 0.0) || !(residual_tol > 0.0) || !(spectral_floor > 0.0))
            throw InvalidArgument("SolverConfig: tolerances must be positive");
        if (max_iter < 2) throw InvalidArgument("SolverConfig: max_iter must be at least 2");
        if (probes < 16) throw InvalidArgument("SolverConfig: at least 16 randomized probes are required");
    }
};

/// Discrete stand-in for the C^{2,lambda} norm: sup of the value, of the
/// metric gradient sqrt(g^{ij} u_i u_j), and of the coordinate second
/// differences |u_ss|, |u_st|, |u_tt|.
struct DiscreteC2Norm {
    double sup_u = 0.0;
    double sup_grad = 0.0;
    double sup_hess = 0.0;

    double value() const { return sup_u + sup_grad + sup_hess; }

    static DiscreteC2Norm of(const OperatorContext& ctx, const ScalarField& u) {
        require_same_grid(ctx.grid, u.grid(), "DiscreteC2Norm");
        const auto d = fd::jet(ctx.grid, u.values());
        const auto& ff = ctx.forms;
        DiscreteC2Norm n;
        for (std::size_t k = 0; k < u.size(); ++k) {
            const double det = ff.det(k);
            const double g2 = (ff.G[k] * d.s[k] * d.s[k] - 2.0 * ff.F[k] * d.s[k] * d.t[k] + ff.E[k] * d.t[k] * d.t[k]) / det;
            n.sup_u = std::max(n.sup_u, std::abs(u[k]));
            n.sup_grad = std::max(n.sup_grad, std::sqrt(std::max(0.0, g2)));
            n.sup_hess = std::max({n.sup_hess, std::abs(d.ss[k]), std::abs(d.st[k]), std::abs(d.tt[k])});
        }
        return n;
    }
};

struct IterationRecord {
    int n = 0;
    double sup_u = 0.0;
    double sup_grad = 0.0;
    double c2_norm = 0.0;
    double step = 0.0;
    double contraction = std::numeric_limits<double>::quiet_NaN();  // undefined for n = 1
};

struct SolveReport {
    double H_target = 0.0;
    std::vector<IterationRecord> iterations;
    double B_estimate = 0.0;
    double lambda_min_abs = 0.0;
    double final_residual = 0.0;
    bool converged = false;
    bool embedded = false;
    /// Slope c of the fit H[x + t u0 N] - H[x] = c L(t u0) on the unit sphere fixture.
    double linearization_constant = 0.0;
    std::string message;

    double contraction_max() const {
        double e = 0.0;
        for (const auto& r : iterations)
            if (std::isfinite(r.contraction)) e = std::max(e, r.contraction);
        return e;
    }

    /// A posteriori Appendix induction: ||u^n|| <= B H (1 + 1/(1 - eps_max)).
    bool norm_ladder_holds() const {
        const double eps = contraction_max();
        if (!(eps < 1.0)) return false;
        const double bound = B_estimate * std::abs(H_target) * (1.0 + 1.0 / (1.0 - eps));
        return std::all_of(iterations.begin(), iterations.end(),
                           [&](const IterationRecord& r) { return r.c2_norm <= bound; });
    }
};

/// The iterates stopped contracting (eps_n >= 1 twice in a row): H_target is
/// outside the admissible range for this patch.
class ContractionFailure : public Error {
public:
    ContractionFailure(const std::string& what, SolveReport report)
        : Error(what), report_(std::move(report)) {}
    const SolveReport& report() const noexcept { return report_; }

private:
    SolveReport report_;
};

/// Dirichlet problem L u = w on the interior, u = 0 on the boundary ring, with a
/// factorization that is reused across right-hand sides.
class JacobiSolver {
public:
    explicit JacobiSolver(const OperatorContext& ctx)
        : sys_(assemble_dirichlet(ctx, interior_mask(ctx.grid))), lu_(sys_.jacobi_matrix()) {}

    const DirichletSystem& system() const { return sys_; }
    const FactoredMatrix& factor() const { return lu_; }

    ScalarField solve(const ScalarField& w) const {
        const Eigen::VectorXd rhs = sys_.restrict(w).cwiseProduct(sys_.mass);
        return sys_.extend(lu_.solve(rhs));
    }

private:
    DirichletSystem sys_;
    FactoredMatrix lu_;
};

inline ScalarField dirichlet_solve(const OperatorContext& ctx, const ScalarField& w) {
    require_same_grid(ctx.grid, w.grid(), "dirichlet_solve");
    return JacobiSolver(ctx).solve(w);
}

/// Smallest-magnitude eigenvalue (signed) of the discrete Dirichlet Jacobi operator.
inline double check_spectrum(const JacobiSolver& solver) {
    const auto& sys = solver.system();
    return nearest_eigenpair(solver.factor().matrix(), sys.mass, solver.factor(), 0.0).value;
}

inline double check_spectrum(const OperatorContext& ctx) { return check_spectrum(JacobiSolver(ctx)); }

/// Operator-norm estimate sup_w ||L^{-1} w||_{C2} / ||w||_inf over the constant
/// probe, `probes / 2` nodal white-noise probes and `probes - probes / 2` smooth
/// random trigonometric probes, all drawn from a generator seeded with `seed`.
inline double estimate_B(const OperatorContext& ctx, const JacobiSolver& solver, std::uint64_t seed = 20240611,
                         int probes = 16) {
    const auto& g = ctx.grid;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    std::uniform_int_distribution<int> mode(1, 6);

    auto ratio = [&](const ScalarField& w) {
        const double wn = w.sup_norm_interior();
        return DiscreteC2Norm::of(ctx, solver.solve(w)).value() / wn;
    };
    double best = ratio(ScalarField::constant(g, 1.0));
    const int noise = probes / 2;
    for (int p = 0; p < probes; ++p) {
        ScalarField w(g);
        if (p < noise) {
            for (std::size_t k = 0; k < w.size(); ++k) w[k] = unif(rng);
        } else {
            const int ms = mode(rng), mt = mode(rng);
            const double a = unif(rng), b = unif(rng), c = unif(rng);
            const double ps = unif(rng) * std::numbers::pi, pt = unif(rng) * std::numbers::pi;
            w = ScalarField::sample(g, [&](double s, double t) {
                const double x = (s - g.s_min) / (g.s_max - g.s_min);
                const double y = (t - g.t_min) / (g.t_max - g.t_min);
                return a + b * std::cos(std::numbers::pi * ms * x + ps) + c * std::sin(std::numbers::pi * mt * y + pt);
            });
        }
        best = std::max(best, ratio(w));
    }
    return best;
}

inline double estimate_B(const OperatorContext& ctx, std::uint64_t seed = 20240611, int probes = 16) {
    return estimate_B(ctx, JacobiSolver(ctx), seed, probes);
}

/// sin * sin bump vanishing on the boundary of the parameter rectangle.
inline ScalarField boundary_bump(const ParamGrid& g) {
    return ScalarField::sample(g, [&](double s, double t) {
        return std::sin(std::numbers::pi * (s - g.s_min) / (g.s_max - g.s_min)) *
               std::sin(std::numbers::pi * (t - g.t_min) / (g.t_max - g.t_min));
    });
}

/// Least-squares slope c of (H[x + t u0 N] - H[x]) against L(t u0) over the
/// stencil-complete interior.
inline double linearization_constant(const SurfaceMesh& mesh, double t = 1e-4) {
    const auto ctx = OperatorContext::from_mesh(mesh);
    const auto u = t * boundary_bump(mesh.grid);
    const auto lu = jacobi_apply(ctx, u);
    const auto h = exact_normal_graph_H(mesh, u);
    double num = 0.0, den = 0.0;
    const auto& g = mesh.grid;
    for (int i = 2; i < g.n_s - 2; ++i)
        for (int j = 2; j < g.n_t - 2; ++j) {
            const std::size_t k = g.index(i, j);
            num += (h[k] - ctx.shape.H[k]) * lu[k];
            den += lu[k] * lu[k];
        }
    return num / den;
}

/// Sphere-cap fixture on which the linearization constant is reported.
inline double sphere_linearization_constant() {
    const auto grid = ParamGrid::make(0.0, std::numbers::pi, 0.6, std::numbers::pi - 0.6, 61, 61);
    return linearization_constant(build_reference(ReferenceKind::sphere, 1.0, grid));
}

// ---------------------------------------------------------------------------
// Embeddedness

struct EmbeddednessDetails {
    double sup_u = 0.0;
    double sheet_gap = std::numeric_limits<double>::infinity();  // min extrinsic gap of intrinsically far pairs
    double max_curvature = 0.0;                                   // max |k_i| over interior nodes
    double tube_radius = 0.0;                                     // min(sheet_gap / 2, 1 / max_curvature)
    std::size_t crossings = 0;                                    // edge/triangle intersections of the varied mesh
    bool embedded = false;
};

namespace detail {

struct Triangle {
    std::array<std::size_t, 3> v;
};

inline std::vector<Triangle> grid_triangles(const ParamGrid& g) {
    std::vector<Triangle> tris;
    tris.reserve(2 * static_cast<std::size_t>(g.n_s - 1) * (g.n_t - 1));
    for (int i = 0; i + 1 < g.n_s; ++i)
        for (int j = 0; j + 1 < g.n_t; ++j) {
            const std::size_t a = g.index(i, j), b = g.index(i + 1, j), c = g.index(i + 1, j + 1),
                              d = g.index(i, j + 1);
            tris.push_back({{a, b, c}});
            tris.push_back({{a, c, d}});
        }
    return tris;
}

/// Edges of the grid triangulation (s-edges, t-edges and the cell diagonals).
inline std::vector<std::array<std::size_t, 2>> grid_edges(const ParamGrid& g) {
    std::vector<std::array<std::size_t, 2>> edges;
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j) {
            if (i + 1 < g.n_s) edges.push_back({g.index(i, j), g.index(i + 1, j)});
            if (j + 1 < g.n_t) edges.push_back({g.index(i, j), g.index(i, j + 1)});
            if (i + 1 < g.n_s && j + 1 < g.n_t) edges.push_back({g.index(i, j), g.index(i + 1, j + 1)});
        }
    return edges;
}

/// Segment pq against triangle abc (Moller-Trumbore); parallel configurations count as misses.
inline bool segment_hits_triangle(const Vec3& p, const Vec3& q, const Vec3& a, const Vec3& b, const Vec3& c) {
    const Vec3 dir = q - p;
    const Vec3 e1 = b - a, e2 = c - a;
    const Vec3 pv = dir.cross(e2);
    const double det = e1.dot(pv);
    const double scale = dir.norm() * e1.norm() * e2.norm();
    if (std::abs(det) <= 1e-14 * scale) return false;
    const double inv = 1.0 / det;
    const Vec3 tv = p - a;
    const double u = tv.dot(pv) * inv;
    if (u < 0.0 || u > 1.0) return false;
    const Vec3 qv = tv.cross(e1);
    const double v = dir.dot(qv) * inv;
    if (v < 0.0 || u + v > 1.0) return false;
    const double t = e2.dot(qv) * inv;
    return t >= 0.0 && t <= 1.0;
}

struct CellKey {
    long long x, y, z;
    bool operator==(const CellKey&) const = default;
};
struct CellKeyHash {
    std::size_t operator()(const CellKey& k) const {
        std::size_t h = std::hash<long long>{}(k.x);
        h = h * 1000003u ^ std::hash<long long>{}(k.y);
        return h * 1000003u ^ std::hash<long long>{}(k.z);
    }
};

/// Number of (edge, triangle) pairs without a shared vertex that intersect.
inline std::size_t count_self_intersections(const ParamGrid& g, const std::vector<Vec3>& pos) {
    const auto tris = grid_triangles(g);
    const auto edges = grid_edges(g);
    double cell = 0.0;
    for (const auto& e : edges) cell = std::max(cell, (pos[e[0]] - pos[e[1]]).norm());
    if (!(cell > 0.0)) return 0;
    auto key_of = [cell](const Vec3& p) {
        return Eigen::Array3d(p.array() / cell).floor().cast<long long>().eval();
    };
    std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> buckets;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const Vec3& a = pos[tris[t].v[0]];
        const Vec3& b = pos[tris[t].v[1]];
        const Vec3& c = pos[tris[t].v[2]];
        const auto lo = key_of(a.cwiseMin(b).cwiseMin(c));
        const auto hi = key_of(a.cwiseMax(b).cwiseMax(c));
        for (long long x = lo[0]; x <= hi[0]; ++x)
            for (long long y = lo[1]; y <= hi[1]; ++y)
                for (long long z = lo[2]; z <= hi[2]; ++z) buckets[{x, y, z}].push_back(t);
    }
    std::vector<std::size_t> stamp(tris.size(), std::numeric_limits<std::size_t>::max());
    std::size_t hits = 0;
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const Vec3& p = pos[edges[e][0]];
        const Vec3& q = pos[edges[e][1]];
        const auto lo = key_of(p.cwiseMin(q));
        const auto hi = key_of(p.cwiseMax(q));
        for (long long x = lo[0]; x <= hi[0]; ++x)
            for (long long y = lo[1]; y <= hi[1]; ++y)
                for (long long z = lo[2]; z <= hi[2]; ++z) {
                    const auto it = buckets.find({x, y, z});
                    if (it == buckets.end()) continue;
                    for (std::size_t t : it->second) {
                        if (stamp[t] == e) continue;
                        stamp[t] = e;
                        const auto& v = tris[t].v;
                        const bool shared = std::find(v.begin(), v.end(), edges[e][0]) != v.end() ||
                                            std::find(v.begin(), v.end(), edges[e][1]) != v.end();
                        if (!shared && segment_hits_triangle(p, q, pos[v[0]], pos[v[1]], pos[v[2]])) ++hits;
                    }
                }
    }
    return hits;
}

}  // namespace detail

/// Normal-tube embeddedness screen for x + u N.
///
/// The tube radius is the smaller of 1 / max|k_i| and half the extrinsic gap
/// between intrinsically far pairs, i.e. pairs with graph distance at least
/// twice their chord, sampled from a lattice of `sources_per_axis`^2 source
/// nodes. The varied mesh is additionally scanned for edge/triangle crossings.
inline EmbeddednessDetails embeddedness_details(const SurfaceMesh& mesh, const ScalarField& u,
                                                int sources_per_axis = 8) {
    require_same_grid(mesh.grid, u.grid(), "embeddedness_screen");
    const auto& g = mesh.grid;
    EmbeddednessDetails out;
    out.sup_u = u.sup_norm();

    const auto fs = compute_forms_and_shape(mesh);
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (g.is_boundary(k)) continue;
        const double h = fs.shape.H[k], kk = fs.shape.K[k];
        const double kmax = std::abs(h) / 2.0 + std::sqrt(std::max(0.0, h * h / 4.0 - kk));
        out.max_curvature = std::max(out.max_curvature, kmax);
    }

    for (int a = 0; a < sources_per_axis; ++a)
        for (int b = 0; b < sources_per_axis; ++b) {
            const int i = static_cast<int>(std::lround((a + 0.5) * (g.n_s - 1) / sources_per_axis));
            const int j = static_cast<int>(std::lround((b + 0.5) * (g.n_t - 1) / sources_per_axis));
            const std::size_t src = g.index(i, j);
            const auto dist = graph_distances(mesh, src);
            for (std::size_t k = 0; k < g.size(); ++k) {
                const double chord = (mesh.position[k] - mesh.position[src]).norm();
                if (chord > 0.0 && dist[k] >= 2.0 * chord) out.sheet_gap = std::min(out.sheet_gap, chord);
            }
        }

    const double curvature_radius =
        out.max_curvature > 0.0 ? 1.0 / out.max_curvature : std::numeric_limits<double>::infinity();
    out.tube_radius = std::min(out.sheet_gap / 2.0, curvature_radius);

    std::vector<Vec3> varied(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) varied[k] = mesh.position[k] + u[k] * mesh.normal[k];
    out.crossings = detail::count_self_intersections(g, varied);
    out.embedded = out.sup_u < out.tube_radius && out.crossings == 0;
    return out;
}

inline bool embeddedness_screen(const SurfaceMesh& mesh, const ScalarField& u) {
    return embeddedness_details(mesh, u).embedded;
}

// ---------------------------------------------------------------------------
// Successive approximations

/// Residual sup |H[x + u N] - H_target| over interior nodes.
inline double cmc_residual(const SurfaceMesh& mesh, const ScalarField& u, double H_target) {
    const auto h = exact_normal_graph_H(mesh, u);
    double r = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k)
        if (!mesh.grid.is_boundary(k)) r = std::max(r, std::abs(h[k] - H_target));
    return r;
}

/// Optional per-iteration observer (n, u^n), e.g. for CSV dumps.
using IterateObserver = std::function<void(int, const ScalarField&)>;

/// L u^1 = H, L u^n = H + Q(u^{n-1}), u = 0 on the boundary ring.
inline std::pair<ScalarField, SolveReport> successive_approximation(const SurfaceMesh& mesh, const SolverConfig& config,
                                                                   const IterateObserver& observe = {}) {
    config.validate();
    require_same_grid(mesh.grid, config.grid, "successive_approximation");
    const auto ctx = OperatorContext::from_mesh(mesh);
    const JacobiSolver solver(ctx);

    SolveReport report;
    report.H_target = config.H_target;
    const double lambda = check_spectrum(solver);
    report.lambda_min_abs = std::abs(lambda);
    if (report.lambda_min_abs < config.spectral_floor)
        throw SpectralDegeneracy("Jacobi operator has an eigenvalue " + std::to_string(lambda) +
                                 " below the spectral floor; patch rejected");
    report.B_estimate = estimate_B(ctx, solver, config.seed, config.probes);
    report.linearization_constant = sphere_linearization_constant();

    const auto& g = mesh.grid;
    ScalarField u(g);
    double prev_step = 0.0;
    int above_one = 0;
    for (int n = 1; n <= config.max_iter; ++n) {
        ScalarField rhs = n == 1 ? ScalarField(g) : remainder_Q(ctx, mesh, u);
        for (std::size_t k = 0; k < rhs.size(); ++k)
            if (!g.is_boundary(k)) rhs[k] += config.H_target;
        ScalarField next = solver.solve(rhs);

        IterationRecord rec;
        rec.n = n;
        rec.step = (next - u).sup_norm();
        const auto c2 = DiscreteC2Norm::of(ctx, next);
        rec.sup_u = c2.sup_u;
        rec.sup_grad = c2.sup_grad;
        rec.c2_norm = c2.value();
        if (n >= 2 && prev_step > 0.0) rec.contraction = rec.step / prev_step;
        report.iterations.push_back(rec);
        u = std::move(next);
        if (observe) observe(n, u);

        above_one = (n >= 2 && rec.contraction >= 1.0) ? above_one + 1 : 0;
        if (above_one >= 2) {
            report.message = "contraction failed: eps_n >= 1 at two consecutive iterations";
            throw ContractionFailure(report.message + " (H_target too large for this patch)", report);
        }
        prev_step = rec.step;
        if (rec.step <= config.step_tol) break;
    }

    report.final_residual = cmc_residual(mesh, u, config.H_target);
    const bool stepped = !report.iterations.empty() && report.iterations.back().step <= config.step_tol;
    report.converged = stepped && report.final_residual <= config.residual_tol;
    if (!stepped)
        report.message = "max_iter reached before the step tolerance";
    else if (!report.converged)
        report.message = "step tolerance met but residual " + std::to_string(report.final_residual) +
                         " exceeds residual_tol";
    else
        report.message = "converged";
    report.embedded = embeddedness_screen(mesh, u);
    return {std::move(u), std::move(report)};
}

}  // namespace cmc
