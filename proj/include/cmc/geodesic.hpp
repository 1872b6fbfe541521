#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <vector>

#include "cmc/geometry.hpp"

namespace cmc {

/// Intrinsic distances from one node, measured as shortest paths on the
/// 8-neighbour grid graph with Euclidean edge lengths. Unreached nodes hold +inf.
struct GeodesicField {
    std::size_t source = 0;
    std::vector<double> dist;
    /// Upper bound on graph distance / true distance for this mesh.
    double stretch = 1.0;
};

namespace detail {

constexpr int kNeighbours[8][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}};

}  // namespace detail

/// Worst-case overestimation of the 8-neighbour graph metric. At a node the
/// eight edge directions split the tangent plane into sectors; a straight
/// segment in a sector of opening alpha is approximated by its two bounding
/// edges with stretch at most 1 / cos(alpha / 2). On a square grid this is
/// 1 / cos(pi/8) = 1.0824.
inline double grid_metric_stretch(const SurfaceMesh& mesh) {
    const auto& g = mesh.grid;
    const auto X = fd::jet(g, mesh.position);
    double worst = 1.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec3 xs = X.s[k] * g.h_s();
        const Vec3 xt = X.t[k] * g.h_t();
        double max_gap = 0.0;
        std::array<double, 9> ang{};
        // angles measured in the tangent plane with xs along the x axis
        const Vec3 e1 = xs.normalized();
        const Vec3 e2 = (xt - xt.dot(e1) * e1).normalized();
        for (int d = 0; d < 8; ++d) {
            const Vec3 v = detail::kNeighbours[d][0] * xs + detail::kNeighbours[d][1] * xt;
            double a = std::atan2(v.dot(e2), v.dot(e1));
            if (a < 0.0) a += 2.0 * std::numbers::pi;
            ang[d] = a;
        }
        std::sort(ang.begin(), ang.begin() + 8);
        ang[8] = ang[0] + 2.0 * std::numbers::pi;
        for (int d = 0; d < 8; ++d) max_gap = std::max(max_gap, ang[d + 1] - ang[d]);
        if (max_gap < std::numbers::pi) worst = std::max(worst, 1.0 / std::cos(0.5 * max_gap));
    }
    return worst;
}

/// Dijkstra from `source`; nodes farther than `cutoff` are left at +inf.
inline std::vector<double> graph_distances(const SurfaceMesh& mesh, std::size_t source,
                                           double cutoff = std::numeric_limits<double>::infinity()) {
    const auto& g = mesh.grid;
    if (source >= g.size()) throw InvalidArgument("geodesic source node out of range");
    std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> heap;
    dist[source] = 0.0;
    heap.emplace(0.0, source);
    while (!heap.empty()) {
        const auto [d, k] = heap.top();
        heap.pop();
        if (d > dist[k]) continue;
        const int i = g.i_of(k), j = g.j_of(k);
        for (const auto& nb : detail::kNeighbours) {
            const int ii = i + nb[0], jj = j + nb[1];
            if (ii < 0 || jj < 0 || ii >= g.n_s || jj >= g.n_t) continue;
            const std::size_t l = g.index(ii, jj);
            const double nd = d + (mesh.position[l] - mesh.position[k]).norm();
            if (nd < dist[l] && nd <= cutoff) {
                dist[l] = nd;
                heap.emplace(nd, l);
            }
        }
    }
    return dist;
}

inline GeodesicField geodesic_distance(const SurfaceMesh& mesh, std::size_t source) {
    return {source, graph_distances(mesh, source), grid_metric_stretch(mesh)};
}

}  // namespace cmc
