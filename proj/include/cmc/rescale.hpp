#pragma once

#include <cmath>
#include <string>

#include "cmc/geometry.hpp"

namespace cmc {

struct RescaleParams {
    double R = 1.0;

    void validate() const {
        if (!std::isfinite(R) || !(R > 0.0))
            throw InvalidArgument("rescale factor must be finite and positive, got " + std::to_string(R));
    }
};

/// Positions scaled by R about the origin. Normals and the parameter grid are
/// unchanged: the immersion X' = R X keeps its domain, so curvature measured on
/// the same grid obeys H' = H / R and |A'|^2 = |A|^2 / R^2.
inline SurfaceMesh rescale_mesh(const SurfaceMesh& mesh, double R) {
    RescaleParams{R}.validate();
    SurfaceMesh out = mesh;
    for (auto& p : out.position) p *= R;
    return out;
}

/// The planar grid whose nodes are R times those of g.
inline ParamGrid scaled_grid(const ParamGrid& g, double R) {
    RescaleParams{R}.validate();
    return {R * g.s_min, R * g.s_max, R * g.t_min, R * g.t_max, g.n_s, g.n_t};
}

/// w(x) = R u(x / R) on the scaled grid. Node k of the result sits at R times
/// node k of the source, so the map is an exact relabeling.
inline ScalarField rescale_field(const ScalarField& u, double R) {
    ScalarField w(scaled_grid(u.grid(), R), u.values());
    w *= R;
    return w;
}

/// As above, but onto a caller-supplied grid that must match the scaled source.
inline ScalarField rescale_field(const ScalarField& u, double R, const ParamGrid& target) {
    const ParamGrid expect = scaled_grid(u.grid(), R);
    const double tol = 1e-12 * (std::abs(expect.s_max - expect.s_min) + std::abs(expect.t_max - expect.t_min));
    const bool same = target.n_s == expect.n_s && target.n_t == expect.n_t &&
                      std::abs(target.s_min - expect.s_min) <= tol && std::abs(target.s_max - expect.s_max) <= tol &&
                      std::abs(target.t_min - expect.t_min) <= tol && std::abs(target.t_max - expect.t_max) <= tol;
    if (!same) throw GridMismatch("rescale_field: target grid is not the source grid scaled by R");
    ScalarField w(target, u.values());
    w *= R;
    return w;
}

}  // namespace cmc
