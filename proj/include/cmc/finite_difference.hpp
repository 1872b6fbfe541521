#pragma once

#include <vector>

#include "cmc/grid.hpp"

namespace cmc::fd {

// Second-order stencils along one axis. Interior nodes use central differences;
// the boundary ring uses one-sided stencils of the same order. `get(m)` returns
// the sample at position m along the axis (0 <= m < n).

template <class T, class Get>
T first(Get&& get, int m, int n, double h) {
    if (m == 0) return ((-3.0) * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h);
    if (m == n - 1) return (3.0 * get(n - 1) - 4.0 * get(n - 2) + get(n - 3)) / (2.0 * h);
    return (get(m + 1) - get(m - 1)) / (2.0 * h);
}

template <class T, class Get>
T second(Get&& get, int m, int n, double h) {
    const double h2 = h * h;
    if (m == 0) return (2.0 * get(0) - 5.0 * get(1) + 4.0 * get(2) - get(3)) / h2;
    if (m == n - 1)
        return (2.0 * get(n - 1) - 5.0 * get(n - 2) + 4.0 * get(n - 3) - get(n - 4)) / h2;
    return (get(m + 1) - 2.0 * get(m) + get(m - 1)) / h2;
}

template <class T>
std::vector<T> d_s(const ParamGrid& g, const std::vector<T>& f) {
    std::vector<T> out(f.size());
    const double h = g.h_s();
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j)
            out[g.index(i, j)] = first<T>([&](int m) -> const T& { return f[g.index(m, j)]; }, i, g.n_s, h);
    return out;
}

template <class T>
std::vector<T> d_t(const ParamGrid& g, const std::vector<T>& f) {
    std::vector<T> out(f.size());
    const double h = g.h_t();
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j)
            out[g.index(i, j)] = first<T>([&](int m) -> const T& { return f[g.index(i, m)]; }, j, g.n_t, h);
    return out;
}

template <class T>
std::vector<T> d_ss(const ParamGrid& g, const std::vector<T>& f) {
    std::vector<T> out(f.size());
    const double h = g.h_s();
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j)
            out[g.index(i, j)] = second<T>([&](int m) -> const T& { return f[g.index(m, j)]; }, i, g.n_s, h);
    return out;
}

template <class T>
std::vector<T> d_tt(const ParamGrid& g, const std::vector<T>& f) {
    std::vector<T> out(f.size());
    const double h = g.h_t();
    for (int i = 0; i < g.n_s; ++i)
        for (int j = 0; j < g.n_t; ++j)
            out[g.index(i, j)] = second<T>([&](int m) -> const T& { return f[g.index(i, m)]; }, j, g.n_t, h);
    return out;
}

/// Partial derivatives of a nodal field packaged together.
template <class T>
struct Jet {
    std::vector<T> s, t, ss, st, tt;
};

template <class T>
Jet<T> jet(const ParamGrid& g, const std::vector<T>& f) {
    Jet<T> d;
    d.s = d_s(g, f);
    d.t = d_t(g, f);
    d.ss = d_ss(g, f);
    d.tt = d_tt(g, f);
    d.st = d_s(g, d.t);  // reduces to the four-corner stencil in the interior
    return d;
}

}  // namespace cmc::fd
