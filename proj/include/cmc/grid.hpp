#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cmc/errors.hpp"

namespace cmc {

/// Structured (s, t) parameter grid. Node (i, j) sits at
/// s = s_min + i * h_s, t = t_min + j * h_t and is stored at index i * n_t + j.
struct ParamGrid {
    double s_min = 0.0;
    double s_max = 1.0;
    double t_min = 0.0;
    double t_max = 1.0;
    int n_s = 5;
    int n_t = 5;

    static ParamGrid make(double s_min, double s_max, double t_min, double t_max, int n_s,
                          int n_t) {
        ParamGrid g{s_min, s_max, t_min, t_max, n_s, n_t};
        g.validate();
        return g;
    }

    void validate() const {
        if (n_s < 5 || n_t < 5)
            throw InvalidArgument("ParamGrid: need at least 5 nodes per axis, got " +
                                  std::to_string(n_s) + "x" + std::to_string(n_t));
        if (!(s_max > s_min) || !(t_max > t_min))
            throw InvalidArgument("ParamGrid: empty parameter domain");
        if (!std::isfinite(s_min) || !std::isfinite(s_max) || !std::isfinite(t_min) ||
            !std::isfinite(t_max))
            throw InvalidArgument("ParamGrid: non-finite bounds");
    }

    double h_s() const { return (s_max - s_min) / (n_s - 1); }
    double h_t() const { return (t_max - t_min) / (n_t - 1); }
    double s(int i) const { return i == n_s - 1 ? s_max : s_min + i * h_s(); }
    double t(int j) const { return j == n_t - 1 ? t_max : t_min + j * h_t(); }

    std::size_t size() const { return static_cast<std::size_t>(n_s) * n_t; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * n_t + j; }
    int i_of(std::size_t k) const { return static_cast<int>(k / n_t); }
    int j_of(std::size_t k) const { return static_cast<int>(k % n_t); }

    bool is_boundary(int i, int j) const {
        return i == 0 || j == 0 || i == n_s - 1 || j == n_t - 1;
    }
    bool is_boundary(std::size_t k) const { return is_boundary(i_of(k), j_of(k)); }

    /// Node nearest to the parameter point (s, t), clamped to the grid.
    std::size_t nearest(double s_val, double t_val) const {
        const int i = std::clamp(static_cast<int>(std::lround((s_val - s_min) / h_s())), 0, n_s - 1);
        const int j = std::clamp(static_cast<int>(std::lround((t_val - t_min) / h_t())), 0, n_t - 1);
        return index(i, j);
    }

    bool operator==(const ParamGrid& o) const {
        return s_min == o.s_min && s_max == o.s_max && t_min == o.t_min && t_max == o.t_max &&
               n_s == o.n_s && n_t == o.n_t;
    }
    bool operator!=(const ParamGrid& o) const { return !(*this == o); }
};

inline void require_same_grid(const ParamGrid& a, const ParamGrid& b, const char* where) {
    if (a != b) throw GridMismatch(std::string(where) + ": fields live on different grids");
}

/// Real-valued function on the nodes of a ParamGrid.
class ScalarField {
public:
    ScalarField() = default;
    explicit ScalarField(const ParamGrid& grid, double fill = 0.0)
        : grid_(grid), value_(grid.size(), fill) {}
    ScalarField(const ParamGrid& grid, std::vector<double> values)
        : grid_(grid), value_(std::move(values)) {
        if (value_.size() != grid_.size())
            throw InvalidArgument("ScalarField: value count does not match grid");
        for (double v : value_)
            if (!std::isfinite(v)) throw InvalidArgument("ScalarField: non-finite value");
    }

    static ScalarField constant(const ParamGrid& grid, double c) { return ScalarField(grid, c); }

    /// Samples f(s, t) at every node.
    static ScalarField sample(const ParamGrid& grid, const std::function<double(double, double)>& f) {
        ScalarField out(grid);
        for (int i = 0; i < grid.n_s; ++i)
            for (int j = 0; j < grid.n_t; ++j) out.value_[grid.index(i, j)] = f(grid.s(i), grid.t(j));
        return out;
    }

    const ParamGrid& grid() const { return grid_; }
    std::size_t size() const { return value_.size(); }
    const std::vector<double>& values() const { return value_; }
    std::vector<double>& values() { return value_; }

    double operator[](std::size_t k) const { return value_[k]; }
    double& operator[](std::size_t k) { return value_[k]; }
    double at(int i, int j) const { return value_[grid_.index(i, j)]; }
    double& at(int i, int j) { return value_[grid_.index(i, j)]; }

    double sup_norm() const {
        double m = 0.0;
        for (double v : value_) m = std::max(m, std::abs(v));
        return m;
    }
    double sup_norm_interior() const {
        double m = 0.0;
        for (std::size_t k = 0; k < value_.size(); ++k)
            if (!grid_.is_boundary(k)) m = std::max(m, std::abs(value_[k]));
        return m;
    }
    bool all_finite() const {
        return std::all_of(value_.begin(), value_.end(), [](double v) { return std::isfinite(v); });
    }

    ScalarField& operator+=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "ScalarField::+=");
        for (std::size_t k = 0; k < value_.size(); ++k) value_[k] += o.value_[k];
        return *this;
    }
    ScalarField& operator-=(const ScalarField& o) {
        require_same_grid(grid_, o.grid_, "ScalarField::-=");
        for (std::size_t k = 0; k < value_.size(); ++k) value_[k] -= o.value_[k];
        return *this;
    }
    ScalarField& operator*=(double c) {
        for (double& v : value_) v *= c;
        return *this;
    }

    friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
    friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
    friend ScalarField operator*(double c, ScalarField a) { return a *= c; }
    friend ScalarField operator*(ScalarField a, double c) { return a *= c; }

private:
    ParamGrid grid_;
    std::vector<double> value_;
};

/// Boolean per-node mask on a grid.
using NodeMask = std::vector<bool>;

}  // namespace cmc
