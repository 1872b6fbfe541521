#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "cmc/errors.hpp"
#include "cmc/grid.hpp"
#include "cmc/operators.hpp"

namespace cmc {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Interior grid nodes (everything except the boundary ring).
inline NodeMask interior_mask(const ParamGrid& g) {
    NodeMask m(g.size(), false);
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = !g.is_boundary(k);
    return m;
}

/// Dirichlet-restricted, area-weighted discretization of the metric operators
/// on the unknowns selected by a node mask. Nodes outside the mask (and the
/// boundary ring) are held at zero.
///
///   stiffness:  S_kl = h_s h_t * stencil_k(l - k), so that (S u)_k = w_k (Delta u)_k
///   mass:       w_k = sqrt(det_k) h_s h_t
///   potential:  A2_k at each unknown
/// S is symmetric and negative semidefinite up to discretization error.
struct DirichletSystem {
    ParamGrid grid;
    std::vector<std::ptrdiff_t> unknown_of_node;  // -1 for fixed nodes
    std::vector<std::size_t> node_of_unknown;
    SparseMatrix stiffness;
    Eigen::VectorXd mass;
    Eigen::VectorXd potential;

    Eigen::Index size() const { return static_cast<Eigen::Index>(node_of_unknown.size()); }

    Eigen::VectorXd restrict(const ScalarField& f) const {
        require_same_grid(grid, f.grid(), "DirichletSystem::restrict");
        Eigen::VectorXd v(size());
        for (Eigen::Index r = 0; r < size(); ++r) v[r] = f[node_of_unknown[r]];
        return v;
    }
    ScalarField extend(const Eigen::VectorXd& v) const {
        ScalarField f(grid);
        for (Eigen::Index r = 0; r < size(); ++r) f[node_of_unknown[r]] = v[r];
        return f;
    }

    /// Weighted Jacobi matrix: M u = W (Delta u + A2 u).
    SparseMatrix jacobi_matrix() const { return add_diagonal(stiffness, mass.cwiseProduct(potential)); }

    /// Weighted second-variation form of -Delta - c A2.
    SparseMatrix stability_matrix(double c) const {
        SparseMatrix m = -stiffness;
        return add_diagonal(m, -c * mass.cwiseProduct(potential));
    }

    static SparseMatrix add_diagonal(const SparseMatrix& a, const Eigen::VectorXd& d) {
        SparseMatrix diag(a.rows(), a.cols());
        std::vector<Eigen::Triplet<double>> t;
        t.reserve(static_cast<std::size_t>(d.size()));
        for (Eigen::Index r = 0; r < d.size(); ++r) t.emplace_back(r, r, d[r]);
        diag.setFromTriplets(t.begin(), t.end());
        return SparseMatrix(a + diag);
    }
};

inline DirichletSystem assemble_dirichlet(const OperatorContext& ctx, const NodeMask& mask) {
    const auto& g = ctx.grid;
    if (mask.size() != g.size()) throw GridMismatch("assemble_dirichlet: mask size does not match grid");
    DirichletSystem sys;
    sys.grid = g;
    sys.unknown_of_node.assign(g.size(), -1);
    for (std::size_t k = 0; k < g.size(); ++k)
        if (mask[k] && !g.is_boundary(k)) {
            sys.unknown_of_node[k] = static_cast<std::ptrdiff_t>(sys.node_of_unknown.size());
            sys.node_of_unknown.push_back(k);
        }
    const Eigen::Index n = sys.size();
    if (n == 0) throw InvalidArgument("assemble_dirichlet: no interior unknowns in the domain");

    const double cell = g.h_s() * g.h_t();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 9);
    sys.mass.resize(n);
    sys.potential.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const std::size_t k = sys.node_of_unknown[r];
        const int i = g.i_of(k), j = g.j_of(k);
        const auto st = laplace_stencil(ctx, i, j);
        double diag = 0.0;
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
                if (!di && !dj) continue;
                const double c = cell * st.at(di, dj);
                diag -= c;
                const auto col = sys.unknown_of_node[g.index(i + di, j + dj)];
                if (col >= 0) trip.emplace_back(r, col, c);
            }
        trip.emplace_back(r, r, diag);
        sys.mass[r] = ctx.area_weight(k);
        sys.potential[r] = ctx.shape.A2[k];
    }
    sys.stiffness.resize(n, n);
    sys.stiffness.setFromTriplets(trip.begin(), trip.end());
    sys.stiffness.makeCompressed();
    return sys;
}

/// Factorization of a sparse matrix reused across right-hand sides, with
/// iterative refinement to a relative residual target.
class FactoredMatrix {
public:
    explicit FactoredMatrix(SparseMatrix a) : a_(std::move(a)) {
        a_.makeCompressed();
        lu_.analyzePattern(a_);
        lu_.factorize(a_);
        if (lu_.info() != Eigen::Success)
            throw SpectralDegeneracy("sparse factorization failed: " + lu_.lastErrorMessage());
    }

    const SparseMatrix& matrix() const { return a_; }

    /// Solves A x = b; throws SpectralDegeneracy if the relative residual
    /// ||A x - b|| / ||b|| cannot be brought below `rel_tol`.
    Eigen::VectorXd solve(const Eigen::VectorXd& b, double rel_tol = 1e-10, int max_refine = 5) const {
        const double bn = b.norm();
        if (bn == 0.0) return Eigen::VectorXd::Zero(b.size());
        Eigen::VectorXd x = lu_.solve(b);
        Eigen::VectorXd r = b - a_ * x;
        for (int it = 0; it < max_refine && r.norm() > rel_tol * bn; ++it) {
            x += lu_.solve(r);
            r = b - a_ * x;
        }
        if (!x.allFinite() || !(r.norm() <= rel_tol * bn))
            throw SpectralDegeneracy("linear solve did not reach relative residual " + std::to_string(rel_tol) +
                                     " (got " + std::to_string(r.norm() / bn) + "); system near-singular");
        return x;
    }

private:
    SparseMatrix a_;
    Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>> lu_;
};

struct EigenPair {
    double value = 0.0;
    Eigen::VectorXd vector;  // B-normalized
    int iterations = 0;
};

/// Eigenpair of the symmetric pencil A x = lambda diag(b) x nearest the shift
/// `sigma`, by block inverse iteration on (A - sigma B)^{-1} B with
/// Rayleigh-Ritz on the block. `shifted` must be a factorization of A - sigma B.
inline EigenPair nearest_eigenpair(const SparseMatrix& a, const Eigen::VectorXd& b, const FactoredMatrix& shifted,
                                   double sigma, std::uint64_t seed = 7, int block = 4, double tol = 1e-9,
                                   int max_iter = 3000) {
    const Eigen::Index n = a.rows();
    const Eigen::Index p = std::min<Eigen::Index>(block, n);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::MatrixXd x(n, p);
    for (Eigen::Index c = 0; c < p; ++c)
        for (Eigen::Index r = 0; r < n; ++r) x(r, c) = c == 0 ? 1.0 : unif(rng);

    auto b_orthonormalize = [&](Eigen::MatrixXd& m) {
        // B-Gram-Schmidt, twice for stability
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                for (Eigen::Index d = 0; d < c; ++d) {
                    const double proj = m.col(d).dot(b.cwiseProduct(m.col(c)));
                    m.col(c) -= proj * m.col(d);
                }
                const double nrm = std::sqrt(m.col(c).dot(b.cwiseProduct(m.col(c))));
                if (!(nrm > 0.0) || !std::isfinite(nrm))
                    throw SpectralDegeneracy("eigen-iteration block collapsed");
                m.col(c) /= nrm;
            }
    };
    b_orthonormalize(x);

    // residuals are measured against ||A||_inf ||v|| so a near-zero eigenvalue still converges
    double a_norm = 0.0;
    for (Eigen::Index r = 0; r < n; ++r) a_norm = std::max(a_norm, a.row(r).cwiseAbs().sum());
    if (!(a_norm > 0.0)) a_norm = 1.0;

    EigenPair best;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::MatrixXd y(n, p);
        for (Eigen::Index c = 0; c < p; ++c) y.col(c) = shifted.solve(b.cwiseProduct(x.col(c)));
        b_orthonormalize(y);
        const Eigen::MatrixXd ay = a * y;
        const Eigen::MatrixXd ka = y.transpose() * ay;
        const Eigen::MatrixXd kb = y.transpose() * b.asDiagonal() * y;
        Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(0.5 * (ka + ka.transpose()),
                                                                       0.5 * (kb + kb.transpose()));
        if (ritz.info() != Eigen::Success) throw SpectralDegeneracy("Rayleigh-Ritz step failed");
        x = y * ritz.eigenvectors();
        Eigen::Index pick = 0;
        for (Eigen::Index c = 1; c < p; ++c)
            if (std::abs(ritz.eigenvalues()[c] - sigma) < std::abs(ritz.eigenvalues()[pick] - sigma)) pick = c;
        const double theta = ritz.eigenvalues()[pick];
        const Eigen::VectorXd v = x.col(pick);
        const Eigen::VectorXd av = a * v;
        const Eigen::VectorXd bv = b.cwiseProduct(v);
        const double res = (av - theta * bv).norm() / (a_norm * v.norm());
        best = {theta, v, it};
        if (res <= tol) return best;
    }
    throw SpectralDegeneracy("eigen-iteration did not converge within " + std::to_string(max_iter) + " iterations");
}

}  // namespace cmc
