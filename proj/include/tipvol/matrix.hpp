#pragma once

// Dense linear-algebra kernels shared by every estimator in the library.
//
// Storage is Eigen (row-major dynamic matrices); the symmetric eigensolver is
// a cyclic Jacobi iteration, and everything else (SVD, projections, least
// squares) is built on top of it or on a Cholesky factorisation.

#include "tipvol/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <vector>

namespace tipvol {

using Index = Eigen::Index;
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

struct EigenResult {
    Vector values;       // descending
    DenseMatrix vectors; // column k pairs with values[k]
};

struct SvdResult {
    Vector values; // descending, strictly positive
    DenseMatrix left;
    DenseMatrix right;
};

struct JacobiOptions {
    double tolerance = 1e-14; // off-diagonal Frobenius mass relative to ||A||_F
    int max_sweeps = 100;
};

inline bool all_finite(const DenseMatrix& a) { return a.allFinite(); }

inline void require_finite(const DenseMatrix& a, const char* what) {
    require(a.size() > 0, ErrorKind::data, std::string(what) + ": empty matrix");
    require(a.allFinite(), ErrorKind::data, std::string(what) + ": non-finite entry");
}

/// Top-k eigenpairs of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order with unit-norm, mutually
/// orthogonal eigenvectors. Throws on non-square or asymmetric input, and on
/// failure to converge within `opts.max_sweeps` sweeps.
inline EigenResult sym_eig(const DenseMatrix& a_in, Index k, const JacobiOptions& opts = {}) {
    require(a_in.rows() == a_in.cols(), ErrorKind::numerical,
            "sym_eig: matrix is " + std::to_string(a_in.rows()) + "x" +
                std::to_string(a_in.cols()) + ", not square");
    require_finite(a_in, "sym_eig");
    const Index n = a_in.rows();
    require(k >= 0 && k <= n, ErrorKind::numerical,
            "sym_eig: requested " + std::to_string(k) + " eigenpairs of a " + std::to_string(n) +
                "-dimensional matrix");

    const double scale = a_in.cwiseAbs().maxCoeff();
    const double asym = (a_in - a_in.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(scale, 1e-300) && asym > 0.0) {
        std::ostringstream os;
        os << "sym_eig: matrix not symmetric (max |A - A'| = " << asym << ", max |A| = " << scale << ")";
        fail(ErrorKind::numerical, os.str());
    }

    // Column-major working copy: rotations touch both rows and columns.
    Eigen::MatrixXd a = 0.5 * (a_in + a_in.transpose());
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);

    const double norm = a.norm();
    auto off_mass = [&] {
        double s = 0.0;
        for (Index j = 0; j < n; ++j)
            for (Index i = 0; i < n; ++i)
                if (i != j) s += a(i, j) * a(i, j);
        return std::sqrt(s);
    };

    int sweep = 0;
    while (norm > 0.0 && off_mass() >= opts.tolerance * norm) {
        if (sweep++ >= opts.max_sweeps) {
            std::ostringstream os;
            os << "sym_eig: no convergence after " << opts.max_sweeps << " Jacobi sweeps (off-diagonal mass "
               << off_mass() / norm << " of ||A||_F)";
            fail(ErrorKind::numerical, os.str());
        }
        for (Index p = 0; p < n - 1; ++p) {
            for (Index q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (Index i = 0; i < n; ++i) {
                    const double aip = a(i, p);
                    const double aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (Index j = 0; j < n; ++j) {
                    const double apj = a(p, j);
                    const double aqj = a(q, j);
                    a(p, j) = c * apj - s * aqj;
                    a(q, j) = s * apj + c * aqj;
                }
                a(p, q) = 0.0;
                a(q, p) = 0.0;
                for (Index i = 0; i < n; ++i) {
                    const double vip = v(i, p);
                    const double viq = v(i, q);
                    v(i, p) = c * vip - s * viq;
                    v(i, q) = s * vip + c * viq;
                }
            }
        }
    }

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index x, Index y) { return a(x, x) > a(y, y); });

    EigenResult out;
    out.values.resize(k);
    out.vectors.resize(n, k);
    for (Index j = 0; j < k; ++j) {
        const Index src = order[static_cast<std::size_t>(j)];
        out.values(j) = a(src, src);
        out.vectors.col(j) = v.col(src);
    }
    return out;
}

namespace detail {

// Lower Cholesky factor, or nothing when the matrix is not numerically
// positive definite.
inline std::optional<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& g, double rel_tol = 1e-12) {
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) return std::nullopt;
    Eigen::MatrixXd l = llt.matrixL();
    const Vector d = l.diagonal().cwiseAbs2();
    if (d.minCoeff() <= rel_tol * d.maxCoeff()) return std::nullopt;
    return l;
}

inline Eigen::MatrixXd checked_gram_factor(const DenseMatrix& b, const char* who) {
    require_finite(b, who);
    const Eigen::MatrixXd g = b.transpose() * b;
    auto l = cholesky(g);
    if (!l) {
        // Condition number of B'B for the error message.
        const auto ev = sym_eig(DenseMatrix(g), g.rows());
        const double hi = ev.values(0);
        const double lo = ev.values(ev.values.size() - 1);
        std::ostringstream os;
        os << who << ": basis is rank deficient (cond(B'B) = ";
        if (lo > 0.0)
            os << hi / lo;
        else
            os << "inf";
        os << ", smallest eigenvalue " << lo << ")";
        fail(ErrorKind::numerical, os.str());
    }
    return *l;
}

} // namespace detail

/// P = B (B'B)^{-1} B', the orthogonal projector onto the column space of B.
inline DenseMatrix projection_matrix(const DenseMatrix& b) {
    const Eigen::MatrixXd l = detail::checked_gram_factor(b, "projection_matrix");
    // With B'B = LL', P = Q Q' where Q = B L^{-T} has orthonormal columns.
    const Eigen::MatrixXd q = l.triangularView<Eigen::Lower>().solve(b.transpose()).transpose();
    DenseMatrix p = q * q.transpose();
    return 0.5 * (p + p.transpose());
}

/// Coefficients C minimising ||Y - B C||_F, via the normal equations.
inline DenseMatrix least_squares(const DenseMatrix& b, const DenseMatrix& y) {
    require(b.rows() == y.rows(), ErrorKind::numerical,
            "least_squares: row counts differ (" + std::to_string(b.rows()) + " vs " + std::to_string(y.rows()) + ")");
    const Eigen::MatrixXd l = detail::checked_gram_factor(b, "least_squares");
    Eigen::MatrixXd rhs = b.transpose() * y;
    l.triangularView<Eigen::Lower>().solveInPlace(rhs);
    l.transpose().triangularView<Eigen::Upper>().solveInPlace(rhs);
    return rhs;
}

/// Leading singular values of M (all of them when k covers min(rows, cols)).
/// Singular values from a Gram eigendecomposition resolve only down to about
/// sqrt(machine eps) * sigma_1; anything smaller relative to sigma_1 is noise.
inline constexpr double gram_null_tol = 1e-7;

inline Vector singular_values(const DenseMatrix& m) {
    require_finite(m, "singular_values");
    const bool tall = m.rows() >= m.cols();
    const DenseMatrix gram = tall ? DenseMatrix(m.transpose() * m) : DenseMatrix(m * m.transpose());
    const auto eig = sym_eig(gram, gram.rows());
    return eig.values.cwiseMax(0.0).cwiseSqrt();
}

/// Rank-r truncated SVD through the eigendecomposition of the smaller Gram
/// matrix. Singular values below gram_null_tol * sigma_1 are treated as zero and their
/// vectors dropped, so fewer than r triplets may be returned.
inline SvdResult truncated_svd(const DenseMatrix& m, Index r) {
    require_finite(m, "truncated_svd");
    const Index small = std::min(m.rows(), m.cols());
    require(r >= 1 && r <= small, ErrorKind::numerical,
            "truncated_svd: rank " + std::to_string(r) + " outside [1, " + std::to_string(small) + "]");

    const bool tall = m.rows() >= m.cols();
    const DenseMatrix gram = tall ? DenseMatrix(m.transpose() * m) : DenseMatrix(m * m.transpose());
    const auto eig = sym_eig(gram, small);

    const double s1 = std::sqrt(std::max(eig.values(0), 0.0));
    Index keep = 0;
    while (keep < r) {
        const double s = std::sqrt(std::max(eig.values(keep), 0.0));
        if (!(s > gram_null_tol * s1) || s == 0.0) break;
        ++keep;
    }

    SvdResult out;
    out.values.resize(keep);
    DenseMatrix known = eig.vectors.leftCols(keep);
    DenseMatrix other = tall ? DenseMatrix(m * known) : DenseMatrix(m.transpose() * known);
    for (Index j = 0; j < keep; ++j) {
        out.values(j) = std::sqrt(eig.values(j));
        Vector c = other.col(j) / out.values(j);
        // Two Gram-Schmidt passes keep the recovered side orthonormal when
        // trailing singular values are tiny.
        for (int pass = 0; pass < 2; ++pass)
            for (Index i = 0; i < j; ++i) c -= other.col(i).dot(c) * Vector(other.col(i));
        c.normalize();
        other.col(j) = c;
    }
    if (tall) {
        out.left = std::move(other);
        out.right = std::move(known);
    } else {
        out.left = std::move(known);
        out.right = std::move(other);
    }
    return out;
}

/// Moore-Penrose inverse of a symmetric positive semi-definite matrix;
/// eigenvalues below rel_tol * lambda_max are treated as zero.
inline DenseMatrix psd_pseudo_inverse(const DenseMatrix& g, double rel_tol = 1e-12) {
    const auto eig = sym_eig(g, g.rows());
    const double top = std::max(eig.values(0), 0.0);
    Vector inv = Vector::Zero(eig.values.size());
    for (Index i = 0; i < inv.size(); ++i)
        if (eig.values(i) > rel_tol * top && eig.values(i) > 0.0) inv(i) = 1.0 / eig.values(i);
    return eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
}

} // namespace tipvol
