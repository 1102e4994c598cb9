#pragma once

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"

#include <cmath>
#include <vector>

namespace tipvol {

struct LinearFit {
    double intercept = 0.0;
    Vector beta;        // one coefficient per regressor column (zero for dropped columns)
    bool ridge = false; // collinear design: a small ridge penalty was needed
    std::vector<Index> dropped; // regressors constant over the sample

    double predict(const Eigen::Ref<const Vector>& x) const { return intercept + x.dot(beta); }
};

/// OLS of y on (1, X) solved in centred form.
///
/// Regressors that are constant over the sample carry no information beyond
/// the intercept and get a zero coefficient. If the remaining centred Gram
/// matrix is not positive definite a ridge penalty ridge_rel * trace / p is
/// added; the penalty is proportional to the data scale, so fits stay
/// scale-equivariant either way.
inline LinearFit ols_with_intercept(const DenseMatrix& x, const Vector& y, double ridge_rel = 1e-8) {
    require(x.rows() == y.size(), ErrorKind::numerical, "ols_with_intercept: row counts differ");
    require(x.rows() >= 1, ErrorKind::numerical, "ols_with_intercept: no observations");
    require(x.allFinite() && y.allFinite(), ErrorKind::data, "ols_with_intercept: non-finite data");

    const Index p = x.cols();
    const Vector xmean = x.colwise().mean().transpose();
    const double ymean = y.mean();

    LinearFit fit;
    fit.beta = Vector::Zero(p);
    std::vector<Index> keep;
    for (Index j = 0; j < p; ++j) {
        const double spread = (x.col(j).array() - xmean(j)).abs().maxCoeff();
        const double size = x.col(j).cwiseAbs().maxCoeff();
        if (spread > 1e-12 * size && spread > 0.0)
            keep.push_back(j);
        else
            fit.dropped.push_back(j);
    }

    if (!keep.empty()) {
        const auto q = static_cast<Index>(keep.size());
        Eigen::MatrixXd xc(x.rows(), q);
        for (Index j = 0; j < q; ++j) xc.col(j) = x.col(keep[static_cast<std::size_t>(j)]).array() - xmean(keep[static_cast<std::size_t>(j)]);
        const Vector yc = y.array() - ymean;
        Eigen::MatrixXd g = xc.transpose() * xc;
        const Vector rhs = xc.transpose() * yc;
        auto l = detail::cholesky(g);
        if (!l) {
            fit.ridge = true;
            g.diagonal().array() += ridge_rel * g.trace() / static_cast<double>(q);
            l = detail::cholesky(g, 0.0);
            require(l.has_value(), ErrorKind::numerical, "ols_with_intercept: ridge system not positive definite");
        }
        Vector b = rhs;
        l->triangularView<Eigen::Lower>().solveInPlace(b);
        l->transpose().triangularView<Eigen::Upper>().solveInPlace(b);
        for (Index j = 0; j < q; ++j) fit.beta(keep[static_cast<std::size_t>(j)]) = b(j);
    }
    fit.intercept = ymean - xmean.dot(fit.beta);
    return fit;
}

} // namespace tipvol
