#pragma once

// Competitor one-day-ahead forecasters working on the same day x bin
// spot-variance matrix as TIP-PCA.

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/regression.hpp"
#include "tipvol/spot_vol.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace tipvol {

namespace method {
inline constexpr std::string_view tip_pca = "tip_pca";
inline constexpr std::string_view tip_pca_s = "tip_pca_s";
inline constexpr std::string_view ave = "ave";
inline constexpr std::string_view ar1 = "ar1";
inline constexpr std::string_view har = "har";
inline constexpr std::string_view har_d = "har_d";
inline constexpr std::string_view pc = "pc";
// Reserved for externally produced forecasts merged into reports.
inline constexpr std::string_view sarima = "sarima";
inline constexpr std::string_view xgboost = "xgboost";
} // namespace method

inline const std::vector<std::string>& all_methods() {
    static const std::vector<std::string> ids{std::string(method::tip_pca), std::string(method::tip_pca_s),
                                              std::string(method::ave),     std::string(method::ar1),
                                              std::string(method::har),     std::string(method::har_d),
                                              std::string(method::pc)};
    return ids;
}

struct ForecastVector {
    std::string method;
    Vector values;
    bool floored = false;
    std::vector<std::string> notes; // fallbacks taken while fitting
};

inline ForecastVector finish(std::string_view id, Vector values, double floor_eps, std::vector<std::string> notes = {}) {
    ForecastVector f;
    f.method = std::string(id);
    f.floored = (values.array() < floor_eps).any();
    f.values = values.cwiseMax(floor_eps);
    f.notes = std::move(notes);
    return f;
}

/// Column means.
inline ForecastVector ave_forecast(const DenseMatrix& vol, double floor_eps = 1e-12) {
    require(vol.rows() >= 1, ErrorKind::data, "ave_forecast: empty matrix");
    return finish(method::ave, vol.colwise().mean().transpose(), floor_eps);
}

/// OLS of c_i on (1, c_{i-1}) for one column.
inline LinearFit ar1_fit_column(const Vector& col) {
    const Index d = col.size();
    return ols_with_intercept(DenseMatrix(col.head(d - 1)), col.tail(d - 1));
}

/// Per-column AR(1); a column whose lag has no variation falls back to its mean.
inline ForecastVector ar1_forecast(const DenseMatrix& vol, double floor_eps = 1e-12) {
    require(vol.rows() >= 3, ErrorKind::data, "ar1_forecast: need at least 3 days");
    const Index d = vol.rows();
    Vector out(vol.cols());
    std::vector<std::string> notes;
    for (Index j = 0; j < vol.cols(); ++j) {
        const Vector col = vol.col(j);
        const LinearFit f = ar1_fit_column(col);
        if (!f.dropped.empty()) {
            out(j) = col.mean();
            notes.push_back("bin " + std::to_string(j + 1) + ": constant lag, column-mean fallback");
        } else {
            out(j) = f.intercept + f.beta(0) * col(d - 1);
        }
    }
    return finish(method::ar1, out, floor_eps, std::move(notes));
}

/// HAR regressors (x_{i-1}, mean x_{i-5..i-1}, mean x_{i-22..i-1}) of position i.
inline Eigen::RowVector3d har_regressors(const Vector& series, Index i) {
    require(i >= 22 && i <= series.size(), ErrorKind::data, "har_regressors: position lacks 22 lags");
    return {series(i - 1), series.segment(i - 5, 5).mean(), series.segment(i - 22, 22).mean()};
}

/// HAR design for targets i = 22..len-1, one row per target.
inline DenseMatrix har_design(const Vector& series) {
    const Index len = series.size();
    require(len > 22, ErrorKind::data, "har_design: need more than 22 observations");
    DenseMatrix x(len - 22, 3);
    for (Index i = 22; i < len; ++i) x.row(i - 22) = har_regressors(series, i);
    return x;
}

struct HarOptions {
    bool daily_only = false; // weekly and monthly coefficients constrained to zero
};

inline LinearFit har_fit_column(const Vector& col, const HarOptions& opts = {}) {
    if (opts.daily_only) return ar1_fit_column(col);
    return ols_with_intercept(har_design(col), col.tail(col.size() - 22));
}

/// Per-column HAR(1,5,22) on the column's own history.
inline ForecastVector har_forecast(const DenseMatrix& vol, const HarOptions& opts = {}, double floor_eps = 1e-12) {
    require(vol.rows() >= 30, ErrorKind::data, "har_forecast: need at least 30 days, got " + std::to_string(vol.rows()));
    const Index d = vol.rows();
    Vector out(vol.cols());
    std::vector<std::string> notes;
    for (Index j = 0; j < vol.cols(); ++j) {
        const Vector col = vol.col(j);
        const LinearFit f = har_fit_column(col, opts);
        if (opts.daily_only) {
            out(j) = f.dropped.empty() ? f.intercept + f.beta(0) * col(d - 1) : col.mean();
        } else {
            out(j) = f.predict(har_regressors(col, d).transpose());
        }
        if (f.ridge) notes.push_back("bin " + std::to_string(j + 1) + ": collinear regressors, ridge fallback");
    }
    return finish(method::har, out, floor_eps, std::move(notes));
}

/// Per-column HAR with daily realized-variance lags, a diurnal factor
/// (column mean over grand mean) and the column's own previous value.
///
/// Within one column the diurnal factor is constant, so it is absorbed by the
/// intercept; it only differentiates columns through the shared design.
inline ForecastVector har_d_forecast(const DenseMatrix& vol, const RvSeries& rv, double floor_eps = 1e-12) {
    const Index d = vol.rows();
    require(d >= 30, ErrorKind::data, "har_d_forecast: need at least 30 days, got " + std::to_string(d));
    require(rv.size() == d && rv.next_available, ErrorKind::data, "har_d_forecast: covariates do not match the matrix");

    const Vector colmean = vol.colwise().mean().transpose();
    const double grand = colmean.mean();
    require(grand > 0.0, ErrorKind::numerical, "har_d_forecast: nonpositive grand mean");
    const DenseMatrix rvx = rv.covariates(RvSeries::history, d);
    const Index rows = d - RvSeries::history;

    Vector out(vol.cols());
    std::vector<std::string> notes;
    DenseMatrix x(rows, 5);
    x.leftCols(3) = rvx;
    for (Index j = 0; j < vol.cols(); ++j) {
        const double diurnal = colmean(j) / grand;
        x.col(3).setConstant(diurnal);
        x.col(4) = vol.col(j).segment(RvSeries::history - 1, rows);
        const LinearFit f = ols_with_intercept(x, vol.col(j).tail(rows));
        Vector xn(5);
        xn << rv.next(0), rv.next(1), rv.next(2), diurnal, vol(d - 1, j);
        out(j) = f.predict(xn);
        if (f.ridge) notes.push_back("bin " + std::to_string(j + 1) + ": collinear regressors, ridge fallback");
    }
    return finish(method::har_d, out, floor_eps, std::move(notes));
}

/// Last row of the best rank-r approximation.
inline ForecastVector pc_forecast(const DenseMatrix& vol, Index r, double floor_eps = 1e-12) {
    require(r >= 1 && r <= std::min(vol.rows(), vol.cols()), ErrorKind::config,
            "pc_forecast: rank " + std::to_string(r) + " out of range");
    const SvdResult svd = truncated_svd(vol, r);
    const Vector last = (svd.left.row(vol.rows() - 1) * svd.values.asDiagonal() * svd.right.transpose()).transpose();
    return finish(method::pc, last, floor_eps);
}

} // namespace tipvol
