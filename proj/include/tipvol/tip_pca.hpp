#pragma once

// Two-side projected PCA of the day x bin spot-variance matrix.
//
// Singular values come from the raw matrix; the left (interday) and right
// (intraday) singular vectors are re-estimated after projecting onto sieve
// bases of day covariates and intraday time, their relative signs are fixed by
// a Frobenius fit, and the left factor is extended to a new day through its
// sieve coefficients.

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/regression.hpp"
#include "tipvol/spot_vol.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace tipvol {

enum class SieveFamily { polynomial, table };

struct SieveSpec {
    SieveFamily family = SieveFamily::polynomial;
    Index terms = 2;          // J
    Index covariate_dim = 0;  // d; 0 takes it from the data
    bool intercept = true;
    bool standardize = true;

    Index width(Index d) const {
        const Index core = family == SieveFamily::polynomial ? d * terms : d;
        return core + (intercept ? 1 : 0);
    }
};

// In-sample centring and scaling of the covariates.
struct Scaler {
    Vector mean;
    Vector sd;

    static Scaler identity(Index d) { return {Vector::Zero(d), Vector::Ones(d)}; }

    static Scaler fit(const DenseMatrix& x) {
        Scaler s;
        const Index rows = x.rows();
        s.mean = x.colwise().mean().transpose();
        s.sd.resize(x.cols());
        for (Index j = 0; j < x.cols(); ++j) {
            const double ss = (x.col(j).array() - s.mean(j)).square().sum();
            const double sd = rows > 1 ? std::sqrt(ss / static_cast<double>(rows - 1)) : 0.0;
            s.sd(j) = sd > 0.0 ? sd : 1.0; // a constant covariate is caught by the rank check
        }
        return s;
    }

    DenseMatrix apply(const DenseMatrix& x) const {
        return ((x.rowwise() - mean.transpose()).array().rowwise() / sd.transpose().array()).matrix();
    }
};

struct Basis {
    DenseMatrix matrix;
    Scaler scaler;
};

namespace detail {

inline DenseMatrix expand(const DenseMatrix& z, const SieveSpec& spec) {
    const Index d = z.cols();
    DenseMatrix out(z.rows(), spec.width(d));
    Index col = 0;
    if (spec.intercept) out.col(col++).setOnes();
    if (spec.family == SieveFamily::table) {
        out.rightCols(d) = z;
        return out;
    }
    for (Index j = 0; j < d; ++j) {
        Vector power = Vector::Ones(z.rows());
        for (Index l = 1; l <= spec.terms; ++l) {
            power = power.cwiseProduct(z.col(j));
            out.col(col++) = power;
        }
    }
    return out;
}

} // namespace detail

/// Sieve basis of the covariates: an optional constant column, then for each
/// covariate its powers z, z^2, ..., z^J (polynomial family) or the covariate
/// columns as given (table family). Throws if the result is rank deficient.
inline Basis build_basis(const DenseMatrix& covariates, const SieveSpec& spec) {
    require(covariates.rows() >= 1 && covariates.cols() >= 1, ErrorKind::data, "build_basis: empty covariates");
    require(covariates.allFinite(), ErrorKind::data, "build_basis: non-finite covariate");
    require(spec.terms >= 1, ErrorKind::config, "build_basis: J must be >= 1");
    require(spec.covariate_dim == 0 || spec.covariate_dim == covariates.cols(), ErrorKind::config,
            "build_basis: covariate dimension does not match the sieve spec");
    Basis b;
    const bool scale = spec.standardize && spec.family == SieveFamily::polynomial;
    b.scaler = scale ? Scaler::fit(covariates) : Scaler::identity(covariates.cols());
    b.matrix = detail::expand(b.scaler.apply(covariates), spec);
    require(b.matrix.rows() > b.matrix.cols(), ErrorKind::numerical,
            "build_basis: " + std::to_string(b.matrix.cols()) + " basis columns need more than " +
                std::to_string(b.matrix.rows()) + " rows");
    detail::checked_gram_factor(b.matrix, "build_basis");
    return b;
}

/// Basis rows for new covariates under an already fitted scaler.
inline DenseMatrix apply_basis(const DenseMatrix& covariates, const SieveSpec& spec, const Scaler& scaler) {
    require(covariates.cols() == scaler.mean.size(), ErrorKind::data, "apply_basis: covariate dimension mismatch");
    return detail::expand(scaler.apply(covariates), spec);
}

enum class RankMode { ratio, gap };

/// Index k <= r_max (1-based) maximising lambda_k / lambda_{k+1}, or the gap
/// lambda_k - lambda_{k+1}. Values below gram_null_tol * lambda_1 count as zero and end
/// the search, so round-off among null directions cannot win the ratio.
inline Index select_rank(const Vector& values, Index r_max, RankMode mode = RankMode::ratio) {
    require(r_max >= 1 && values.size() > r_max, ErrorKind::config,
            "select_rank: need more than r_max = " + std::to_string(r_max) + " values");
    Index best = 1;
    double best_score = -1.0;
    for (Index k = 1; k <= r_max; ++k) {
        const double a = values(k - 1);
        if (k > 1 && !(a > gram_null_tol * values(0))) break;
        const double b = values(k);
        const double score = mode == RankMode::ratio ? a / std::max(b, 1e-300) : a - b;
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

struct SignEstimate {
    std::vector<int> signs;
    std::vector<Index> ties; // components with u_k' vol v_k exactly zero (sign set to +1)
};

/// Frobenius-optimal signs s_k in {-1, 1} for sum_k s_k lambda_k u_k v_k'.
///
/// With orthonormal U and V the cross terms vanish and the objective splits
/// per component, so s_k = sign(u_k' vol v_k).
inline SignEstimate estimate_signs(const Vector& lambda, const DenseMatrix& u, const DenseMatrix& v,
                                   const DenseMatrix& vol) {
    require(u.cols() == v.cols() && lambda.size() == u.cols(), ErrorKind::numerical,
            "estimate_signs: rank mismatch");
    require(u.rows() == vol.rows() && v.rows() == vol.cols(), ErrorKind::numerical,
            "estimate_signs: vector lengths do not match the matrix");
    SignEstimate out;
    for (Index k = 0; k < u.cols(); ++k) {
        const double fit = u.col(k).dot(vol * v.col(k));
        if (fit == 0.0) out.ties.push_back(k);
        out.signs.push_back(fit < 0.0 ? -1 : 1);
    }
    return out;
}

struct TipPcaModel {
    Index rank = 0;
    Vector lambda;        // descending singular values of the raw matrix
    DenseMatrix g_hat;    // D x r
    DenseMatrix h_hat;    // n x r, sign corrected
    DenseMatrix b_hat;    // sieve coefficients of the left factor, p x r
    std::vector<int> signs;
    SieveSpec left_spec;
    SieveSpec right_spec;
    Scaler left_scaler;
    Scaler right_scaler;
    double floor_eps = 1e-12;
    std::optional<Vector> next_covariates; // covariates of the day after the sample, when known
};

struct FitOptions {
    Index r_max = 0; // 0: min(8, floor(min(D, n) / 2))
    RankMode rank_mode = RankMode::ratio;
    double floor_eps = 1e-12;
};

inline Index default_r_max(Index d, Index n) { return std::max<Index>(1, std::min<Index>(8, std::min(d, n) / 2)); }

/// Fits the projected low-rank model. `rank` = 0 selects it from the
/// singular-value ratios.
inline TipPcaModel fit(const DenseMatrix& vol, const DenseMatrix& x, const DenseMatrix& w, Index rank,
                       const SieveSpec& left_spec, const SieveSpec& right_spec, const FitOptions& opts = {}) {
    require_finite(vol, "fit");
    const Index d = vol.rows();
    const Index n = vol.cols();
    require(x.rows() == d, ErrorKind::data,
            "fit: " + std::to_string(x.rows()) + " left covariate rows for " + std::to_string(d) + " days");
    require(w.rows() == n, ErrorKind::data,
            "fit: " + std::to_string(w.rows()) + " right covariate rows for " + std::to_string(n) + " bins");

    const Basis phi = build_basis(x, left_spec);
    const Basis psi = build_basis(w, right_spec);

    const Vector spectrum = singular_values(vol);
    if (rank == 0) {
        const Index r_max = opts.r_max > 0 ? opts.r_max : default_r_max(d, n);
        rank = select_rank(spectrum, std::min<Index>(r_max, spectrum.size() - 1), opts.rank_mode);
    }
    require(rank >= 1 && rank <= std::min(phi.matrix.cols(), psi.matrix.cols()), ErrorKind::config,
            "fit: rank " + std::to_string(rank) + " exceeds the sieve widths");
    require(spectrum(rank - 1) > 0.0, ErrorKind::numerical, "fit: matrix has fewer nonzero singular values than the rank");

    TipPcaModel model;
    model.rank = rank;
    model.lambda = spectrum.head(rank);
    model.left_spec = left_spec;
    model.right_spec = right_spec;
    model.left_spec.covariate_dim = x.cols();
    model.right_spec.covariate_dim = w.cols();
    model.left_scaler = phi.scaler;
    model.right_scaler = psi.scaler;
    model.floor_eps = opts.floor_eps;

    const DenseMatrix p_phi = projection_matrix(phi.matrix);
    const DenseMatrix p_psi = projection_matrix(psi.matrix);

    const DenseMatrix left = p_phi * vol;   // P_Phi S
    const DenseMatrix right = vol * p_psi;  // S P_Psi
    const DenseMatrix left_gram = left * left.transpose();
    const DenseMatrix right_gram = right.transpose() * right;
    model.g_hat = sym_eig(0.5 * (left_gram + left_gram.transpose()), rank).vectors;
    const DenseMatrix v_hat = sym_eig(0.5 * (right_gram + right_gram.transpose()), rank).vectors;

    const SignEstimate s = estimate_signs(model.lambda, model.g_hat, v_hat, vol);
    model.signs = s.signs;
    model.h_hat = v_hat;
    for (Index k = 0; k < rank; ++k) model.h_hat.col(k) *= static_cast<double>(s.signs[static_cast<std::size_t>(k)]);

    model.b_hat = least_squares(phi.matrix, model.g_hat);
    return model;
}

/// G_hat diag(lambda) H_hat'.
inline DenseMatrix in_sample_lowrank(const TipPcaModel& model) {
    return model.g_hat * model.lambda.asDiagonal() * model.h_hat.transpose();
}

struct Prediction {
    Vector values;
    std::vector<std::string> warnings;
};

/// One-day-ahead spot-variance vector g_hat(x_next) diag(lambda) H_hat'.
inline Prediction predict_next_day(const TipPcaModel& model, const Vector& x_next, double extrapolation_guard = 10.0) {
    require(model.rank >= 1, ErrorKind::config, "predict_next_day: model is not fitted");
    require(x_next.size() == model.left_scaler.mean.size(), ErrorKind::data,
            "predict_next_day: expected " + std::to_string(model.left_scaler.mean.size()) + " covariates, got " +
                std::to_string(x_next.size()));
    require(x_next.allFinite(), ErrorKind::data, "predict_next_day: non-finite covariate");

    Prediction out;
    const DenseMatrix row = x_next.transpose();
    if (model.left_spec.family == SieveFamily::polynomial && model.left_spec.standardize) {
        const DenseMatrix z = model.left_scaler.apply(row);
        for (Index j = 0; j < z.cols(); ++j)
            if (std::abs(z(0, j)) > extrapolation_guard)
                out.warnings.push_back("covariate " + std::to_string(j) + " is " + std::to_string(z(0, j)) +
                                       " in-sample standard deviations from its mean");
    }
    const DenseMatrix phi = apply_basis(row, model.left_spec, model.left_scaler);
    const DenseMatrix g = phi * model.b_hat;
    out.values = (g * model.lambda.asDiagonal() * model.h_hat.transpose()).transpose();
    out.values = out.values.cwiseMax(model.floor_eps);
    return out;
}

/// Sieve options for the default covariates: HAR realized-variance lags on
/// the day side, intraday time tau/n on the bin side.
struct TipPcaOptions {
    Index rank = 0;
    Index r_max = 0;
    RankMode rank_mode = RankMode::ratio;
    Index j1 = 2;
    Index j2 = 3;
    bool standardize = true;
    double floor_eps = 1e-12;
};

inline DenseMatrix intraday_time(Index n) {
    DenseMatrix w(n, 1);
    for (Index j = 0; j < n; ++j) w(j, 0) = static_cast<double>(j + 1) / static_cast<double>(n);
    return w;
}

/// Fits on rows [max(first_row, 22), D) of a spot-variance panel. The HAR
/// covariates come from `daily_rv` when given, else from the panel's row
/// means. The model remembers the covariates of day D so it can predict
/// without the panel.
inline TipPcaModel fit_panel(const DenseMatrix& vol, const TipPcaOptions& opts = {}, Index first_row = 0,
                             const Vector* daily_rv = nullptr) {
    require(!daily_rv || daily_rv->size() == vol.rows(), ErrorKind::data, "fit_panel: RV series length mismatch");
    const RvSeries rv = daily_rv ? realized_vol_covariates(*daily_rv) : realized_vol_covariates(vol);
    const Index start = std::max(first_row, rv.first_available());
    require(start < vol.rows(), ErrorKind::data,
            "fit_panel: " + std::to_string(vol.rows()) + " days leave no rows with 22 days of history");
    SieveSpec left{SieveFamily::polynomial, opts.j1, 3, true, opts.standardize};
    SieveSpec right{SieveFamily::polynomial, opts.j2, 1, true, opts.standardize};
    FitOptions fo{opts.r_max, opts.rank_mode, opts.floor_eps};
    TipPcaModel model = fit(vol.bottomRows(vol.rows() - start), rv.covariates(start, vol.rows()),
                            intraday_time(vol.cols()), opts.rank, left, right, fo);
    model.next_covariates = Vector(rv.next);
    return model;
}

inline Prediction predict_panel_next(const TipPcaModel& model) {
    require(model.next_covariates.has_value(), ErrorKind::data, "predict: model carries no next-day covariates");
    return predict_next_day(model, *model.next_covariates);
}

struct TipPcaSForecast {
    Vector values;
    double level = 0.0; // HAR prediction of the next day's row mean
    bool ridge = false;
};

/// Separable benchmark: HAR forecast of the row mean times the column-mean
/// profile scaled to unit mean. Rows before `first_row` (and the first 22,
/// which lack lagged covariates) only feed the lags.
inline TipPcaSForecast tip_pca_s(const DenseMatrix& vol, const RvSeries& rv, double floor_eps = 1e-12,
                                 Index first_row = 0) {
    const Index d = vol.rows();
    require(d >= RvSeries::history + 1 && rv.size() == d && rv.next_available, ErrorKind::data,
            "tip_pca_s: need at least 23 days of history, got " + std::to_string(d));
    const Index start = std::max(first_row, RvSeries::history);
    require(start < d, ErrorKind::data, "tip_pca_s: no rows left to fit");
    const DenseMatrix x = rv.covariates(start, d);
    const Vector y = rv.rv.segment(start, d - start);
    const LinearFit har = ols_with_intercept(x, y);

    const Vector profile_raw = vol.bottomRows(d - start).colwise().mean().transpose();
    const double mean = profile_raw.mean();
    require(mean > 0.0, ErrorKind::numerical, "tip_pca_s: column-mean profile has nonpositive mean");

    TipPcaSForecast out;
    out.level = har.predict(rv.next);
    out.ridge = har.ridge;
    out.values = (out.level * profile_raw / mean).cwiseMax(floor_eps);
    return out;
}

} // namespace tipvol
