#pragma once

// Forecast losses, Diebold-Mariano comparison, Benjamini-Hochberg adjustment,
// historical-quantile VaR and the three VaR backtests (Kupiec unconditional
// coverage, Christoffersen conditional coverage, Engle-Manganelli DQ).

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace tipvol {

namespace detail {
inline void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* who) {
    require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorKind::data,
            std::string(who) + ": shape mismatch (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    require(a.size() > 0, ErrorKind::data, std::string(who) + ": empty input");
}
} // namespace detail

/// Per-entry squared errors in row-major (day, bin) order.
inline std::vector<double> squared_errors(const DenseMatrix& pred, const DenseMatrix& actual) {
    detail::require_same_shape(pred, actual, "mspe");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(pred.size()));
    for (Index i = 0; i < pred.rows(); ++i)
        for (Index j = 0; j < pred.cols(); ++j) out.push_back((pred(i, j) - actual(i, j)) * (pred(i, j) - actual(i, j)));
    return out;
}

/// Per-entry QLIKE terms log(pred) + actual / pred.
inline std::vector<double> qlike_terms(const DenseMatrix& pred, const DenseMatrix& actual) {
    detail::require_same_shape(pred, actual, "qlike");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(pred.size()));
    for (Index i = 0; i < pred.rows(); ++i)
        for (Index j = 0; j < pred.cols(); ++j) {
            require(pred(i, j) > 0.0, ErrorKind::numerical,
                    "qlike: nonpositive prediction at (" + std::to_string(i) + ", " + std::to_string(j) + ")");
            out.push_back(std::log(pred(i, j)) + actual(i, j) / pred(i, j));
        }
    return out;
}

inline double mean_of(const std::vector<double>& xs) {
    return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

inline double mspe(const DenseMatrix& pred, const DenseMatrix& actual) { return mean_of(squared_errors(pred, actual)); }

inline double qlike(const DenseMatrix& pred, const DenseMatrix& actual) { return mean_of(qlike_terms(pred, actual)); }

struct DmResult {
    double statistic = 0.0;
    double p_two_sided = 1.0;
    double p_one_sided = 0.5; // H1: loss_a is larger on average (b forecasts better)
    Index lag = 0;
};

/// Diebold-Mariano test on d = loss_a - loss_b with a Bartlett long-run
/// variance at lag floor(1.5 T^{1/3}).
inline DmResult dm_test(const std::vector<double>& loss_a, const std::vector<double>& loss_b) {
    require(loss_a.size() == loss_b.size(), ErrorKind::data, "dm_test: loss series differ in length");
    require(loss_a.size() >= 30, ErrorKind::data, "dm_test: need at least 30 losses");
    const std::size_t t = loss_a.size();
    const double dt = static_cast<double>(t);
    std::vector<double> d(t);
    for (std::size_t i = 0; i < t; ++i) d[i] = loss_a[i] - loss_b[i];
    const double mean = mean_of(d);

    DmResult out;
    out.lag = static_cast<Index>(std::floor(1.5 * std::cbrt(dt)));
    auto autocov = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t i = lag; i < t; ++i) s += (d[i] - mean) * (d[i - lag] - mean);
        return s / dt;
    };
    double lrv = autocov(0);
    for (Index l = 1; l <= out.lag && static_cast<std::size_t>(l) < t; ++l)
        lrv += 2.0 * (1.0 - static_cast<double>(l) / static_cast<double>(out.lag + 1)) * autocov(static_cast<std::size_t>(l));

    double scale = 0.0;
    for (double x : d) scale = std::max(scale, std::abs(x));
    const bool degenerate = !(lrv > (1e-14 * scale) * (1e-14 * scale));
    if (degenerate) {
        if (mean == 0.0 || scale == 0.0) {
            out.statistic = 0.0;
            out.p_two_sided = 1.0;
            out.p_one_sided = 0.5;
        } else {
            out.statistic = mean > 0.0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
            out.p_two_sided = 0.0;
            out.p_one_sided = mean > 0.0 ? 0.0 : 1.0;
        }
        return out;
    }
    out.statistic = mean / std::sqrt(lrv / dt);
    out.p_two_sided = std::min(1.0, 2.0 * stats::normal_cdf(-std::abs(out.statistic)));
    out.p_one_sided = stats::normal_cdf(-out.statistic);
    return out;
}

/// Benjamini-Hochberg step-up adjusted p-values, in the input order.
inline std::vector<double> bh_adjust(const std::vector<double>& p) {
    const std::size_t m = p.size();
    for (double x : p) require(x >= 0.0 && x <= 1.0, ErrorKind::data, "bh_adjust: p-value outside [0, 1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> out(m);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t idx = order[r];
        running = std::min(running, p[idx] * static_cast<double>(m) / static_cast<double>(r + 1));
        out[idx] = std::min(1.0, running);
    }
    return out;
}

enum class VarPool { pooled, per_bin };

struct VarRow {
    Vector var;             // positive loss thresholds, one per bin
    Vector quantile;        // standardized-return quantile used for each bin
};

/// One-day-ahead VaR per bin: minus the q0 quantile of in-sample standardized
/// bin returns r / sqrt(c_hat * delta), rescaled by sqrt(predicted * delta).
inline VarRow var_forecast(const Vector& pred_vol, const DenseMatrix& returns, const DenseMatrix& vol, double q0,
                           VarPool pool = VarPool::pooled, double delta = 0.0) {
    detail::require_same_shape(returns, vol, "var_forecast");
    require(pred_vol.size() == vol.cols(), ErrorKind::data, "var_forecast: prediction length differs from bin count");
    require((pred_vol.array() > 0.0).all(), ErrorKind::numerical, "var_forecast: nonpositive predicted variance");
    require(q0 > 0.0 && q0 < 1.0, ErrorKind::config, "var_forecast: q0 must lie in (0, 1)");
    const Index n = vol.cols();
    if (delta <= 0.0) delta = 1.0 / static_cast<double>(n);

    auto standardized = [&](Index j) {
        std::vector<double> z;
        for (Index i = 0; i < vol.rows(); ++i)
            if (vol(i, j) > 0.0) z.push_back(returns(i, j) / std::sqrt(vol(i, j) * delta));
        return z;
    };

    VarRow out;
    out.var.resize(n);
    out.quantile.resize(n);
    if (pool == VarPool::pooled) {
        std::vector<double> all;
        for (Index j = 0; j < n; ++j) {
            auto z = standardized(j);
            all.insert(all.end(), z.begin(), z.end());
        }
        require(!all.empty(), ErrorKind::data, "var_forecast: empty standardization pool");
        out.quantile.setConstant(stats::quantile_type7(std::move(all), q0));
    } else {
        for (Index j = 0; j < n; ++j) {
            auto z = standardized(j);
            require(!z.empty(), ErrorKind::data, "var_forecast: empty standardization pool for bin " + std::to_string(j + 1));
            out.quantile(j) = stats::quantile_type7(std::move(z), q0);
        }
    }
    for (Index j = 0; j < n; ++j) out.var(j) = -out.quantile(j) * std::sqrt(pred_vol(j) * delta);
    return out;
}

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool flagged = false; // pseudo-inverse used (DQ)
};

namespace detail {
inline double bernoulli_loglik(double zeros, double ones, double p) {
    return stats::xlogy(zeros, 1.0 - p) + stats::xlogy(ones, p);
}
} // namespace detail

/// Kupiec unconditional coverage LR for x violations in T trials.
inline TestResult lruc_test(Index violations, Index trials, double q0) {
    require(trials >= 1 && violations >= 0 && violations <= trials, ErrorKind::data,
            "lruc_test: need 0 <= violations <= trials");
    require(q0 > 0.0 && q0 < 1.0, ErrorKind::config, "lruc_test: q0 must lie in (0, 1)");
    const double x = static_cast<double>(violations);
    const double t = static_cast<double>(trials);
    const double lr = -2.0 * (detail::bernoulli_loglik(t - x, x, q0) - detail::bernoulli_loglik(t - x, x, x / t));
    TestResult r;
    r.statistic = std::max(0.0, lr);
    r.p_value = stats::chi2_sf(r.statistic, 1.0);
    return r;
}

struct LrccResult {
    TestResult cc;
    double lruc = 0.0;
    double lrind = 0.0;
};

/// Christoffersen conditional coverage: LRuc plus the first-order Markov
/// independence LR; chi-square(2).
inline LrccResult lrcc_test(const std::vector<int>& hits, double q0) {
    require(hits.size() >= 2, ErrorKind::data, "lrcc_test: need at least two observations");
    Index x = 0;
    double n[2][2] = {{0, 0}, {0, 0}};
    for (std::size_t t = 0; t < hits.size(); ++t) {
        require(hits[t] == 0 || hits[t] == 1, ErrorKind::data, "lrcc_test: hits must be 0 or 1");
        x += hits[t];
        if (t > 0) n[hits[t - 1]][hits[t]] += 1.0;
    }
    LrccResult out;
    out.lruc = lruc_test(x, static_cast<Index>(hits.size()), q0).statistic;

    const double from0 = n[0][0] + n[0][1];
    const double from1 = n[1][0] + n[1][1];
    const double pi01 = from0 > 0 ? n[0][1] / from0 : 0.0;
    const double pi11 = from1 > 0 ? n[1][1] / from1 : 0.0;
    const double pi = (n[0][1] + n[1][1]) / (from0 + from1);
    const double restricted = detail::bernoulli_loglik(n[0][0] + n[1][0], n[0][1] + n[1][1], pi);
    const double unrestricted = detail::bernoulli_loglik(n[0][0], n[0][1], pi01) + detail::bernoulli_loglik(n[1][0], n[1][1], pi11);
    out.lrind = std::max(0.0, -2.0 * (restricted - unrestricted));
    out.cc.statistic = out.lruc + out.lrind;
    out.cc.p_value = stats::chi2_sf(out.cc.statistic, 2.0);
    return out;
}

/// Dynamic quantile test: regress H_t = hit_t - q0 on (1, H_{t-1..t-lags},
/// VaR_t); DQ = H'X(X'X)^{-1}X'H / (q0 (1 - q0)) ~ chi-square(lags + 2).
inline TestResult dq_test(const std::vector<int>& hits, const std::vector<double>& var, double q0, Index lags = 4) {
    require(hits.size() == var.size(), ErrorKind::data, "dq_test: hit and VaR series differ in length");
    require(lags >= 0 && static_cast<Index>(hits.size()) > lags + 2, ErrorKind::data, "dq_test: series too short");
    require(q0 > 0.0 && q0 < 1.0, ErrorKind::config, "dq_test: q0 must lie in (0, 1)");
    const Index t_all = static_cast<Index>(hits.size());
    const Index rows = t_all - lags;
    const Index p = lags + 2;
    DenseMatrix x(rows, p);
    Vector h(rows);
    for (Index t = lags; t < t_all; ++t) {
        const Index r = t - lags;
        h(r) = hits[static_cast<std::size_t>(t)] - q0;
        x(r, 0) = 1.0;
        for (Index l = 1; l <= lags; ++l) x(r, l) = hits[static_cast<std::size_t>(t - l)] - q0;
        x(r, p - 1) = var[static_cast<std::size_t>(t)];
    }
    TestResult out;
    const Vector xh = x.transpose() * h;
    const Eigen::MatrixXd g = x.transpose() * x;
    double quad = 0.0;
    if (auto l = detail::cholesky(g)) {
        Vector s = xh;
        l->triangularView<Eigen::Lower>().solveInPlace(s);
        quad = s.squaredNorm();
    } else {
        out.flagged = true;
        quad = xh.dot(psd_pseudo_inverse(DenseMatrix(g)) * xh);
    }
    out.statistic = std::max(0.0, quad / (q0 * (1.0 - q0)));
    out.p_value = stats::chi2_sf(out.statistic, static_cast<double>(p));
    return out;
}

} // namespace tipvol
