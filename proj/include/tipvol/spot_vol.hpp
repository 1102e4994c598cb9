#pragma once

// Jump-robust pre-averaging estimator of the intraday spot variance, and the
// realized-variance covariates derived from the resulting day x bin matrix.

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace tipvol {

enum class KernelSide { backward, centered };

struct PreAvgConfig {
    Index n = 39;               // estimation bins per day
    Index k_m = 0;              // pre-averaging window; 0 selects ceil(0.5 sqrt(m))
    double trunc_scale = 1.8;
    double trunc_exponent = 0.47;
    double floor_eps = 1e-12;
    KernelSide kernel_side = KernelSide::backward;
    bool truncate = true;

    Index window_for(Index m) const {
        return k_m > 0 ? k_m : static_cast<Index>(std::ceil(0.5 * std::sqrt(static_cast<double>(m))));
    }

    void validate(Index m) const {
        const Index k = window_for(m);
        require(n >= 1, ErrorKind::config, "spot: n must be >= 1");
        require(k >= 2, ErrorKind::config, "spot: k_m must be >= 2");
        require(k < m, ErrorKind::config,
                "spot: k_m = " + std::to_string(k) + " must be smaller than m = " + std::to_string(m));
        require(n <= m, ErrorKind::config, "spot: n must not exceed m");
        require(trunc_scale > 0.0, ErrorKind::config, "spot: trunc_scale must be positive");
        require(trunc_exponent > 0.0 && trunc_exponent < 0.5, ErrorKind::config,
                "spot: trunc_exponent must lie in (0, 0.5)");
        require(floor_eps > 0.0, ErrorKind::config, "spot: floor_eps must be positive");
    }
};

/// Pre-averaging weight g(x) = min(2x, 1 - x) on [0, 1].
inline double weight_g(double x) {
    require(x >= 0.0 && x <= 1.0, ErrorKind::data, "weight_g: argument " + std::to_string(x) + " outside [0, 1]");
    return std::min(2.0 * x, 1.0 - x);
}

/// phi_k(g) = sum_{i=1}^{k} g(i/k)^2.
inline double phi_k(Index k) {
    require(k >= 2, ErrorKind::config, "phi_k: window must be >= 2");
    double s = 0.0;
    for (Index i = 1; i <= k; ++i) {
        const double g = weight_g(static_cast<double>(i) / static_cast<double>(k));
        s += g * g;
    }
    return s;
}

/// (pi/2) sum_{s=2}^{m} |dY_{s-1}| |dY_s| over one day's log prices Y_0..Y_m.
inline double bipower_variation(const Eigen::Ref<const Vector>& prices) {
    require(prices.size() >= 3, ErrorKind::data, "bipower_variation: need at least three prices");
    double s = 0.0;
    for (Index j = 2; j < prices.size(); ++j)
        s += std::abs(prices(j - 1) - prices(j - 2)) * std::abs(prices(j) - prices(j - 1));
    return 0.5 * std::numbers::pi * s;
}

struct SpotDay {
    Vector raw;             // before flooring
    double bpv = 0.0;
    double threshold = 0.0; // nu_m
    Index truncated = 0;    // pre-averaged returns removed by the threshold
};

/// Spot variance of every bin tau = 1..n for one day, before flooring.
///
/// Bin tau averages the noise-corrected squared pre-averaged returns whose
/// start time t_{s-1} falls in the kernel window around tau/n: (tau-1)/n to
/// tau/n for the backward kernel, tau/n -+ 1/(2n) for the centered one.
/// Windows cut short by the end of the day are renormalised by the kernel
/// mass they actually cover.
inline SpotDay estimate_spot_day_detail(const Eigen::Ref<const Vector>& prices, const PreAvgConfig& cfg) {
    const Index m = prices.size() - 1;
    require(m >= 3, ErrorKind::data, "estimate_spot_day: need at least four prices");
    require(prices.allFinite(), ErrorKind::data, "estimate_spot_day: non-finite price");
    cfg.validate(m);
    const Index k = cfg.window_for(m);
    const Index n = cfg.n;

    // dy[j] = Y_{j+1} - Y_j, j = 0..m-1 (i.e. dy[j] is the (j+1)-th increment).
    Vector dy(m);
    for (Index j = 0; j < m; ++j) dy(j) = prices(j + 1) - prices(j);

    Vector g(k + 1), dg2(k + 1);
    for (Index l = 0; l <= k; ++l) g(l) = weight_g(static_cast<double>(l) / static_cast<double>(k));
    dg2(0) = 0.0;
    for (Index l = 1; l <= k; ++l) dg2(l) = (g(l) - g(l - 1)) * (g(l) - g(l - 1));
    const double phi = phi_k(k);

    SpotDay out;
    out.bpv = bipower_variation(prices);
    out.threshold = cfg.trunc_scale * std::sqrt(out.bpv) *
                    std::pow(static_cast<double>(k) / static_cast<double>(m), cfg.trunc_exponent);

    Vector sum = Vector::Zero(n);
    std::vector<Index> count(static_cast<std::size_t>(n), 0);
    const double dm = static_cast<double>(m);
    auto ceil_div = [](Index a, Index b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); };

    for (Index s = 1; s <= m - k + 1; ++s) {
        // t_{s-1} = (s-1)/m; bins are right-closed.
        Index tau = 0;
        if (cfg.kernel_side == KernelSide::backward) {
            // (tau-1)/n < t <= tau/n; t = 0 belongs to no bin.
            if (s == 1) continue;
            tau = ceil_div((s - 1) * n, m);
        } else {
            // tau - 1/2 < t n <= tau + 1/2
            tau = ceil_div(2 * (s - 1) * n - m, 2 * m);
        }
        if (tau < 1 || tau > n) continue;

        // Increment Y_{s+l} - Y_{s+l-1} is dy[s+l-1].
        double ybar = 0.0;
        for (Index l = 1; l < k; ++l) ybar += g(l) * dy(s + l - 1);
        double yhat = 0.0;
        const Index lmax = std::min(k, m - s);
        for (Index l = 1; l <= lmax; ++l) yhat += dg2(l) * dy(s + l - 1) * dy(s + l - 1);

        const auto slot = static_cast<std::size_t>(tau - 1);
        ++count[slot];
        if (cfg.truncate && std::abs(ybar) > out.threshold) {
            ++out.truncated;
            continue;
        }
        sum(tau - 1) += ybar * ybar - 0.5 * yhat;
    }

    out.raw.resize(n);
    for (Index tau = 0; tau < n; ++tau) {
        const Index c = count[static_cast<std::size_t>(tau)];
        require(c > 0, ErrorKind::config,
                "estimate_spot_day: bin " + std::to_string(tau + 1) + " receives no pre-averaged returns (k_m = " +
                    std::to_string(k) + ", m/n = " + std::to_string(m / n) + ")");
        // K_b weight n per return, divided by realized kernel mass c*n/m.
        out.raw(tau) = sum(tau) * dm / (phi * static_cast<double>(c));
    }
    return out;
}

inline Vector estimate_spot_day(const Eigen::Ref<const Vector>& prices, const PreAvgConfig& cfg) {
    return estimate_spot_day_detail(prices, cfg).raw.cwiseMax(cfg.floor_eps);
}

/// D x n spot-variance matrix from a D x (m+1) panel of log prices.
inline DenseMatrix estimate_panel(const DenseMatrix& ticks, const PreAvgConfig& cfg) {
    require(ticks.rows() >= 1, ErrorKind::data, "estimate_panel: empty panel");
    DenseMatrix out(ticks.rows(), cfg.n);
    for (Index i = 0; i < ticks.rows(); ++i) {
        try {
            const Vector row = ticks.row(i).transpose();
            out.row(i) = estimate_spot_day(row, cfg).transpose();
        } catch (const Error& e) {
            throw Error(e.kind(), "day " + std::to_string(i) + ": " + e.what());
        }
    }
    return out;
}

/// Daily realized variance and the lagged HAR covariates of each day.
///
/// For day i the covariates are (RV_{i-1}, mean RV_{i-5..i-1}, mean
/// RV_{i-22..i-1}); they exist only from the 23rd day on. `next` holds the
/// covariates of the day after the sample.
struct RvSeries {
    Vector rv;
    Vector daily;
    Vector weekly;
    Vector monthly;
    std::vector<bool> available;
    Eigen::Vector3d next = Eigen::Vector3d::Zero();
    bool next_available = false;

    static constexpr Index history = 22;

    Index size() const { return rv.size(); }

    Index first_available() const { return history; }

    /// Rows [first, last) of the covariate matrix (one row per day).
    DenseMatrix covariates(Index first, Index last) const {
        require(first >= history && last <= size() && first < last, ErrorKind::data,
                "RvSeries: covariates requested for days lacking 22 days of history");
        DenseMatrix x(last - first, 3);
        for (Index i = first; i < last; ++i) x.row(i - first) << daily(i), weekly(i), monthly(i);
        return x;
    }
};

inline RvSeries realized_vol_covariates(const Vector& rv) {
    RvSeries out;
    const Index d = rv.size();
    out.rv = rv;
    out.daily = Vector::Zero(d);
    out.weekly = Vector::Zero(d);
    out.monthly = Vector::Zero(d);
    out.available.assign(static_cast<std::size_t>(d), false);
    auto lagged = [&](Index i, Index span) { return rv.segment(i - span, span).mean(); };
    for (Index i = RvSeries::history; i < d; ++i) {
        out.daily(i) = rv(i - 1);
        out.weekly(i) = lagged(i, 5);
        out.monthly(i) = lagged(i, 22);
        out.available[static_cast<std::size_t>(i)] = true;
    }
    if (d >= RvSeries::history) {
        out.next << rv(d - 1), lagged(d, 5), lagged(d, 22);
        out.next_available = true;
    }
    return out;
}

/// RV_i as the row mean of the spot-variance matrix.
inline RvSeries realized_vol_covariates(const DenseMatrix& vol) {
    require(vol.rows() >= 1, ErrorKind::data, "realized_vol_covariates: empty matrix");
    return realized_vol_covariates(Vector(vol.rowwise().mean()));
}

/// Alternative RV source: sum of squared log returns of each day's ticks.
inline Vector realized_variance_from_ticks(const DenseMatrix& ticks) {
    Vector rv(ticks.rows());
    for (Index i = 0; i < ticks.rows(); ++i) {
        double s = 0.0;
        for (Index j = 1; j < ticks.cols(); ++j) s += (ticks(i, j) - ticks(i, j - 1)) * (ticks(i, j) - ticks(i, j - 1));
        rv(i) = s;
    }
    return rv;
}

/// Log returns over each estimation bin: Y at tau*m/n minus Y at (tau-1)*m/n.
inline DenseMatrix bin_returns(const DenseMatrix& ticks, Index n) {
    const Index m = ticks.cols() - 1;
    require(n >= 1 && n <= m, ErrorKind::config, "bin_returns: n must lie in [1, m]");
    DenseMatrix out(ticks.rows(), n);
    for (Index tau = 1; tau <= n; ++tau)
        out.col(tau - 1) = ticks.col((tau * m) / n) - ticks.col(((tau - 1) * m) / n);
    return out;
}

} // namespace tipvol
