#pragma once

#include "tipvol/error.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace tipvol::stats {

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Upper tail P(X > x) of a chi-square variable with `df` degrees of freedom.
inline double chi2_sf(double x, double df) {
    if (!(x > 0.0)) return 1.0;
    if (std::isinf(x)) return 0.0;
    return boost::math::gamma_q(0.5 * df, 0.5 * x);
}

/// Sample quantile with linear interpolation between order statistics
/// (Hyndman-Fan type 7).
inline double quantile_type7(std::vector<double> xs, double p) {
    require(!xs.empty(), ErrorKind::data, "quantile: empty sample");
    require(p >= 0.0 && p <= 1.0, ErrorKind::config, "quantile: level outside [0, 1]");
    std::sort(xs.begin(), xs.end());
    const double h = (static_cast<double>(xs.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, xs.size() - 1);
    return xs[lo] + (h - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

// x log(y) with the convention 0 log 0 = 0.
inline double xlogy(double x, double y) { return x == 0.0 ? 0.0 : x * std::log(y); }

} // namespace tipvol::stats
