#pragma once

// Synthetic high-frequency panels: a HAR(1,5,22) recursion drives the daily
// volatility level, a quadratic curve gives the intraday U-shape, and the
// efficient log price follows an Euler-discretised jump diffusion observed
// with additive Gaussian microstructure noise.

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/rng.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace tipvol {

enum class PositivityPolicy { entry, panel };

struct SimConfig {
    Index days = 50;  // D; D+1 days are generated, the last is the forecast target
    Index m = 23400;  // intraday observations per day
    double mu = 0.05 / 252;
    double gamma0 = 0.04 / 252;
    double gamma1 = 0.5 / 252;
    double b0 = 0.5;
    double b1 = 0.372;
    double b2 = 0.343;
    double b3 = 0.224;
    double har_shock_sd = 1.0; // sd of the HAR innovation zeta
    double noise_sd = 0.0005;
    double jump_mean = -0.01;
    double jump_sd = 0.02;
    double jump_intensity = 36.0; // expected jumps per 252-day year
    double eps_scale = 0.01;      // sd of xi in eps = q(t) xi
    std::uint64_t seed = 20240101;
    Index burn_in = 100;
    double initial_log_price = 1.0;
    PositivityPolicy positivity = PositivityPolicy::entry;
    int max_attempts = 1000;

    void validate() const {
        require(m >= 2, ErrorKind::config, "sim: m must be >= 2");
        require(days >= 1, ErrorKind::config, "sim: days must be >= 1");
        require(burn_in >= 0, ErrorKind::config, "sim: burn_in must be >= 0");
        require(har_shock_sd >= 0 && noise_sd >= 0 && jump_sd >= 0 && eps_scale >= 0 && jump_intensity >= 0,
                ErrorKind::config, "sim: standard deviations and intensities must be non-negative");
        require(jump_intensity / (252.0 * static_cast<double>(m)) <= 1.0, ErrorKind::config,
                "sim: jump probability per step exceeds one");
        require(max_attempts >= 1, ErrorKind::config, "sim: max_attempts must be >= 1");
    }
};

struct JumpRecord {
    Index day;
    Index step;
    double size;
};

struct SimOutput {
    DenseMatrix ticks;      // (D+1) x (m+1) observed log prices Y, column s is t = s/m
    DenseMatrix true_spot;  // (D+1) x (m+1) sigma^2 at t = s/m
    std::vector<double> daily_sigma;
    std::vector<JumpRecord> jumps;
    int attempts = 1;
};

struct DayPath {
    Vector observed;          // Y_{t_s}, s = 0..m
    double efficient_close{}; // Z_{t_m}, without noise
    std::vector<JumpRecord> jumps;
};

/// U-shaped intraday profile h(t) = gamma0 + gamma1 (t - 0.6)^2.
inline double intraday_profile(const SimConfig& c, double t) { return c.gamma0 + c.gamma1 * (t - 0.6) * (t - 0.6); }

/// Heteroskedasticity scale of the intraday noise, q(t)^2 = 0.1 + 0.5 (2t - 1)^2.
inline double noise_scale_sq(double t) { return 0.1 + 0.5 * (2.0 * t - 1.0) * (2.0 * t - 1.0); }

/// Daily volatility levels from the HAR(1,5,22) recursion, started at its
/// deterministic fixed point and run through `burn_in` discarded days.
inline std::vector<double> simulate_daily_har(const SimConfig& c, Index days, std::uint64_t attempt = 0) {
    require(days >= 1, ErrorKind::config, "simulate_daily_har: days must be >= 1");
    const double persistence = c.b1 + c.b2 + c.b3;
    require(persistence < 1.0, ErrorKind::config,
            "simulate_daily_har: b1 + b2 + b3 = " + std::to_string(persistence) + " is not stationary");

    const double fixed_point = c.b0 / (1.0 - persistence);
    const Index total = c.burn_in + days;
    std::vector<double> path(static_cast<std::size_t>(22 + total), fixed_point);

    auto rng = make_stream(c.seed, 0, Stream::har_innovation, attempt);
    std::normal_distribution<double> zeta(0.0, 1.0);
    for (std::size_t i = 22; i < path.size(); ++i) {
        double week = 0.0, month = 0.0;
        for (std::size_t s = 1; s <= 22; ++s) {
            if (s <= 5) week += path[i - s];
            month += path[i - s];
        }
        const double shock = c.har_shock_sd > 0.0 ? c.har_shock_sd * zeta(rng) : 0.0;
        path[i] = c.b0 + c.b1 * path[i - 1] + c.b2 * week / 5.0 + c.b3 * month / 22.0 + shock;
    }
    return {path.end() - days, path.end()};
}

/// One day of observed log prices on the grid t_s = s/m, s = 0..m.
///
/// `spot` holds sigma^2 at every grid point (length m+1). Jumps arrive as one
/// Bernoulli(intensity / (252 m)) draw per Euler step.
inline DayPath simulate_day(const Eigen::Ref<const Vector>& spot, const SimConfig& c, double start = 0.0,
                            Index day = 0, std::uint64_t attempt = 0) {
    const Index m = spot.size() - 1;
    require(m >= 1, ErrorKind::config, "simulate_day: need at least two grid points");
    require((spot.array() >= 0.0).all(), ErrorKind::data, "simulate_day: negative spot variance");

    const auto uday = static_cast<std::uint64_t>(day);
    auto brownian = make_stream(c.seed, uday, Stream::brownian, attempt);
    auto arrival = make_stream(c.seed, uday, Stream::jump_arrival, attempt);
    auto jump_size = make_stream(c.seed, uday, Stream::jump_size, attempt);
    auto micro = make_stream(c.seed, uday, Stream::micro_noise, attempt);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);

    const double dt = 1.0 / static_cast<double>(m);
    const double sqrt_dt = std::sqrt(dt);
    const double jump_prob = c.jump_intensity * dt / 252.0;

    DayPath out;
    out.observed.resize(m + 1);
    // Drift is accumulated in closed form so a volatility-free path is exactly
    // start + mu * s / m.
    double sig2_sum = 0.0;
    double martingale = 0.0;
    double z = start;
    for (Index s = 0; s <= m; ++s) {
        if (s > 0) {
            const double sig2 = spot(s - 1);
            sig2_sum += sig2;
            if (sig2 > 0.0) martingale += std::sqrt(sig2) * sqrt_dt * normal(brownian);
            if (jump_prob > 0.0 && unif(arrival) < jump_prob) {
                const double size = c.jump_mean + c.jump_sd * normal(jump_size);
                martingale += size;
                out.jumps.push_back({day, s, size});
            }
            z = start + c.mu * static_cast<double>(s) / static_cast<double>(m) - 0.5 * dt * sig2_sum + martingale;
        }
        out.observed(s) = c.noise_sd > 0.0 ? z + c.noise_sd * normal(micro) : z;
    }
    out.efficient_close = z;
    return out;
}

/// Full synthetic panel of D+1 days (the last one is the forecast target).
inline SimOutput simulate_panel(const SimConfig& c) {
    c.validate();
    const Index days = c.days + 1;
    const Index m = c.m;

    SimOutput out;
    for (int attempt = 0; attempt < c.max_attempts; ++attempt) {
        const auto ua = static_cast<std::uint64_t>(attempt);
        out.daily_sigma = simulate_daily_har(c, days, ua);
        out.true_spot.resize(days, m + 1);
        bool positive = true;
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Index i = 0; i < days && positive; ++i) {
            auto rng = make_stream(c.seed, static_cast<std::uint64_t>(i), Stream::spot_noise, ua);
            const double level = out.daily_sigma[static_cast<std::size_t>(i)] * out.daily_sigma[static_cast<std::size_t>(i)];
            for (Index s = 0; s <= m; ++s) {
                const double t = static_cast<double>(s) / static_cast<double>(m);
                const double base = level * intraday_profile(c, t);
                const double q = std::sqrt(noise_scale_sq(t));
                double v = base + (c.eps_scale > 0.0 ? c.eps_scale * q * normal(rng) : 0.0);
                if (c.positivity == PositivityPolicy::entry) {
                    int tries = 1;
                    while (!(v > 0.0)) {
                        if (c.eps_scale == 0.0 || tries++ >= c.max_attempts)
                            fail(ErrorKind::numerical, "simulate_panel: could not draw a positive spot variance on day " +
                                                           std::to_string(i) + " step " + std::to_string(s));
                        v = base + c.eps_scale * q * normal(rng);
                    }
                } else if (!(v > 0.0)) {
                    positive = false;
                    break;
                }
                out.true_spot(i, s) = v;
            }
        }
        if (!positive) continue;

        out.ticks.resize(days, m + 1);
        out.jumps.clear();
        double start = c.initial_log_price;
        for (Index i = 0; i < days; ++i) {
            const Vector row = out.true_spot.row(i).transpose();
            DayPath day = simulate_day(row, c, start, i, ua);
            out.ticks.row(i) = day.observed.transpose();
            out.jumps.insert(out.jumps.end(), day.jumps.begin(), day.jumps.end());
            start = day.efficient_close;
        }
        out.attempts = attempt + 1;
        return out;
    }
    fail(ErrorKind::numerical, "simulate_panel: no all-positive panel after " + std::to_string(c.max_attempts) +
                                   " attempts");
}

/// Columns of a (days x (m+1)) grid matrix at t = tau/n, tau = 1..n.
inline DenseMatrix sample_on_grid(const DenseMatrix& fine, Index n) {
    const Index m = fine.cols() - 1;
    require(n >= 1 && n <= m, ErrorKind::config, "sample_on_grid: n must lie in [1, m]");
    DenseMatrix out(fine.rows(), n);
    for (Index tau = 1; tau <= n; ++tau) out.col(tau - 1) = fine.col((tau * m) / n);
    return out;
}

} // namespace tipvol
