#include "oracles.hpp"
#include "tipvol/simulator.hpp"
#include "tipvol/spot_vol.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace tipvol;

namespace {

// Constant-volatility path plus iid Gaussian noise, built without the library simulator.
Vector brownian_path(Index m, double sigma2, double noise_sd, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Vector y(m + 1);
    double x = 0.0;
    const double step = std::sqrt(sigma2 / static_cast<double>(m));
    for (Index s = 0; s <= m; ++s) {
        if (s > 0) x += step * nd(rng);
        y(s) = x + noise_sd * nd(rng);
    }
    return y;
}

// Direct transcription of the estimator: every pre-averaged return whose start
// time lies in (tau-1)/n < t <= tau/n, with optional truncation, normalized by
// the count of returns falling in the bin.
Vector naive_backward(const Vector& y, Index n, Index k, double threshold, bool truncate) {
    const Index m = y.size() - 1;
    double phi = 0.0;
    for (Index i = 1; i <= k; ++i) phi += std::pow(oracle::g_weight(static_cast<double>(i) / k), 2);
    Vector out(n);
    for (Index tau = 1; tau <= n; ++tau) {
        double sum = 0.0;
        Index count = 0;
        for (Index s = 1; s + k - 1 <= m; ++s) {
            // (tau-1)/n < (s-1)/m <= tau/n in integer arithmetic
            const bool in_bin = (s - 1) * n > (tau - 1) * m && (s - 1) * n <= tau * m;
            if (!in_bin) continue;
            double ybar = 0.0;
            for (Index l = 1; l <= k - 1; ++l) ybar += oracle::g_weight(static_cast<double>(l) / k) * (y(s + l) - y(s + l - 1));
            double yhat = 0.0;
            for (Index l = 1; l <= k && s + l <= m; ++l) {
                const double dg = oracle::g_weight(static_cast<double>(l) / k) - oracle::g_weight(static_cast<double>(l - 1) / k);
                yhat += dg * dg * (y(s + l) - y(s + l - 1)) * (y(s + l) - y(s + l - 1));
            }
            ++count;
            if (truncate && std::abs(ybar) > threshold) continue;
            sum += ybar * ybar - 0.5 * yhat;
        }
        out(tau - 1) = sum * static_cast<double>(m) / (phi * static_cast<double>(count));
    }
    return out;
}

} // namespace

TEST(Weight, ClosedForm) {
    EXPECT_DOUBLE_EQ(weight_g(0.0), 0.0);
    EXPECT_DOUBLE_EQ(weight_g(1.0 / 3.0), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(weight_g(1.0), 0.0);
    EXPECT_DOUBLE_EQ(weight_g(0.25), 0.5);
    EXPECT_THROW(weight_g(1.5), Error);
}

TEST(Weight, PhiApproachesIntegral) {
    const double integral = oracle::simpson([](double x) { return oracle::g_weight(x) * oracle::g_weight(x); }, 0.0, 1.0, 6000);
    EXPECT_NEAR(integral, 4.0 / 27.0, 1e-9);
    for (Index k : {50, 100, 400}) EXPECT_NEAR(phi_k(k) / static_cast<double>(k), integral, 1.0 / static_cast<double>(k * k) * 2.0);
    EXPECT_THROW(phi_k(1), Error);
}

TEST(Bipower, SmallVector) {
    Vector y(4);
    y << 0.0, 1.0, -1.0, 2.0; // increments 1, -2, 3
    EXPECT_NEAR(bipower_variation(y), 0.5 * std::numbers::pi * (1.0 * 2.0 + 2.0 * 3.0), 1e-14);
}

TEST(SpotDay, MatchesNaiveTranscription) {
    const Index m = 600;
    const Vector y = brownian_path(m, 1e-4, 1e-4, 17);
    PreAvgConfig cfg;
    cfg.n = 6;
    for (bool truncate : {false, true}) {
        cfg.truncate = truncate;
        const SpotDay got = estimate_spot_day_detail(y, cfg);
        const Index k = cfg.window_for(m);
        EXPECT_EQ(k, 13);
        const Vector ref = naive_backward(y, cfg.n, k, got.threshold, truncate);
        for (Index tau = 0; tau < cfg.n; ++tau) EXPECT_NEAR(got.raw(tau), ref(tau), 1e-12 * std::abs(ref(tau)) + 1e-18);
    }
}

TEST(SpotDay, ThresholdFormula) {
    const Index m = 2340;
    const Vector y = brownian_path(m, 1e-4, 0.0, 5);
    PreAvgConfig cfg;
    const SpotDay d = estimate_spot_day_detail(y, cfg);
    const double k = static_cast<double>(cfg.window_for(m));
    EXPECT_NEAR(d.threshold, 1.8 * std::sqrt(d.bpv) * std::pow(k / m, 0.47), 1e-15);
}

TEST(SpotDay, CalibratedUnderNoise) {
    const double sigma2 = 0.04 / 252;
    PreAvgConfig cfg;
    double bias = 0.0;
    const int reps = 5;
    for (int r = 0; r < reps; ++r) {
        const Vector c = estimate_spot_day(brownian_path(23400, sigma2, 0.0005, 100 + r), cfg);
        bias += (c.mean() - sigma2) / sigma2;
    }
    EXPECT_LT(std::abs(bias / reps), 0.1);
}

TEST(SpotDay, TruncationRemovesJump) {
    const double sigma2 = 0.04 / 252;
    const Index m = 23400;
    PreAvgConfig with;
    PreAvgConfig without;
    without.truncate = false;
    double err_with = 0.0, err_without = 0.0;
    const int reps = 10;
    // Noise-free paths: with microstructure noise the raw-return BPV inflates
    // the threshold far above a 0.01 jump.
    for (int r = 0; r < reps; ++r) {
        Vector y = brownian_path(m, sigma2, 0.0, 200 + r);
        const Vector clean = estimate_spot_day(y, without);
        y.tail(m / 2).array() += 0.01; // jump in the middle of bin 20
        const Vector a = estimate_spot_day(y, with);
        const Vector b = estimate_spot_day(y, without);
        err_with += std::abs(a(19) - clean(19)) / sigma2;
        err_without += std::abs(b(19) - clean(19)) / sigma2;
    }
    EXPECT_GT(err_without / reps, 10.0);
    EXPECT_LT(err_with / reps, 1.0);
}

TEST(SpotDay, CenteredKernelRuns) {
    PreAvgConfig cfg;
    cfg.kernel_side = KernelSide::centered;
    double mean = 0.0;
    for (int r = 0; r < 5; ++r) {
        const Vector c = estimate_spot_day(brownian_path(23400, 1e-4, 0.0, 3 + r), cfg);
        EXPECT_EQ(c.size(), 39);
        mean += c.mean() / 5.0;
    }
    EXPECT_NEAR(mean / 1e-4, 1.0, 0.1);
}

TEST(SpotDay, FloorApplied) {
    PreAvgConfig cfg;
    cfg.n = 2;
    cfg.floor_eps = 1e-3;
    Vector y = Vector::Zero(101);
    const Vector c = estimate_spot_day(y, cfg);
    EXPECT_EQ(c(0), 1e-3);
    EXPECT_EQ(c(1), 1e-3);
}

TEST(SpotDay, ConfigErrors) {
    PreAvgConfig cfg;
    cfg.n = 39;
    cfg.k_m = 200;
    try {
        estimate_spot_day(Vector::Zero(101), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
    cfg.k_m = 0;
    cfg.trunc_exponent = 0.6;
    EXPECT_THROW(estimate_spot_day(Vector::Zero(2341), cfg), Error);
    // Too few observations per bin for the window: the last bins are empty.
    PreAvgConfig sparse;
    sparse.n = 10;
    sparse.k_m = 30;
    EXPECT_THROW(estimate_spot_day(Vector::Zero(101), sparse), Error);
}

TEST(SpotPanel, ErrorNamesTheDay) {
    DenseMatrix ticks = DenseMatrix::Zero(3, 101);
    ticks(1, 50) = std::nan("");
    PreAvgConfig cfg;
    cfg.n = 4;
    try {
        estimate_panel(ticks, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::data);
        EXPECT_NE(std::string(e.what()).find("day 1"), std::string::npos);
    }
}

TEST(RvSeries, LaggedCovariates) {
    Vector rv(30);
    for (Index i = 0; i < 30; ++i) rv(i) = static_cast<double>(i + 1);
    const RvSeries s = realized_vol_covariates(rv);
    EXPECT_FALSE(s.available[21]);
    EXPECT_TRUE(s.available[22]);
    EXPECT_DOUBLE_EQ(s.daily(22), 22.0);
    EXPECT_DOUBLE_EQ(s.weekly(22), 20.0);
    EXPECT_DOUBLE_EQ(s.monthly(22), 11.5);
    ASSERT_TRUE(s.next_available);
    EXPECT_DOUBLE_EQ(s.next(0), 30.0);
    EXPECT_DOUBLE_EQ(s.next(1), 28.0);
    EXPECT_DOUBLE_EQ(s.next(2), 19.5);
    const DenseMatrix x = s.covariates(22, 30);
    EXPECT_EQ(x.rows(), 8);
    EXPECT_DOUBLE_EQ(x(7, 0), 29.0);
    EXPECT_THROW(s.covariates(21, 30), Error);
}

TEST(RvSeries, RowMeanAndTickSources) {
    DenseMatrix vol(2, 2);
    vol << 1, 3, 2, 6;
    const RvSeries s = realized_vol_covariates(vol);
    EXPECT_DOUBLE_EQ(s.rv(0), 2.0);
    EXPECT_DOUBLE_EQ(s.rv(1), 4.0);
    EXPECT_FALSE(s.next_available);

    DenseMatrix ticks(1, 4);
    ticks << 0.0, 0.1, -0.1, 0.0;
    EXPECT_NEAR(realized_variance_from_ticks(ticks)(0), 0.01 + 0.04 + 0.01, 1e-15);
}

TEST(BinReturns, Endpoints) {
    DenseMatrix ticks(1, 7);
    ticks << 0, 1, 3, 6, 10, 15, 21;
    const DenseMatrix r = bin_returns(ticks, 3);
    EXPECT_DOUBLE_EQ(r(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(r(0, 1), 7.0);
    EXPECT_DOUBLE_EQ(r(0, 2), 11.0);
}
