#pragma once

// Rolling-origin out-of-sample comparison of all forecasters, and the
// repeated-simulation MSPE study.

#include "tipvol/baselines.hpp"
#include "tipvol/error.hpp"
#include "tipvol/evaluation.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/rng.hpp"
#include "tipvol/simulator.hpp"
#include "tipvol/spot_vol.hpp"
#include "tipvol/tip_pca.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace tipvol {

struct ForecastSettings {
    TipPcaOptions tip;
    Index pc_rank = 0; // 0: singular-value ratio selection
    double floor_eps = 1e-12;
};

/// One-day-ahead forecast of `id` from `extended`: up to 22 history rows
/// (used only for lagged covariates) followed by the in-sample rows.
/// `daily_rv`, aligned with `extended`, replaces the row-mean RV when given.
inline ForecastVector forecast_method(const std::string& id, const DenseMatrix& extended, Index history_rows,
                                      const ForecastSettings& s, const Vector* daily_rv = nullptr) {
    const DenseMatrix sample = extended.bottomRows(extended.rows() - history_rows);
    const double eps = s.floor_eps;
    auto rv_series = [&] { return daily_rv ? realized_vol_covariates(*daily_rv) : realized_vol_covariates(extended); };
    if (id == method::tip_pca) {
        TipPcaOptions opts = s.tip;
        opts.floor_eps = eps;
        const TipPcaModel model = fit_panel(extended, opts, history_rows, daily_rv);
        Prediction p = predict_panel_next(model);
        ForecastVector f = finish(method::tip_pca, p.values, eps, p.warnings);
        return f;
    }
    if (id == method::tip_pca_s) {
        const TipPcaSForecast f = tip_pca_s(extended, rv_series(), eps, history_rows);
        return finish(method::tip_pca_s, f.values, eps);
    }
    if (id == method::ave) return ave_forecast(sample, eps);
    if (id == method::ar1) return ar1_forecast(sample, eps);
    if (id == method::har) return har_forecast(extended, {}, eps);
    if (id == method::har_d) return har_d_forecast(extended, rv_series(), eps);
    if (id == method::pc) {
        Index r = s.pc_rank;
        if (r == 0) {
            const Vector sv = singular_values(sample);
            r = select_rank(sv, std::min<Index>(default_r_max(sample.rows(), sample.cols()), sv.size() - 1));
        }
        return pc_forecast(sample, r, eps);
    }
    fail(ErrorKind::config, "unknown method '" + id + "'");
}

enum class BhFamily { per_metric, all };

struct BacktestOptions {
    Index window = 63;
    std::vector<std::string> methods = all_methods();
    std::vector<double> q0s{0.01, 0.02, 0.05, 0.1, 0.2};
    Index dq_lags = 4;
    BhFamily family = BhFamily::per_metric;
    VarPool pool = VarPool::pooled;
    ForecastSettings forecast;
    bool use_history = true; // lagged covariates may reach up to 22 days before the window
    std::string reference = std::string(method::tip_pca);
};

struct ReportRow {
    std::string method;
    std::string metric;
    double q0 = std::numeric_limits<double>::quiet_NaN();
    double value = 0.0;
    double p_raw = std::numeric_limits<double>::quiet_NaN();
    double p_adj = std::numeric_limits<double>::quiet_NaN();
};

struct MethodFailure {
    Index origin;
    std::string method;
    std::string message;
};

struct MethodTrack {
    std::vector<Index> origins;         // successful forecast origins
    std::vector<Vector> forecasts;
    std::vector<double> mspe_losses;    // (origin, bin) order
    std::vector<double> qlike_losses;
    std::map<double, std::vector<int>> hits;
    std::map<double, std::vector<double>> var;
};

struct BacktestReport {
    Index window = 0;
    Index origins = 0;
    Index bins = 0;
    std::vector<std::string> methods;
    std::map<std::string, MethodTrack> tracks;
    std::vector<ReportRow> rows;
    std::vector<MethodFailure> failures;

    const ReportRow* find(const std::string& method, const std::string& metric,
                          std::optional<double> q0 = std::nullopt) const {
        for (const auto& r : rows)
            if (r.method == method && r.metric == metric && (!q0 || r.q0 == *q0)) return &r;
        return nullptr;
    }
};

namespace detail {

inline void adjust_families(std::vector<ReportRow>& rows, BhFamily family) {
    std::map<std::pair<std::string, double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (std::isnan(rows[i].p_raw)) continue;
        const double q = std::isnan(rows[i].q0) ? -1.0 : rows[i].q0;
        const auto key = family == BhFamily::all ? std::make_pair(std::string{}, 0.0) : std::make_pair(rows[i].metric, q);
        groups[key].push_back(i);
    }
    for (const auto& [key, idx] : groups) {
        std::vector<double> p;
        for (std::size_t i : idx) p.push_back(rows[i].p_raw);
        const auto adj = bh_adjust(p);
        for (std::size_t k = 0; k < idx.size(); ++k) rows[idx[k]].p_adj = adj[k];
    }
}

// Losses of `a` and `b` over the origins both forecast successfully.
inline std::pair<std::vector<double>, std::vector<double>> aligned_losses(const MethodTrack& a, const MethodTrack& b,
                                                                          Index bins, bool use_qlike) {
    std::vector<double> la, lb;
    const auto& sa = use_qlike ? a.qlike_losses : a.mspe_losses;
    const auto& sb = use_qlike ? b.qlike_losses : b.mspe_losses;
    std::size_t ib = 0;
    for (std::size_t ia = 0; ia < a.origins.size(); ++ia) {
        while (ib < b.origins.size() && b.origins[ib] < a.origins[ia]) ++ib;
        if (ib == b.origins.size() || b.origins[ib] != a.origins[ia]) continue;
        for (Index j = 0; j < bins; ++j) {
            la.push_back(sa[ia * static_cast<std::size_t>(bins) + static_cast<std::size_t>(j)]);
            lb.push_back(sb[ib * static_cast<std::size_t>(bins) + static_cast<std::size_t>(j)]);
        }
    }
    return {la, lb};
}

} // namespace detail

/// Rolling one-day-ahead backtest.
///
/// Origins run over days window..D-1; each method is fitted on the trailing
/// `window` days, its forecast scored against `actual` (the spot estimates by
/// default) and turned into per-bin VaR from in-sample standardized returns.
/// A method that throws at an origin is skipped there and logged.
inline BacktestReport rolling_backtest(const DenseMatrix& vol, const DenseMatrix& returns, const BacktestOptions& opts,
                                       const DenseMatrix* actual = nullptr, const Vector* daily_rv = nullptr) {
    const Index total = vol.rows();
    const Index n = vol.cols();
    require(opts.window >= 1 && total >= opts.window + 1, ErrorKind::data,
            "rolling_backtest: need more than window = " + std::to_string(opts.window) + " days, got " +
                std::to_string(total));
    require(returns.rows() == total && returns.cols() == n, ErrorKind::data,
            "rolling_backtest: returns do not match the spot-variance panel");
    if (actual)
        require(actual->rows() == total && actual->cols() == n, ErrorKind::data,
                "rolling_backtest: target matrix does not match the panel");
    if (daily_rv) require(daily_rv->size() == total, ErrorKind::data, "rolling_backtest: RV series length mismatch");
    const DenseMatrix& target = actual ? *actual : vol;

    BacktestReport rep;
    rep.window = opts.window;
    rep.origins = total - opts.window;
    rep.bins = n;
    rep.methods = opts.methods;

    for (Index o = opts.window; o < total; ++o) {
        const Index start = o - opts.window;
        const Index hist = opts.use_history ? std::min<Index>(start, RvSeries::history) : 0;
        const DenseMatrix extended = vol.middleRows(start - hist, opts.window + hist);
        const std::optional<Vector> rv_slice =
            daily_rv ? std::optional<Vector>(daily_rv->segment(start - hist, opts.window + hist)) : std::nullopt;
        const DenseMatrix in_vol = vol.middleRows(start, opts.window);
        const DenseMatrix in_ret = returns.middleRows(start, opts.window);
        for (const auto& id : opts.methods) {
            MethodTrack& tr = rep.tracks[id];
            try {
                const ForecastVector f = forecast_method(id, extended, hist, opts.forecast, rv_slice ? &*rv_slice : nullptr);
                std::vector<VarRow> vars;
                for (double q0 : opts.q0s) vars.push_back(var_forecast(f.values, in_ret, in_vol, q0, opts.pool));
                tr.origins.push_back(o);
                tr.forecasts.push_back(f.values);
                for (Index j = 0; j < n; ++j) {
                    const double p = f.values(j);
                    const double a = target(o, j);
                    tr.mspe_losses.push_back((p - a) * (p - a));
                    tr.qlike_losses.push_back(std::log(p) + a / p);
                }
                for (std::size_t q = 0; q < opts.q0s.size(); ++q)
                    for (Index j = 0; j < n; ++j) {
                        const double v = vars[q].var(j);
                        tr.var[opts.q0s[q]].push_back(v);
                        tr.hits[opts.q0s[q]].push_back(returns(o, j) < -v ? 1 : 0);
                    }
            } catch (const Error& e) {
                rep.failures.push_back({o, id, e.what()});
            }
        }
    }

    const MethodTrack* ref = rep.tracks.count(opts.reference) ? &rep.tracks.at(opts.reference) : nullptr;
    for (const auto& id : opts.methods) {
        const MethodTrack& tr = rep.tracks[id];
        const double coverage = static_cast<double>(tr.origins.size()) / static_cast<double>(rep.origins);
        rep.rows.push_back({id, "coverage", std::numeric_limits<double>::quiet_NaN(), coverage});
        if (tr.origins.empty()) continue;
        rep.rows.push_back({id, "mspe", std::numeric_limits<double>::quiet_NaN(), mean_of(tr.mspe_losses)});
        rep.rows.push_back({id, "qlike", std::numeric_limits<double>::quiet_NaN(), mean_of(tr.qlike_losses)});

        if (ref && id != opts.reference) {
            for (bool use_qlike : {false, true}) {
                auto [la, lb] = detail::aligned_losses(tr, *ref, n, use_qlike);
                if (la.size() < 30) continue;
                const DmResult dm = dm_test(la, lb);
                const std::string base = use_qlike ? "dm_qlike" : "dm_mspe";
                const double nan = std::numeric_limits<double>::quiet_NaN();
                rep.rows.push_back({id, base, nan, dm.statistic, dm.p_one_sided});
                rep.rows.push_back({id, base + "_two_sided", nan, dm.statistic, dm.p_two_sided});
            }
        }

        for (double q0 : opts.q0s) {
            const auto& hits = tr.hits.at(q0);
            const auto& var = tr.var.at(q0);
            Index x = 0;
            for (int h : hits) x += h;
            const auto t = static_cast<Index>(hits.size());
            rep.rows.push_back({id, "var_hit_rate", q0, static_cast<double>(x) / static_cast<double>(t)});
            const TestResult uc = lruc_test(x, t, q0);
            rep.rows.push_back({id, "lruc", q0, uc.statistic, uc.p_value});
            const LrccResult cc = lrcc_test(hits, q0);
            rep.rows.push_back({id, "lrcc", q0, cc.cc.statistic, cc.cc.p_value});
            if (t > opts.dq_lags + 2) {
                const TestResult dq = dq_test(hits, var, q0, opts.dq_lags);
                rep.rows.push_back({id, "dq", q0, dq.statistic, dq.p_value});
            }
        }
    }
    detail::adjust_families(rep.rows, opts.family);
    return rep;
}

struct StudyOptions {
    std::vector<Index> d_values{50};
    Index replications = 100;
    std::vector<std::string> methods = all_methods();
    ForecastSettings forecast;
    unsigned threads = 0; // 0: hardware concurrency
};

struct StudyRecord {
    Index replication;
    Index days;
    std::string method;
    double mspe;
};

struct StudyResult {
    std::vector<StudyRecord> records;
    std::vector<MethodFailure> failures; // origin field holds the replication index

    /// Mean MSPE per (D, method) over replications.
    std::map<std::pair<Index, std::string>, double> average() const {
        std::map<std::pair<Index, std::string>, std::pair<double, Index>> acc;
        for (const auto& r : records) {
            auto& a = acc[{r.days, r.method}];
            a.first += r.mspe;
            ++a.second;
        }
        std::map<std::pair<Index, std::string>, double> out;
        for (const auto& [k, v] : acc) out[k] = v.first / static_cast<double>(v.second);
        return out;
    }
};

/// Repeated simulation: each replication simulates max(D) + 22 history days
/// plus a target day, estimates the spot panel, and scores every method's
/// forecast of the target day's true spot variances at tau/n using the last D
/// days as the sample.
inline StudyResult simulation_study(const SimConfig& base, const PreAvgConfig& spot, const StudyOptions& opts) {
    require(!opts.d_values.empty() && opts.replications >= 1, ErrorKind::config, "simulation_study: nothing to run");
    const Index max_d = *std::max_element(opts.d_values.begin(), opts.d_values.end());
    const Index hist = RvSeries::history;

    std::vector<std::vector<StudyRecord>> per_rep(static_cast<std::size_t>(opts.replications));
    std::vector<std::vector<MethodFailure>> per_rep_fail(static_cast<std::size_t>(opts.replications));
    std::vector<std::string> errors(static_cast<std::size_t>(opts.replications));

    auto run = [&](Index rep) {
        const auto slot = static_cast<std::size_t>(rep);
        try {
            SimConfig cfg = base;
            cfg.days = max_d + hist;
            cfg.seed = splitmix64(base.seed ^ splitmix64(static_cast<std::uint64_t>(rep) + 1));
            const SimOutput sim = simulate_panel(cfg);
            const Index total = sim.ticks.rows(); // max_d + hist + 1
            const DenseMatrix vol = estimate_panel(sim.ticks.topRows(total - 1), spot);
            const Vector target = sample_on_grid(sim.true_spot.bottomRows(1), spot.n).row(0).transpose();
            for (Index d : opts.d_values) {
                const DenseMatrix extended = vol.bottomRows(d + hist);
                for (const auto& id : opts.methods) {
                    try {
                        const ForecastVector f = forecast_method(id, extended, hist, opts.forecast);
                        per_rep[slot].push_back({rep, d, id, (f.values - target).squaredNorm() / static_cast<double>(spot.n)});
                    } catch (const Error& e) {
                        per_rep_fail[slot].push_back({rep, id, e.what()});
                    }
                }
            }
        } catch (const std::exception& e) {
            errors[slot] = e.what();
        }
    };

    unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<Index>(threads, opts.replications));
    if (threads <= 1) {
        for (Index r = 0; r < opts.replications; ++r) run(r);
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (Index r = t; r < opts.replications; r += threads) run(r);
            });
        for (auto& th : pool) th.join();
    }

    StudyResult out;
    for (std::size_t r = 0; r < per_rep.size(); ++r) {
        if (!errors[r].empty()) fail(ErrorKind::numerical, "simulation_study: replication " + std::to_string(r) + ": " + errors[r]);
        out.records.insert(out.records.end(), per_rep[r].begin(), per_rep[r].end());
        out.failures.insert(out.failures.end(), per_rep_fail[r].begin(), per_rep_fail[r].end());
    }
    return out;
}

} // namespace tipvol
