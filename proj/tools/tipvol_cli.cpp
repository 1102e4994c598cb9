// tipvol: simulate, estimate, fit, predict and backtest intraday spot
// volatility forecasts from the command line.

#include "tipvol/tipvol.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace tipvol;

namespace {

enum Exit : int { ok = 0, config_error = 2, data_error = 3, numerical_error = 4 };

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out_dir;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config_path, "key=value config file");
    sub->add_option("--set", c.sets, "override one config key (key=value), repeatable")->allow_extra_args(false);
    sub->add_option("-o,--out", c.out_dir, "output directory (overrides output_dir)");
}

RunConfig resolve(const Common& c) {
    RunConfig cfg;
    if (!c.config_path.empty()) {
        std::ifstream in(c.config_path);
        require(static_cast<bool>(in), ErrorKind::config, "cannot open config file '" + c.config_path + "'");
        load_config(cfg, in, c.config_path);
    }
    for (const auto& s : c.sets) apply_assignment(cfg, s, "--set");
    if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
    validate(cfg);
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    require(!ec, ErrorKind::data, "cannot create output directory '" + cfg.output_dir + "': " + ec.message());
    return cfg;
}

std::string out_path(const RunConfig& cfg, const std::string& file) { return (fs::path(cfg.output_dir) / file).string(); }

void write_effective_config(const RunConfig& cfg) {
    auto os = io::open_out(out_path(cfg, "config_used.txt"));
    // output_dir is left out so reruns into different directories compare equal.
    for (const auto& [k, v] : effective_config(cfg))
        if (k != "output_dir") os << k << '=' << v << '\n';
}

void log_line(const std::string& msg) { std::cerr << "tipvol: " << msg << '\n'; }

Index tick_grid_seconds(const RunConfig& cfg) {
    require(cfg.ingest.session_seconds % cfg.sim.m == 0, ErrorKind::config,
            "simulate: sim.m = " + std::to_string(cfg.sim.m) + " does not divide ingest.session_seconds = " +
                std::to_string(cfg.ingest.session_seconds));
    return cfg.ingest.session_seconds / cfg.sim.m;
}

io::TickPanel load_ticks(const RunConfig& cfg, const std::string& path) {
    auto in = io::open_in(path);
    io::IngestResult res = io::ingest_ticks(in, cfg.ingest, path);
    for (const auto& d : res.dropped) log_line(d);
    return std::move(res.panel);
}

std::optional<Vector> daily_rv(const RunConfig& cfg, const io::TickPanel* ticks) {
    if (cfg.rv_source == RvSource::spot_mean) return std::nullopt;
    require(ticks != nullptr, ErrorKind::config, "spot.rv_source=squared_returns needs tick data");
    return realized_variance_from_ticks(ticks->log_prices);
}

// ------------------------------------------------------------ subcommands

int run_simulate(const Common& c) {
    const RunConfig cfg = resolve(c);
    const Index grid = tick_grid_seconds(cfg);
    const SimOutput sim = simulate_panel(cfg.sim);
    const auto dates = io::synthetic_dates(sim.ticks.rows());

    io::TickPanel panel{dates, sim.ticks, grid};
    {
        auto os = io::open_out(out_path(cfg, "ticks.csv"));
        io::write_ticks(os, panel, cfg.ingest.session_start);
    }
    {
        auto os = io::open_out(out_path(cfg, "true_spot.csv"));
        io::write_vol_matrix(os, {dates, sample_on_grid(sim.true_spot, cfg.spot.n)});
    }
    {
        auto os = io::open_out(out_path(cfg, "daily_sigma.csv"));
        os << "date,sigma\n";
        for (std::size_t i = 0; i < dates.size(); ++i) os << dates[i] << ',' << io::format_double(sim.daily_sigma[i]) << '\n';
    }
    {
        auto os = io::open_out(out_path(cfg, "jumps.csv"));
        os << "date,step,size\n";
        for (const auto& j : sim.jumps)
            os << dates[static_cast<std::size_t>(j.day)] << ',' << j.step << ',' << io::format_double(j.size) << '\n';
    }
    write_effective_config(cfg);
    log_line("simulated " + std::to_string(sim.ticks.rows()) + " days x " + std::to_string(cfg.sim.m) + " steps, " +
             std::to_string(sim.jumps.size()) + " jumps");
    return ok;
}

int run_estimate(const Common& c, const std::string& ticks_path) {
    const RunConfig cfg = resolve(c);
    const io::TickPanel panel = load_ticks(cfg, ticks_path);
    const DenseMatrix vol = estimate_panel(panel.log_prices, cfg.spot);
    auto os = io::open_out(out_path(cfg, "vol.csv"));
    io::write_vol_matrix(os, {panel.dates, vol});
    log_line("estimated " + std::to_string(vol.rows()) + " x " + std::to_string(vol.cols()) + " spot-variance matrix");
    return ok;
}

int run_fit(const Common& c, const std::string& vol_path, const std::string& ticks_path) {
    const RunConfig cfg = resolve(c);
    auto in = io::open_in(vol_path);
    const io::LabeledMatrix vol = io::read_vol_matrix(in, vol_path);
    std::optional<io::TickPanel> ticks;
    if (!ticks_path.empty()) ticks = load_ticks(cfg, ticks_path);
    const auto rv = daily_rv(cfg, ticks ? &*ticks : nullptr);
    if (rv)
        require(rv->size() == vol.values.rows(), ErrorKind::data, "fit: tick days do not match the volatility matrix rows");

    TipPcaOptions tip = cfg.eval.forecast.tip;
    tip.floor_eps = cfg.eval.forecast.floor_eps;
    const TipPcaModel model = fit_panel(vol.values, tip, 0, rv ? &*rv : nullptr);
    auto os = io::open_out(out_path(cfg, "model.txt"));
    io::write_model(os, model);
    log_line("fitted rank " + std::to_string(model.rank) + " on " + std::to_string(model.g_hat.rows()) + " days");
    return ok;
}

int run_predict(const Common& c, const std::string& model_path) {
    const RunConfig cfg = resolve(c);
    auto in = io::open_in(model_path);
    const TipPcaModel model = io::read_model(in, model_path);
    const Prediction p = predict_panel_next(model);
    for (const auto& w : p.warnings) log_line("warning: " + w);
    auto os = io::open_out(out_path(cfg, "prediction.csv"));
    io::write_prediction(os, p.values);
    return ok;
}

nlohmann::ordered_json number(double x) { return std::isnan(x) ? nlohmann::ordered_json() : nlohmann::ordered_json(x); }

int run_backtest(const Common& c, const std::string& ticks_path) {
    const RunConfig cfg = resolve(c);
    io::TickPanel panel;
    std::string source;
    if (ticks_path.empty()) {
        const SimOutput sim = simulate_panel(cfg.sim);
        panel = {io::synthetic_dates(sim.ticks.rows()), sim.ticks, tick_grid_seconds(cfg)};
        source = "simulated";
    } else {
        panel = load_ticks(cfg, ticks_path);
        source = ticks_path;
    }
    const DenseMatrix vol = estimate_panel(panel.log_prices, cfg.spot);
    const DenseMatrix returns = bin_returns(panel.log_prices, cfg.spot.n);
    const auto rv = daily_rv(cfg, &panel);
    const BacktestReport rep = rolling_backtest(vol, returns, cfg.eval, nullptr, rv ? &*rv : nullptr);

    {
        auto os = io::open_out(out_path(cfg, "vol.csv"));
        io::write_vol_matrix(os, {panel.dates, vol});
    }
    {
        auto os = io::open_out(out_path(cfg, "report.csv"));
        io::write_report(os, rep.rows);
    }
    {
        auto os = io::open_out(out_path(cfg, "forecasts.csv"));
        os << "method,date,bin,forecast,actual\n";
        for (const auto& id : rep.methods) {
            const MethodTrack& tr = rep.tracks.at(id);
            for (std::size_t k = 0; k < tr.origins.size(); ++k) {
                const Index o = tr.origins[k];
                for (Index j = 0; j < vol.cols(); ++j)
                    os << id << ',' << panel.dates[static_cast<std::size_t>(o)] << ',' << (j + 1) << ','
                       << io::format_double(tr.forecasts[k](j)) << ',' << io::format_double(vol(o, j)) << '\n';
            }
        }
    }

    nlohmann::ordered_json js;
    js["source"] = source;
    js["days"] = vol.rows();
    js["bins"] = vol.cols();
    js["window"] = rep.window;
    js["origins"] = rep.origins;
    js["reference"] = cfg.eval.reference;
    js["seed"] = cfg.sim.seed;
    auto& methods = js["methods"];
    for (const auto& id : rep.methods) {
        nlohmann::ordered_json m;
        for (const char* metric : {"coverage", "mspe", "qlike"}) {
            const ReportRow* r = rep.find(id, metric);
            m[metric] = r ? number(r->value) : nlohmann::ordered_json();
        }
        for (const char* metric : {"dm_mspe", "dm_qlike"}) {
            if (const ReportRow* r = rep.find(id, metric))
                m[metric] = {{"statistic", number(r->value)}, {"p_raw", number(r->p_raw)}, {"p_adj", number(r->p_adj)}};
        }
        auto& var = m["var"];
        for (double q0 : cfg.eval.q0s) {
            nlohmann::ordered_json v;
            v["q0"] = q0;
            for (const char* metric : {"var_hit_rate", "lruc", "lrcc", "dq"}) {
                if (const ReportRow* r = rep.find(id, metric, q0)) {
                    if (std::string(metric) == "var_hit_rate")
                        v[metric] = number(r->value);
                    else
                        v[metric] = {{"statistic", number(r->value)}, {"p_raw", number(r->p_raw)}, {"p_adj", number(r->p_adj)}};
                }
            }
            var.push_back(v);
        }
        methods[id] = m;
    }
    auto& failures = js["failures"];
    failures = nlohmann::ordered_json::array();
    for (const auto& f : rep.failures)
        failures.push_back({{"date", panel.dates[static_cast<std::size_t>(f.origin)]}, {"method", f.method}, {"message", f.message}});
    {
        auto os = io::open_out(out_path(cfg, "report.json"));
        os << js.dump(2) << '\n';
    }
    write_effective_config(cfg);
    for (const auto& f : rep.failures) log_line("origin " + panel.dates[static_cast<std::size_t>(f.origin)] + " " + f.method + ": " + f.message);
    log_line("backtest over " + std::to_string(rep.origins) + " origins, " + std::to_string(rep.failures.size()) +
             " method failures");
    return ok;
}

int run_simstudy(const Common& c) {
    const RunConfig cfg = resolve(c);
    StudyOptions opts = cfg.study;
    opts.methods = cfg.eval.methods;
    opts.forecast = cfg.eval.forecast;
    const StudyResult res = simulation_study(cfg.sim, cfg.spot, opts);
    {
        auto os = io::open_out(out_path(cfg, "mspe_by_D.csv"));
        io::write_mspe_by_d(os, io::summarize_study(res));
    }
    {
        auto os = io::open_out(out_path(cfg, "mspe_replications.csv"));
        os << "replication,D,method,mspe\n";
        for (const auto& r : res.records) os << r.replication << ',' << r.days << ',' << r.method << ',' << io::format_double(r.mspe) << '\n';
    }
    write_effective_config(cfg);
    for (const auto& f : res.failures) log_line("replication " + std::to_string(f.origin) + " " + f.method + ": " + f.message);
    return ok;
}

int exit_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::config: return config_error;
    case ErrorKind::data: return data_error;
    case ErrorKind::numerical: return numerical_error;
    }
    return numerical_error;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Intraday spot-volatility estimation and TIP-PCA forecasting"};
    app.require_subcommand(1);

    Common common;
    std::string ticks_path, vol_path, model_path;

    auto* sim = app.add_subcommand("simulate", "simulate a tick panel with its true spot variances");
    add_common(sim, common);

    auto* est = app.add_subcommand("estimate-spot", "estimate the day x bin spot-variance matrix from ticks");
    add_common(est, common);
    est->add_option("--ticks", ticks_path, "tick CSV (date,time,price)")->required();

    auto* fit = app.add_subcommand("fit", "fit TIP-PCA on a spot-variance matrix");
    add_common(fit, common);
    fit->add_option("--vol", vol_path, "spot-variance CSV (date,bin_1..bin_n)")->required();
    fit->add_option("--ticks", ticks_path, "tick CSV, needed when spot.rv_source=squared_returns");

    auto* pred = app.add_subcommand("predict", "predict the next day's spot variances from a model file");
    add_common(pred, common);
    pred->add_option("--model", model_path, "model file written by fit")->required();

    auto* bt = app.add_subcommand("backtest", "rolling out-of-sample comparison of all methods");
    add_common(bt, common);
    bt->add_option("--ticks", ticks_path, "tick CSV; simulated from sim.* when omitted");

    auto* study = app.add_subcommand("simstudy", "repeated simulation MSPE against the true spot, per D");
    add_common(study, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return config_error;
    }

    try {
        if (sim->parsed()) return run_simulate(common);
        if (est->parsed()) return run_estimate(common, ticks_path);
        if (fit->parsed()) return run_fit(common, vol_path, ticks_path);
        if (pred->parsed()) return run_predict(common, model_path);
        if (bt->parsed()) return run_backtest(common, ticks_path);
        if (study->parsed()) return run_simstudy(common);
    } catch (const Error& e) {
        std::cerr << "tipvol: error: " << e.what() << '\n';
        return exit_for(e.kind());
    } catch (const std::bad_alloc&) {
        std::cerr << "tipvol: error: out of memory\n";
        return numerical_error;
    }
    return config_error;
}
