#pragma once

// Flat key=value run configuration. Keys are namespaced by module
// (sim.*, spot.*, tippca.*, eval.*, ingest.*) plus `seed` and `output_dir`.
// Unknown keys are rejected; absent keys keep their defaults.

#include "tipvol/backtest.hpp"
#include "tipvol/error.hpp"
#include "tipvol/io.hpp"
#include "tipvol/simulator.hpp"
#include "tipvol/spot_vol.hpp"
#include "tipvol/tip_pca.hpp"

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

namespace tipvol {

enum class RvSource { spot_mean, squared_returns };

struct RunConfig {
    SimConfig sim;
    PreAvgConfig spot;
    RvSource rv_source = RvSource::spot_mean;
    BacktestOptions eval;
    StudyOptions study;
    io::IngestOptions ingest;
    std::string output_dir = ".";

    std::uint64_t seed() const { return sim.seed; }
};

namespace detail {

struct KeyHandler {
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

inline std::string where_key(const std::string& key) { return "config key '" + key + "'"; }

inline double to_double(const std::string& key, const std::string& v) {
    try {
        return io::parse_double(v, where_key(key));
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
}

inline long long to_integer(const std::string& key, const std::string& v) {
    try {
        return io::parse_integer(v, where_key(key));
    } catch (const Error& e) {
        throw Error(ErrorKind::config, e.what());
    }
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(ErrorKind::config, where_key(key) + ": expected true or false, got '" + v + "'");
}

inline std::vector<std::string> to_list(const std::string& v) {
    std::vector<std::string> out;
    for (auto f : io::split(v))
        if (const auto t = io::trim(f); !t.empty()) out.emplace_back(t);
    return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i) out += ',';
        if constexpr (std::is_same_v<T, std::string>)
            out += xs[i];
        else if constexpr (std::is_floating_point_v<T>)
            out += io::format_double(xs[i]);
        else
            out += std::to_string(xs[i]);
    }
    return out;
}

template <class Member>
KeyHandler real(Member member) {
    return {[member](RunConfig& c, const std::string& v) { std::invoke(member, c) = to_double("", v); },
            [member](const RunConfig& c) { return io::format_double(std::invoke(member, const_cast<RunConfig&>(c))); }};
}

template <class Member>
KeyHandler integer(Member member) {
    return {[member](RunConfig& c, const std::string& v) {
                std::invoke(member, c) = static_cast<std::remove_reference_t<decltype(std::invoke(member, c))>>(to_integer("", v));
            },
            [member](const RunConfig& c) { return std::to_string(std::invoke(member, const_cast<RunConfig&>(c))); }};
}

template <class Member>
KeyHandler boolean(Member member) {
    return {[member](RunConfig& c, const std::string& v) { std::invoke(member, c) = to_bool("", v); },
            [member](const RunConfig& c) { return std::string(std::invoke(member, const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <class E>
KeyHandler choice(std::function<E&(RunConfig&)> ref, std::vector<std::pair<std::string, E>> options) {
    return {[ref, options](RunConfig& c, const std::string& v) {
                for (const auto& [name, val] : options)
                    if (name == v) {
                        ref(c) = val;
                        return;
                    }
                std::string allowed;
                for (const auto& o : options) allowed += (allowed.empty() ? "" : "|") + o.first;
                fail(ErrorKind::config, "expected one of " + allowed + ", got '" + v + "'");
            },
            [ref, options](const RunConfig& c) {
                const E val = ref(const_cast<RunConfig&>(c));
                for (const auto& [name, e] : options)
                    if (e == val) return name;
                return std::string("?");
            }};
}

// clang-format off
inline const std::map<std::string, KeyHandler>& key_table() {
    static const std::map<std::string, KeyHandler> table = [] {
        std::map<std::string, KeyHandler> t;
        t["seed"] = {[](RunConfig& c, const std::string& v) {
                         const long long s = to_integer("seed", v);
                         require(s >= 0, ErrorKind::config, "seed must be non-negative");
                         c.sim.seed = static_cast<std::uint64_t>(s);
                     },
                     [](const RunConfig& c) { return std::to_string(c.sim.seed); }};
        t["output_dir"] = {[](RunConfig& c, const std::string& v) { c.output_dir = v; },
                           [](const RunConfig& c) { return c.output_dir; }};

        t["sim.days"] = integer([](RunConfig& c) -> auto& { return c.sim.days; });
        t["sim.m"] = integer([](RunConfig& c) -> auto& { return c.sim.m; });
        t["sim.mu"] = real([](RunConfig& c) -> auto& { return c.sim.mu; });
        t["sim.gamma0"] = real([](RunConfig& c) -> auto& { return c.sim.gamma0; });
        t["sim.gamma1"] = real([](RunConfig& c) -> auto& { return c.sim.gamma1; });
        t["sim.b0"] = real([](RunConfig& c) -> auto& { return c.sim.b0; });
        t["sim.b1"] = real([](RunConfig& c) -> auto& { return c.sim.b1; });
        t["sim.b2"] = real([](RunConfig& c) -> auto& { return c.sim.b2; });
        t["sim.b3"] = real([](RunConfig& c) -> auto& { return c.sim.b3; });
        t["sim.har_shock_sd"] = real([](RunConfig& c) -> auto& { return c.sim.har_shock_sd; });
        t["sim.noise_sd"] = real([](RunConfig& c) -> auto& { return c.sim.noise_sd; });
        t["sim.jump_mean"] = real([](RunConfig& c) -> auto& { return c.sim.jump_mean; });
        t["sim.jump_sd"] = real([](RunConfig& c) -> auto& { return c.sim.jump_sd; });
        t["sim.jump_intensity"] = real([](RunConfig& c) -> auto& { return c.sim.jump_intensity; });
        t["sim.eps_scale"] = real([](RunConfig& c) -> auto& { return c.sim.eps_scale; });
        t["sim.burn_in"] = integer([](RunConfig& c) -> auto& { return c.sim.burn_in; });
        t["sim.initial_log_price"] = real([](RunConfig& c) -> auto& { return c.sim.initial_log_price; });
        t["sim.max_attempts"] = integer([](RunConfig& c) -> auto& { return c.sim.max_attempts; });
        t["sim.positivity"] = choice<PositivityPolicy>([](RunConfig& c) -> auto& { return c.sim.positivity; },
                                                       {{"entry", PositivityPolicy::entry}, {"panel", PositivityPolicy::panel}});

        t["spot.n"] = integer([](RunConfig& c) -> auto& { return c.spot.n; });
        t["spot.k_m"] = integer([](RunConfig& c) -> auto& { return c.spot.k_m; });
        t["spot.trunc_scale"] = real([](RunConfig& c) -> auto& { return c.spot.trunc_scale; });
        t["spot.trunc_exponent"] = real([](RunConfig& c) -> auto& { return c.spot.trunc_exponent; });
        t["spot.floor_eps"] = real([](RunConfig& c) -> auto& { return c.spot.floor_eps; });
        t["spot.truncate"] = boolean([](RunConfig& c) -> auto& { return c.spot.truncate; });
        t["spot.kernel_side"] = choice<KernelSide>([](RunConfig& c) -> auto& { return c.spot.kernel_side; },
                                                   {{"backward", KernelSide::backward}, {"centered", KernelSide::centered}});
        t["spot.rv_source"] = choice<RvSource>([](RunConfig& c) -> auto& { return c.rv_source; },
                                               {{"spot_mean", RvSource::spot_mean}, {"squared_returns", RvSource::squared_returns}});

        t["tippca.rank"] = integer([](RunConfig& c) -> auto& { return c.eval.forecast.tip.rank; });
        t["tippca.r_max"] = integer([](RunConfig& c) -> auto& { return c.eval.forecast.tip.r_max; });
        t["tippca.j1"] = integer([](RunConfig& c) -> auto& { return c.eval.forecast.tip.j1; });
        t["tippca.j2"] = integer([](RunConfig& c) -> auto& { return c.eval.forecast.tip.j2; });
        t["tippca.standardize"] = boolean([](RunConfig& c) -> auto& { return c.eval.forecast.tip.standardize; });
        t["tippca.floor_eps"] = real([](RunConfig& c) -> auto& { return c.eval.forecast.floor_eps; });
        t["tippca.rank_mode"] = choice<RankMode>([](RunConfig& c) -> auto& { return c.eval.forecast.tip.rank_mode; },
                                                 {{"ratio", RankMode::ratio}, {"gap", RankMode::gap}});

        t["eval.window"] = integer([](RunConfig& c) -> auto& { return c.eval.window; });
        t["eval.dq_lags"] = integer([](RunConfig& c) -> auto& { return c.eval.dq_lags; });
        t["eval.pc_rank"] = integer([](RunConfig& c) -> auto& { return c.eval.forecast.pc_rank; });
        t["eval.use_history"] = boolean([](RunConfig& c) -> auto& { return c.eval.use_history; });
        t["eval.reference"] = {[](RunConfig& c, const std::string& v) { c.eval.reference = v; },
                               [](const RunConfig& c) { return c.eval.reference; }};
        t["eval.methods"] = {[](RunConfig& c, const std::string& v) { c.eval.methods = to_list(v); },
                             [](const RunConfig& c) { return join(c.eval.methods); }};
        t["eval.q0"] = {[](RunConfig& c, const std::string& v) {
                            c.eval.q0s.clear();
                            for (const auto& s : to_list(v)) c.eval.q0s.push_back(to_double("eval.q0", s));
                        },
                        [](const RunConfig& c) { return join(c.eval.q0s); }};
        t["eval.bh_family"] = choice<BhFamily>([](RunConfig& c) -> auto& { return c.eval.family; },
                                               {{"per_metric", BhFamily::per_metric}, {"all", BhFamily::all}});
        t["eval.var_pool"] = choice<VarPool>([](RunConfig& c) -> auto& { return c.eval.pool; },
                                             {{"pooled", VarPool::pooled}, {"per_bin", VarPool::per_bin}});
        t["eval.d_values"] = {[](RunConfig& c, const std::string& v) {
                                  c.study.d_values.clear();
                                  for (const auto& s : to_list(v)) c.study.d_values.push_back(to_integer("eval.d_values", s));
                              },
                              [](const RunConfig& c) { return join(c.study.d_values); }};
        t["eval.replications"] = integer([](RunConfig& c) -> auto& { return c.study.replications; });
        t["eval.threads"] = integer([](RunConfig& c) -> auto& { return c.study.threads; });

        t["ingest.grid_seconds"] = integer([](RunConfig& c) -> auto& { return c.ingest.grid_seconds; });
        t["ingest.session_seconds"] = integer([](RunConfig& c) -> auto& { return c.ingest.session_seconds; });
        t["ingest.session_start"] = {[](RunConfig& c, const std::string& v) {
                                         try {
                                             c.ingest.session_start = static_cast<Index>(io::parse_clock(v, "ingest.session_start"));
                                         } catch (const Error& e) {
                                             throw Error(ErrorKind::config, e.what());
                                         }
                                     },
                                     [](const RunConfig& c) { return io::format_clock(static_cast<double>(c.ingest.session_start)); }};
        t["ingest.min_coverage"] = real([](RunConfig& c) -> auto& { return c.ingest.min_coverage; });
        return t;
    }();
    return table;
}
// clang-format on

} // namespace detail

inline void set_key(RunConfig& c, const std::string& key, const std::string& value) {
    const auto& table = detail::key_table();
    const auto it = table.find(key);
    require(it != table.end(), ErrorKind::config, "unknown config key '" + key + "'");
    try {
        it->second.set(c, value);
    } catch (const Error& e) {
        throw Error(ErrorKind::config, detail::where_key(key) + ": " + e.what());
    }
}

/// Applies `key=value`; whitespace around both sides is ignored.
inline void apply_assignment(RunConfig& c, const std::string& text, const std::string& where) {
    const auto eq = text.find('=');
    require(eq != std::string::npos, ErrorKind::config, where + ": expected key=value, got '" + text + "'");
    const std::string key(io::trim(std::string_view(text).substr(0, eq)));
    const std::string value(io::trim(std::string_view(text).substr(eq + 1)));
    require(!key.empty(), ErrorKind::config, where + ": empty key");
    set_key(c, key, value);
}

/// Reads a config file: one key=value per line, `#` starts a comment.
inline void load_config(RunConfig& c, std::istream& is, const std::string& name = "config") {
    std::string line;
    std::size_t row = 0;
    while (std::getline(is, line)) {
        ++row;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (io::trim(line).empty()) continue;
        apply_assignment(c, line, name + " line " + std::to_string(row));
    }
}

/// Every key with its current value, in key order.
inline std::vector<std::pair<std::string, std::string>> effective_config(const RunConfig& c) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& [k, h] : detail::key_table()) out.emplace_back(k, h.get(c));
    return out;
}

inline void validate(const RunConfig& c) {
    c.sim.validate();
    require(c.eval.window >= 2, ErrorKind::config, "eval.window must be >= 2");
    require(!c.eval.methods.empty(), ErrorKind::config, "eval.methods is empty");
    for (const auto& m : c.eval.methods) {
        bool known = false;
        for (const auto& id : all_methods()) known = known || id == m;
        require(known, ErrorKind::config,
                "eval.methods: '" + m + "' is not a runnable method (sarima and xgboost are reserved identifiers)");
    }
    for (double q : c.eval.q0s) require(q > 0.0 && q < 1.0, ErrorKind::config, "eval.q0 values must lie in (0, 1)");
    require(c.eval.dq_lags >= 0, ErrorKind::config, "eval.dq_lags must be >= 0");
    require(c.study.replications >= 1, ErrorKind::config, "eval.replications must be >= 1");
    for (Index d : c.study.d_values) require(d >= 2, ErrorKind::config, "eval.d_values entries must be >= 2");
    require(c.eval.forecast.tip.j1 >= 1 && c.eval.forecast.tip.j2 >= 1, ErrorKind::config, "tippca.j1 and j2 must be >= 1");
    require(c.eval.forecast.floor_eps > 0.0, ErrorKind::config, "tippca.floor_eps must be positive");
}

} // namespace tipvol
