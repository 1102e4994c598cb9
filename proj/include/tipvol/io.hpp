#pragma once

// Plain-text artifacts: CSV panels, tick ingestion and the model file.

#include "tipvol/error.hpp"
#include "tipvol/matrix.hpp"
#include "tipvol/tip_pca.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tipvol::io {

/// Shortest decimal form that parses back to the same double.
inline std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& where) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0.0;
    const char* first = s.data();
    if (!s.empty() && s.front() == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), x);
    require(res.ec == std::errc{} && res.ptr == s.data() + s.size() && !s.empty(), ErrorKind::data,
            where + ": cannot parse number '" + std::string(s) + "'");
    return x;
}

inline long long parse_integer(std::string_view s, const std::string& where) {
    long long x = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
    require(res.ec == std::errc{} && res.ptr == s.data() + s.size() && !s.empty(), ErrorKind::data,
            where + ": cannot parse integer '" + std::string(s) + "'");
    return x;
}

inline std::vector<std::string_view> split(std::string_view line, char sep = ',') {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::data, "cannot open '" + path + "' for reading");
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::data, "cannot open '" + path + "' for writing");
    return out;
}

// ---------------------------------------------------------------- panels

/// Day x bin matrix with one label per row (header `date,bin_1..bin_n`).
struct LabeledMatrix {
    std::vector<std::string> labels;
    DenseMatrix values;
};

inline void write_vol_matrix(std::ostream& os, const LabeledMatrix& m) {
    require(static_cast<Index>(m.labels.size()) == m.values.rows(), ErrorKind::data,
            "write_vol_matrix: label count does not match rows");
    os << "date";
    for (Index j = 0; j < m.values.cols(); ++j) os << ",bin_" << (j + 1);
    os << '\n';
    for (Index i = 0; i < m.values.rows(); ++i) {
        os << m.labels[static_cast<std::size_t>(i)];
        for (Index j = 0; j < m.values.cols(); ++j) os << ',' << format_double(m.values(i, j));
        os << '\n';
    }
}

inline LabeledMatrix read_vol_matrix(std::istream& is, const std::string& name = "matrix") {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::data, name + ": empty file");
    const auto head = split(trim(line));
    require(head.size() >= 2 && head[0] == "date", ErrorKind::data, name + ": header must start with 'date,bin_1'");
    const Index n = static_cast<Index>(head.size()) - 1;
    for (Index j = 1; j <= n; ++j)
        require(head[static_cast<std::size_t>(j)] == "bin_" + std::to_string(j), ErrorKind::data,
                name + ": header column " + std::to_string(j + 1) + " must be bin_" + std::to_string(j));
    LabeledMatrix out;
    std::vector<double> flat;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto f = split(t);
        const std::string where = name + " row " + std::to_string(row);
        require(static_cast<Index>(f.size()) == n + 1, ErrorKind::data,
                where + ": expected " + std::to_string(n + 1) + " fields, got " + std::to_string(f.size()));
        out.labels.emplace_back(f[0]);
        for (std::size_t j = 1; j < f.size(); ++j) {
            const double v = parse_double(f[j], where);
            require(std::isfinite(v), ErrorKind::data, where + ": non-finite value");
            flat.push_back(v);
        }
    }
    require(!out.labels.empty(), ErrorKind::data, name + ": no data rows");
    out.values = Eigen::Map<DenseMatrix>(flat.data(), static_cast<Index>(out.labels.size()), n);
    return out;
}

inline void write_prediction(std::ostream& os, const Vector& v) {
    os << "bin,predicted_variance\n";
    for (Index j = 0; j < v.size(); ++j) os << (j + 1) << ',' << format_double(v(j)) << '\n';
}

inline Vector read_prediction(std::istream& is, const std::string& name = "prediction") {
    std::string line;
    require(std::getline(is, line) && trim(line) == "bin,predicted_variance", ErrorKind::data,
            name + ": header must be 'bin,predicted_variance'");
    std::vector<double> v;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty()) continue;
        const auto f = split(t);
        const std::string where = name + " row " + std::to_string(row);
        require(f.size() == 2 && parse_integer(f[0], where) == static_cast<long long>(v.size()) + 1, ErrorKind::data,
                where + ": expected 'bin,value' with consecutive bins");
        v.push_back(parse_double(f[1], where));
    }
    return Eigen::Map<Vector>(v.data(), static_cast<Index>(v.size()));
}

// ---------------------------------------------------------------- ticks

struct TickPanel {
    std::vector<std::string> dates;
    DenseMatrix log_prices; // days x (m+1), column s at session_start + s*grid_seconds
    Index grid_seconds = 1;
};

struct IngestOptions {
    Index grid_seconds = 1;
    Index session_seconds = 23400;
    Index session_start = 9 * 3600 + 30 * 60; // 09:30:00
    double min_coverage = 0.95;                // share of the session spanned by a day's ticks
};

struct IngestResult {
    TickPanel panel;
    std::vector<std::string> dropped; // one reason per excluded day
};

inline std::string format_clock(double seconds) {
    const auto whole = static_cast<long long>(std::floor(seconds));
    char buf[32];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", whole / 3600, (whole / 60) % 60, whole % 60);
    return buf;
}

/// Seconds since midnight from HH:MM:SS with optional fractional seconds.
inline double parse_clock(std::string_view s, const std::string& where) {
    const auto f = split(s, ':');
    require(f.size() == 3, ErrorKind::data, where + ": time '" + std::string(s) + "' is not HH:MM:SS");
    const long long h = parse_integer(f[0], where);
    const long long mi = parse_integer(f[1], where);
    const double sec = parse_double(f[2], where);
    require(h >= 0 && h < 24 && mi >= 0 && mi < 60 && sec >= 0.0 && sec < 61.0, ErrorKind::data,
            where + ": time '" + std::string(s) + "' out of range");
    return static_cast<double>(h * 3600 + mi * 60) + sec;
}

namespace detail {

struct RawDay {
    std::string date;
    std::vector<double> times;
    std::vector<double> prices;
    std::size_t first_row = 0;
};

} // namespace detail

/// Reads a `date,time,price` CSV, aligns each day's ticks on the regular
/// session grid by the last-tick rule and takes logs. Grid points before a
/// day's first tick take that tick's price. Days whose ticks span less than
/// `min_coverage` of the session are dropped.
inline IngestResult ingest_ticks(std::istream& is, const IngestOptions& opts = {}, const std::string& name = "ticks") {
    require(opts.grid_seconds >= 1 && opts.session_seconds % opts.grid_seconds == 0, ErrorKind::config,
            "ingest: grid_seconds must divide the session length");
    require(opts.min_coverage >= 0.0 && opts.min_coverage <= 1.0, ErrorKind::config,
            "ingest: min_coverage must lie in [0, 1]");
    std::string line;
    require(std::getline(is, line) && trim(line) == "date,time,price", ErrorKind::data,
            name + ": header must be 'date,time,price'");

    std::vector<detail::RawDay> days;
    std::map<std::string, std::size_t> seen;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        const auto t = trim(line);
        if (t.empty()) continue;
        const std::string where = name + " row " + std::to_string(row);
        const auto f = split(t);
        require(f.size() == 3, ErrorKind::data, where + ": expected 3 fields, got " + std::to_string(f.size()));
        const std::string date(trim(f[0]));
        require(!date.empty(), ErrorKind::data, where + ": empty date");
        const double time = parse_clock(trim(f[1]), where);
        const double price = parse_double(trim(f[2]), where);
        require(std::isfinite(price) && price > 0.0, ErrorKind::data, where + ": price must be positive and finite");
        if (days.empty() || days.back().date != date) {
            require(!seen.count(date), ErrorKind::data, where + ": rows of date " + date + " are not contiguous");
            seen[date] = days.size();
            days.push_back({date, {}, {}, row});
        }
        auto& d = days.back();
        require(d.times.empty() || time >= d.times.back(), ErrorKind::data, where + ": time goes backwards within the day");
        d.times.push_back(time);
        d.prices.push_back(price);
    }
    require(!days.empty(), ErrorKind::data, name + ": no ticks");

    const double start = static_cast<double>(opts.session_start);
    const double end = start + static_cast<double>(opts.session_seconds);
    const Index m = opts.session_seconds / opts.grid_seconds;

    IngestResult out;
    out.panel.grid_seconds = opts.grid_seconds;
    std::vector<Vector> rows;
    for (const auto& d : days) {
        std::size_t lo = 0;
        while (lo < d.times.size() && d.times[lo] < start) ++lo;
        std::size_t hi = lo;
        while (hi < d.times.size() && d.times[hi] <= end) ++hi;
        // the last pre-open tick still carries a price into the session
        const std::size_t first = lo > 0 ? lo - 1 : lo;
        if (hi == lo) {
            fail(ErrorKind::data, name + " row " + std::to_string(d.first_row) + ": date " + d.date +
                                      " has no ticks inside the session");
        }
        const double span_lo = std::max(d.times[first], start);
        const double span_hi = std::min(d.times[hi - 1], end);
        const double coverage = (span_hi - span_lo) / static_cast<double>(opts.session_seconds);
        if (coverage < opts.min_coverage) {
            std::ostringstream why;
            why << d.date << ": ticks cover " << std::fixed << std::setprecision(1) << 100.0 * coverage
                << "% of the session, dropped";
            out.dropped.push_back(why.str());
            continue;
        }
        Vector lp(m + 1);
        std::size_t k = first;
        for (Index s = 0; s <= m; ++s) {
            const double g = start + static_cast<double>(s * opts.grid_seconds);
            while (k + 1 < hi && d.times[k + 1] <= g) ++k;
            lp(s) = std::log(d.prices[k]);
        }
        out.panel.dates.push_back(d.date);
        rows.push_back(std::move(lp));
    }
    require(!rows.empty(), ErrorKind::data, name + ": every day was dropped by the coverage rule");
    out.panel.log_prices.resize(static_cast<Index>(rows.size()), m + 1);
    for (std::size_t i = 0; i < rows.size(); ++i) out.panel.log_prices.row(static_cast<Index>(i)) = rows[i].transpose();
    return out;
}

/// Writes prices exp(Y) on the grid with `date,time,price` rows.
inline void write_ticks(std::ostream& os, const TickPanel& p, Index session_start = 9 * 3600 + 30 * 60) {
    require(static_cast<Index>(p.dates.size()) == p.log_prices.rows(), ErrorKind::data,
            "write_ticks: date count does not match rows");
    os << "date,time,price\n";
    std::vector<std::string> clock(static_cast<std::size_t>(p.log_prices.cols()));
    for (Index s = 0; s < p.log_prices.cols(); ++s)
        clock[static_cast<std::size_t>(s)] = format_clock(static_cast<double>(session_start + s * p.grid_seconds));
    std::string buf;
    for (Index i = 0; i < p.log_prices.rows(); ++i) {
        const std::string& date = p.dates[static_cast<std::size_t>(i)];
        for (Index s = 0; s < p.log_prices.cols(); ++s) {
            buf.clear();
            buf.append(date).push_back(',');
            buf.append(clock[static_cast<std::size_t>(s)]).push_back(',');
            buf.append(format_double(std::exp(p.log_prices(i, s)))).push_back('\n');
            os << buf;
        }
    }
}

/// Labels day_0001, day_0002, ... for synthetic panels.
inline std::vector<std::string> synthetic_dates(Index days) {
    std::vector<std::string> out;
    char buf[32];
    for (Index i = 0; i < days; ++i) {
        std::snprintf(buf, sizeof buf, "day_%04lld", static_cast<long long>(i + 1));
        out.emplace_back(buf);
    }
    return out;
}

// ---------------------------------------------------------------- model

inline constexpr std::string_view model_magic = "tipvol-model";
inline constexpr int model_version = 1;

namespace detail {

inline void write_block(std::ostream& os, const std::string& name, const DenseMatrix& m) {
    os << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) os << (j ? " " : "") << format_double(m(i, j));
        os << '\n';
    }
}

inline void write_spec(std::ostream& os, const std::string& name, const SieveSpec& s) {
    os << name << ' ' << (s.family == SieveFamily::polynomial ? "polynomial" : "table") << ' ' << s.terms << ' '
       << s.covariate_dim << ' ' << (s.intercept ? 1 : 0) << ' ' << (s.standardize ? 1 : 0) << '\n';
}

class ModelReader {
public:
    explicit ModelReader(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {}

    std::vector<std::string> fields(std::string_view key) {
        std::string line;
        require(static_cast<bool>(std::getline(is_, line)), ErrorKind::data,
                where() + ": unexpected end of file, expected '" + std::string(key) + "'");
        ++line_;
        std::istringstream ss(line);
        std::vector<std::string> out;
        for (std::string w; ss >> w;) out.push_back(w);
        require(!out.empty() && out[0] == key, ErrorKind::data, where() + ": expected '" + std::string(key) + "'");
        out.erase(out.begin());
        return out;
    }

    DenseMatrix block(std::string_view name) {
        const auto f = fields("matrix");
        require(f.size() == 3 && f[0] == name, ErrorKind::data, where() + ": expected matrix " + std::string(name));
        const Index r = parse_integer(f[1], where());
        const Index c = parse_integer(f[2], where());
        require(r >= 0 && c >= 0, ErrorKind::data, where() + ": negative dimensions");
        DenseMatrix m(r, c);
        for (Index i = 0; i < r; ++i) {
            std::string line;
            require(static_cast<bool>(std::getline(is_, line)), ErrorKind::data, where() + ": truncated matrix");
            ++line_;
            std::istringstream ss(line);
            Index j = 0;
            for (std::string w; ss >> w; ++j) {
                require(j < c, ErrorKind::data, where() + ": too many values in row");
                m(i, j) = parse_double(w, where());
            }
            require(j == c, ErrorKind::data, where() + ": too few values in row");
        }
        return m;
    }

    SieveSpec spec(std::string_view key) {
        const auto f = fields(key);
        require(f.size() == 5 && (f[0] == "polynomial" || f[0] == "table"), ErrorKind::data, where() + ": bad sieve spec");
        SieveSpec s;
        s.family = f[0] == "polynomial" ? SieveFamily::polynomial : SieveFamily::table;
        s.terms = parse_integer(f[1], where());
        s.covariate_dim = parse_integer(f[2], where());
        s.intercept = f[3] == "1";
        s.standardize = f[4] == "1";
        return s;
    }

    std::string where() const { return name_ + " line " + std::to_string(line_); }

private:
    std::istream& is_;
    std::string name_;
    std::size_t line_ = 0;
};

inline Vector as_vector(const DenseMatrix& m) { return Eigen::Map<const Vector>(m.data(), m.size()); }

} // namespace detail

inline void write_model(std::ostream& os, const TipPcaModel& m) {
    os << model_magic << ' ' << model_version << '\n';
    os << "rank " << m.rank << '\n';
    os << "floor_eps " << format_double(m.floor_eps) << '\n';
    detail::write_spec(os, "left_spec", m.left_spec);
    detail::write_spec(os, "right_spec", m.right_spec);
    os << "signs";
    for (int s : m.signs) os << ' ' << s;
    os << '\n';
    detail::write_block(os, "lambda", m.lambda.transpose());
    detail::write_block(os, "g_hat", m.g_hat);
    detail::write_block(os, "h_hat", m.h_hat);
    detail::write_block(os, "b_hat", m.b_hat);
    detail::write_block(os, "left_mean", m.left_scaler.mean.transpose());
    detail::write_block(os, "left_sd", m.left_scaler.sd.transpose());
    detail::write_block(os, "right_mean", m.right_scaler.mean.transpose());
    detail::write_block(os, "right_sd", m.right_scaler.sd.transpose());
    if (m.next_covariates)
        detail::write_block(os, "next_covariates", m.next_covariates->transpose());
    else
        detail::write_block(os, "next_covariates", DenseMatrix(0, 0));
    os << "end\n";
}

inline TipPcaModel read_model(std::istream& is, const std::string& name = "model") {
    detail::ModelReader r(is, name);
    const auto head = r.fields(model_magic);
    require(head.size() == 1, ErrorKind::data, r.where() + ": missing version");
    require(parse_integer(head[0], r.where()) == model_version, ErrorKind::data,
            r.where() + ": unsupported model version " + head[0]);
    TipPcaModel m;
    {
        const auto f = r.fields("rank");
        require(f.size() == 1, ErrorKind::data, r.where() + ": bad rank");
        m.rank = parse_integer(f[0], r.where());
    }
    {
        const auto f = r.fields("floor_eps");
        require(f.size() == 1, ErrorKind::data, r.where() + ": bad floor_eps");
        m.floor_eps = parse_double(f[0], r.where());
    }
    m.left_spec = r.spec("left_spec");
    m.right_spec = r.spec("right_spec");
    for (const auto& s : r.fields("signs")) {
        const long long v = parse_integer(s, r.where());
        require(v == 1 || v == -1, ErrorKind::data, r.where() + ": signs must be +-1");
        m.signs.push_back(static_cast<int>(v));
    }
    m.lambda = detail::as_vector(r.block("lambda"));
    m.g_hat = r.block("g_hat");
    m.h_hat = r.block("h_hat");
    m.b_hat = r.block("b_hat");
    m.left_scaler.mean = detail::as_vector(r.block("left_mean"));
    m.left_scaler.sd = detail::as_vector(r.block("left_sd"));
    m.right_scaler.mean = detail::as_vector(r.block("right_mean"));
    m.right_scaler.sd = detail::as_vector(r.block("right_sd"));
    const DenseMatrix next = r.block("next_covariates");
    if (next.size() > 0) m.next_covariates = detail::as_vector(next);
    r.fields("end");

    const Index k = m.rank;
    require(k >= 1 && m.lambda.size() == k && static_cast<Index>(m.signs.size()) == k && m.g_hat.cols() == k &&
                m.h_hat.cols() == k && m.b_hat.cols() == k,
            ErrorKind::data, name + ": block dimensions disagree with the rank");
    require(m.left_scaler.mean.size() == m.left_scaler.sd.size() &&
                m.b_hat.rows() == m.left_spec.width(m.left_scaler.mean.size()),
            ErrorKind::data, name + ": left sieve dimensions disagree");
    return m;
}

} // namespace tipvol::io
