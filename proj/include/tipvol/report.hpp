#pragma once

// Long-format backtest report and the MSPE-by-D table.

#include "tipvol/backtest.hpp"
#include "tipvol/error.hpp"
#include "tipvol/io.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace tipvol::io {

inline constexpr std::string_view report_header = "method,metric,q0,value,p_raw,p_adj";

namespace detail {
inline std::string optional_field(double x) { return std::isnan(x) ? std::string() : format_double(x); }

inline double parse_optional(std::string_view s, const std::string& where) {
    return s.empty() ? std::numeric_limits<double>::quiet_NaN() : parse_double(s, where);
}
} // namespace detail

/// Empty fields stand for "not applicable" (no q0 for loss metrics, no
/// p-value for descriptive rows).
inline void write_report(std::ostream& os, const std::vector<ReportRow>& rows) {
    os << report_header << '\n';
    for (const auto& r : rows)
        os << r.method << ',' << r.metric << ',' << detail::optional_field(r.q0) << ',' << format_double(r.value) << ','
           << detail::optional_field(r.p_raw) << ',' << detail::optional_field(r.p_adj) << '\n';
}

inline std::vector<ReportRow> read_report(std::istream& is, const std::string& name = "report") {
    std::string line;
    require(std::getline(is, line) && trim(line) == report_header, ErrorKind::data,
            name + ": header must be '" + std::string(report_header) + "'");
    std::vector<ReportRow> rows;
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const std::string where = name + " row " + std::to_string(row);
        const auto f = split(trim(line));
        require(f.size() == 6, ErrorKind::data, where + ": expected 6 fields");
        ReportRow r;
        r.method = std::string(f[0]);
        r.metric = std::string(f[1]);
        r.q0 = detail::parse_optional(f[2], where);
        r.value = parse_double(f[3], where);
        r.p_raw = detail::parse_optional(f[4], where);
        r.p_adj = detail::parse_optional(f[5], where);
        rows.push_back(std::move(r));
    }
    return rows;
}

struct MspeByD {
    Index days;
    std::string method;
    double mean;
    double se; // standard error over replications
    Index replications;
};

inline std::vector<MspeByD> summarize_study(const StudyResult& s) {
    std::map<std::pair<Index, std::string>, std::vector<double>> groups;
    for (const auto& r : s.records) groups[{r.days, r.method}].push_back(r.mspe);
    std::vector<MspeByD> out;
    for (const auto& [k, v] : groups) {
        const double mean = mean_of(v);
        double ss = 0.0;
        for (double x : v) ss += (x - mean) * (x - mean);
        const auto cnt = static_cast<double>(v.size());
        const double se = v.size() > 1 ? std::sqrt(ss / (cnt - 1.0) / cnt) : std::numeric_limits<double>::quiet_NaN();
        out.push_back({k.first, k.second, mean, se, static_cast<Index>(v.size())});
    }
    return out;
}

inline void write_mspe_by_d(std::ostream& os, const std::vector<MspeByD>& rows) {
    os << "D,method,mean_mspe,se,replications\n";
    for (const auto& r : rows)
        os << r.days << ',' << r.method << ',' << format_double(r.mean) << ',' << detail::optional_field(r.se) << ','
           << r.replications << '\n';
}

} // namespace tipvol::io
