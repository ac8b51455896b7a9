#pragma once

// CSV and SVG output for convergence reports, trajectories and heat fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "msdde/convergence.hpp"
#include "msdde/errors.hpp"
#include "msdde/model.hpp"
#include "msdde/noise.hpp"
#include "msdde/schemes.hpp"
#include "msdde/spdde.hpp"

namespace msdde {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline constexpr const char* kReportHeader = "scheme,h,mse,slope,intercept,diverged";

inline std::string report_csv(const ConvergenceReport& report) {
    std::ostringstream out;
    out << kReportHeader << '\n';
    for (const auto& s : report.series) {
        for (std::size_t i = 0; i < s.steps.size(); ++i) {
            out << to_string(s.scheme) << ',' << format_double(s.steps[i]) << ',' << format_double(s.mse[i]) << ','
                << format_double(s.slope) << ',' << format_double(s.intercept) << ',' << (s.diverged[i] ? 1 : 0)
                << '\n';
        }
    }
    return out.str();
}

namespace detail {

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    return out;
}

inline void finish_output(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write failed for '" + path + "'");
}

inline std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> parts;
    std::string cur;
    std::istringstream in(line);
    while (std::getline(in, cur, sep)) parts.push_back(cur);
    if (!line.empty() && line.back() == sep) parts.emplace_back();
    return parts;
}

inline double parse_double(const std::string& s, const std::string& context) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size()) throw IoError(context + ": bad number '" + s + "'");
    return v;
}

}  // namespace detail

inline void write_report_csv(const ConvergenceReport& report, const std::string& path) {
    auto out = detail::open_output(path);
    out << report_csv(report);
    detail::finish_output(out, path);
}

/// Inverse of report_csv. Series keep their first-appearance order.
inline ConvergenceReport parse_report_csv(std::istream& in, const std::string& context = "report") {
    std::string line;
    if (!std::getline(in, line) || line != kReportHeader) throw IoError(context + ": missing report header");
    ConvergenceReport report;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        const auto cells = detail::split(line, ',');
        const std::string where = context + ":" + std::to_string(row);
        if (cells.size() != 6) throw IoError(where + ": expected 6 columns");
        const SchemeKind kind = parse_scheme(cells[0]);
        auto it = std::find_if(report.series.begin(), report.series.end(),
                               [&](const SchemeSeries& s) { return s.scheme == kind; });
        if (it == report.series.end()) {
            report.series.push_back({});
            it = std::prev(report.series.end());
            it->scheme = kind;
            it->slope = detail::parse_double(cells[3], where);
            it->intercept = detail::parse_double(cells[4], where);
        }
        it->steps.push_back(detail::parse_double(cells[1], where));
        it->mse.push_back(detail::parse_double(cells[2], where));
        it->diverged.push_back(cells[5] == "1");
    }
    return report;
}

inline ConvergenceReport read_report_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    return parse_report_csv(in, path);
}

namespace detail {

inline constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct LogFrame {
    double x0, x1, y0, y1;
    double width = 640, height = 480, margin = 60;

    double px(double h) const { return margin + (std::log2(h) - x0) / (x1 - x0) * (width - 2 * margin); }
    double py(double e) const { return height - margin - (std::log10(e) - y0) / (y1 - y0) * (height - 2 * margin); }
};

}  // namespace detail

/// Log-log error plot: one polyline per scheme and dashed reference slopes 1/2 and 1.
inline std::string report_svg(const ConvergenceReport& report) {
    double hmin = std::numeric_limits<double>::infinity(), hmax = 0.0;
    double emin = std::numeric_limits<double>::infinity(), emax = 0.0;
    for (const auto& s : report.series) {
        for (std::size_t i = 0; i < s.steps.size(); ++i) {
            if (s.diverged[i] || !(s.mse[i] > 0.0)) continue;
            hmin = std::min(hmin, s.steps[i]);
            hmax = std::max(hmax, s.steps[i]);
            emin = std::min(emin, s.mse[i]);
            emax = std::max(emax, s.mse[i]);
        }
    }
    if (!(hmax > 0.0)) {
        hmin = 0.5;
        hmax = 1.0;
        emin = 0.1;
        emax = 1.0;
    }
    detail::LogFrame fr{std::log2(hmin), std::log2(hmax), std::floor(std::log10(emin)), std::ceil(std::log10(emax))};
    if (fr.x1 <= fr.x0) fr.x1 = fr.x0 + 1;
    if (fr.y1 <= fr.y0) fr.y1 = fr.y0 + 1;

    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fr.width << "\" height=\"" << fr.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << fr.width / 2 << "\" y=\"" << fr.height - 15
        << "\" text-anchor=\"middle\" font-size=\"14\">log2 h</text>\n";
    out << "<text x=\"15\" y=\"" << fr.height / 2 << "\" font-size=\"14\" transform=\"rotate(-90 15 " << fr.height / 2
        << ")\" text-anchor=\"middle\">log10 MSE</text>\n";

    // reference slopes anchored at the largest-h, largest-error corner
    for (double order : {0.5, 1.0}) {
        const double e_hi = emax;
        const double e_lo = emax * std::pow(hmin / hmax, order);
        out << "<line class=\"reference\" data-order=\"" << order << "\" x1=\"" << fr.px(hmax) << "\" y1=\""
            << fr.py(e_hi) << "\" x2=\"" << fr.px(hmin) << "\" y2=\"" << fr.py(e_lo)
            << "\" stroke=\"gray\" stroke-dasharray=\"6,4\"/>\n";
    }
    for (std::size_t k = 0; k < report.series.size(); ++k) {
        const auto& s = report.series[k];
        const char* colour = detail::kPalette[k % detail::kPalette.size()];
        out << "<polyline class=\"series\" data-scheme=\"" << to_string(s.scheme) << "\" fill=\"none\" stroke=\""
            << colour << "\" stroke-width=\"2\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < s.steps.size(); ++i) {
            if (s.diverged[i] || !(s.mse[i] > 0.0)) continue;
            out << (first ? "" : " ") << fr.px(s.steps[i]) << ',' << fr.py(s.mse[i]);
            first = false;
        }
        out << "\"/>\n";
        out << "<text x=\"" << fr.width - fr.margin + 5 << "\" y=\"" << fr.margin + 18.0 * static_cast<double>(k)
            << "\" fill=\"" << colour << "\" font-size=\"12\">" << to_string(s.scheme) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

inline void write_report_svg(const ConvergenceReport& report, const std::string& path) {
    auto out = detail::open_output(path);
    out << report_svg(report);
    detail::finish_output(out, path);
}

/// Header "t,x1..xd"; one row per mesh time including the history segment.
inline void write_trajectory_csv(const Trajectory& y, const std::string& path) {
    auto out = detail::open_output(path);
    out << 't';
    for (std::size_t i = 1; i <= y.dim(); ++i) out << ",x" << i;
    out << '\n';
    const TimeMesh& mesh = y.mesh();
    for (std::ptrdiff_t n = mesh.first(); n <= mesh.last(); ++n) {
        out << format_double(mesh.time(n));
        for (double v : y.at(n)) out << ',' << format_double(v);
        out << '\n';
    }
    detail::finish_output(out, path);
}

/// Heat map of U(t, x) on a blue-white-red scale, at most `max_rows` time rows.
inline std::string field_svg(const Trajectory& traj, const spdde::HeatProblem& hp, std::size_t max_rows = 256) {
    const TimeMesh& mesh = traj.mesh();
    const auto last = static_cast<std::size_t>(mesh.last());
    const std::size_t stride = std::max<std::size_t>(1, (last + max_rows) / std::max<std::size_t>(max_rows, 1));
    std::vector<std::ptrdiff_t> rows;
    for (std::size_t n = 0; n <= last; n += stride) rows.push_back(static_cast<std::ptrdiff_t>(n));

    double scale = 0.0;
    for (auto n : rows) {
        for (double v : spdde::field_row(traj, n)) {
            if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
        }
    }
    if (scale == 0.0) scale = 1.0;

    const double cell_w = 8.0, cell_h = 2.0, margin = 40.0;
    const std::size_t cols = hp.intervals + 1;
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * margin + cell_w * static_cast<double>(cols)
        << "\" height=\"" << 2 * margin + cell_h * static_cast<double>(rows.size()) << "\">\n";
    out << "<text x=\"" << margin << "\" y=\"" << margin / 2 << "\" font-size=\"12\">U(t, x), |U| max "
        << format_double(scale) << "</text>\n";
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto row = spdde::field_row(traj, rows[r]);
        for (std::size_t c = 0; c < cols; ++c) {
            const double v = row[c];
            std::string fill = "#000000";
            if (std::isfinite(v)) {
                const double s = std::clamp(v / scale, -1.0, 1.0);
                const int hi = 255, lo = static_cast<int>(std::lround(255.0 * (1.0 - std::abs(s))));
                char buf[8];
                if (s >= 0) std::snprintf(buf, sizeof buf, "#%02x%02x%02x", hi, lo, lo);
                else std::snprintf(buf, sizeof buf, "#%02x%02x%02x", lo, lo, hi);
                fill = buf;
            }
            out << "<rect x=\"" << margin + cell_w * static_cast<double>(c) << "\" y=\""
                << margin + cell_h * static_cast<double>(r) << "\" width=\"" << cell_w << "\" height=\"" << cell_h
                << "\" fill=\"" << fill << "\"/>\n";
        }
    }
    out << "</svg>\n";
    return out.str();
}

inline void write_field_svg(const Trajectory& traj, const spdde::HeatProblem& hp, const std::string& path,
                            std::size_t max_rows = 256) {
    auto out = detail::open_output(path);
    out << field_svg(traj, hp, max_rows);
    detail::finish_output(out, path);
}

/// Q-Wiener samples W(t, x_i): header "t,<x_0>,...", one row per `stride`-th lattice time.
inline void write_q_wiener_csv(const KLBasis& basis, const WienerLattice& lat, std::span<const double> grid,
                               const std::string& path, std::size_t stride = 1) {
    auto out = detail::open_output(path);
    out << 't';
    for (double x : grid) out << ',' << format_double(x);
    out << '\n';
    stride = std::max<std::size_t>(stride, 1);
    for (std::size_t n = 0; n <= lat.n_samples(); n += stride) {
        const double t = static_cast<double>(n) * lat.h_ref();
        out << format_double(t);
        for (double v : sample_q_wiener(basis, lat, grid, t)) out << ',' << format_double(v);
        out << '\n';
    }
    detail::finish_output(out, path);
}

}  // namespace msdde
