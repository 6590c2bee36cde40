#pragma once

// Output files: CSV tables headed by the canonical config, plus an SVG line
// chart of paired risk differences. Files are written to a temporary name
// and renamed, so a failed run leaves no partial file.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "shrinkpred/config.hpp"
#include "shrinkpred/errors.hpp"
#include "shrinkpred/parse.hpp"
#include "shrinkpred/risk.hpp"

namespace shrinkpred {

inline constexpr const char* kRiskCsvColumns =
    "model,prior_f,prior_h,theta,N,risk_f,risk_h,diff,stderr,verdict,flags";

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

/// Coordinates joined by ';'.
inline std::string format_theta(const ParamPoint& p) {
  std::string out;
  for (int i = 0; i < p.dim(); ++i) {
    out += (i ? ";" : "") + format_number(p[i]);
  }
  return out;
}

/// Commas and newlines would break the flat schema.
inline std::string csv_safe(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw ConfigError("cannot write output file '" + path.string() + "'");
    }
    out << content;
    out.flush();
    if (!out) {
      throw ConfigError("failed writing output file '" + path.string() + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw ConfigError("cannot move output into place at '" + path.string() + "'");
  }
}

/// CSV text for a comparison report. Rows keep the report order, which is
/// grid-major then N.
inline std::string risk_csv(const ComparisonReport& report, const std::string& header = {}) {
  std::ostringstream out;
  out << header << kRiskCsvColumns << "\n";
  for (const auto& row : report.rows) {
    const bool ok = row.verdict != Verdict::error;
    std::vector<std::string> flags;
    for (const auto& f : row.flags) {
      flags.push_back(csv_safe(f));
    }
    out << report.model << ',' << report.prior_f << ',' << report.prior_h << ','
        << format_theta(row.theta) << ',' << row.n << ','
        << (ok ? format_number(row.risk.risk_f.mean) : "nan") << ','
        << (ok ? format_number(row.risk.risk_h.mean) : "nan") << ','
        << (ok ? format_number(row.risk.difference.mean) : "nan") << ','
        << (ok ? format_number(row.risk.difference.std_error) : "nan") << ',' << to_string(row.verdict)
        << ',' << text::join(flags, "|") << "\n";
  }
  return out.str();
}

/// Line chart of the paired difference against N, one series per theta,
/// with +-1 standard error bars.
inline std::string risk_svg(const ComparisonReport& report) {
  constexpr double width = 720.0;
  constexpr double height = 440.0;
  constexpr double left = 80.0;
  constexpr double right = 200.0;
  constexpr double top = 40.0;
  constexpr double bottom = 60.0;
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

  std::vector<std::string> labels;
  std::vector<std::vector<const ComparisonRow*>> series;
  double n_min = std::numeric_limits<double>::infinity();
  double n_max = -n_min;
  double y_min = 0.0;
  double y_max = 0.0;
  for (const auto& row : report.rows) {
    const std::string label = format_theta(row.theta);
    auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) {
      labels.push_back(label);
      series.emplace_back();
      it = labels.end() - 1;
    }
    if (row.verdict == Verdict::error) {
      continue;
    }
    series[static_cast<std::size_t>(it - labels.begin())].push_back(&row);
    const double n = static_cast<double>(row.n);
    n_min = std::min(n_min, n);
    n_max = std::max(n_max, n);
    const auto& d = row.risk.difference;
    y_min = std::min(y_min, d.mean - d.std_error);
    y_max = std::max(y_max, d.mean + d.std_error);
  }
  if (!std::isfinite(n_min)) {
    n_min = 1.0;
    n_max = 2.0;
  }
  const bool log_x = n_min > 0.0 && n_max / n_min >= 10.0;
  auto xval = [&](double n) { return log_x ? std::log10(n) : n; };
  double x_lo = xval(n_min);
  double x_hi = xval(n_max);
  if (x_hi - x_lo < 1e-12) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_max - y_min < 1e-300) {
    y_max = y_min + 1.0;
  }
  const double pad = 0.05 * (y_max - y_min);
  y_min -= pad;
  y_max += pad;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto px = [&](double n) { return left + (xval(n) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };
  auto f2 = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f2(width) << "\" height=\"" << f2(height)
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << f2(left) << "\" y=\"24\" font-size=\"14\">risk difference "
      << report.prior_h << " - " << report.prior_f << " (" << report.model << ")</text>\n";
  out << "<rect x=\"" << f2(left) << "\" y=\"" << f2(top) << "\" width=\"" << f2(plot_w) << "\" height=\""
      << f2(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
  if (y_min < 0.0 && y_max > 0.0) {
    out << "<line x1=\"" << f2(left) << "\" y1=\"" << f2(py(0.0)) << "\" x2=\"" << f2(left + plot_w)
        << "\" y2=\"" << f2(py(0.0)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  std::vector<std::size_t> ticks;
  for (const auto& row : report.rows) {
    if (std::find(ticks.begin(), ticks.end(), row.n) == ticks.end()) {
      ticks.push_back(row.n);
    }
  }
  for (auto n : ticks) {
    const double x = px(static_cast<double>(n));
    out << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(top + plot_h) << "\" x2=\"" << f2(x) << "\" y2=\""
        << f2(top + plot_h + 5) << "\" stroke=\"black\"/>\n";
    out << "<text x=\"" << f2(x) << "\" y=\"" << f2(top + plot_h + 18) << "\" text-anchor=\"middle\">" << n
        << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double y = y_min + (y_max - y_min) * k / 4.0;
    out << "<text x=\"" << f2(left - 6) << "\" y=\"" << f2(py(y) + 4) << "\" text-anchor=\"end\">"
        << format_number(std::round(y * 1e6) / 1e6) << "</text>\n";
  }
  out << "<text x=\"" << f2(left + plot_w / 2) << "\" y=\"" << f2(height - 16)
      << "\" text-anchor=\"middle\">N" << (log_x ? " (log scale)" : "") << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = palette[s % (sizeof palette / sizeof *palette)];
    std::string points;
    for (const auto* row : series[s]) {
      const double x = px(static_cast<double>(row->n));
      const auto& d = row->risk.difference;
      points += (points.empty() ? "" : " ") + f2(x) + "," + f2(py(d.mean));
      out << "<line x1=\"" << f2(x) << "\" y1=\"" << f2(py(d.mean - d.std_error)) << "\" x2=\"" << f2(x)
          << "\" y2=\"" << f2(py(d.mean + d.std_error)) << "\" stroke=\"" << color << "\"/>\n";
      out << "<circle cx=\"" << f2(x) << "\" cy=\"" << f2(py(d.mean)) << "\" r=\"3\" fill=\"" << color
          << "\"/>\n";
    }
    if (!points.empty()) {
      out << "<polyline points=\"" << points << "\" fill=\"none\" stroke=\"" << color << "\"/>\n";
    }
    const double ly = top + 14.0 + 18.0 * static_cast<double>(s);
    out << "<line x1=\"" << f2(width - right + 14) << "\" y1=\"" << f2(ly - 4) << "\" x2=\""
        << f2(width - right + 34) << "\" y2=\"" << f2(ly - 4) << "\" stroke=\"" << color << "\"/>\n";
    out << "<text x=\"" << f2(width - right + 40) << "\" y=\"" << f2(ly) << "\">theta=" << labels[s]
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace shrinkpred
