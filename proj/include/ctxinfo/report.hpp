#pragma once

// CSV writing and static SVG line charts for sweep results.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ctxinfo/tsv.hpp"

namespace ctxinfo::report {

/// Quotes a CSV field when it holds a comma, quote or newline.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) out << (i ? "," : "") << csv_field(fields[i]);
  out << '\n';
}

/// Minimal CSV reader for files written by write_csv_row.
inline std::vector<std::vector<std::string>> read_csv(const std::vector<std::string>& lines) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& line : lines) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cur += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        row.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    row.push_back(std::move(cur));
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (x, y), drawn in x order
};

namespace detail {

inline std::string fmt(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

inline std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// One polyline per series with axes, ticks and a legend. With log2_x the
/// x axis is spaced by log2(x) and ticks are labelled with x itself.
inline std::string line_chart_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                                  const std::vector<Series>& series, bool log2_x) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  const double W = 640, H = 400, left = 70, right = 160, top = 40, bottom = 50;
  auto tx = [&](double x) { return log2_x ? std::log2(x) : x; };
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  std::vector<double> xticks;
  for (const auto& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(y)) continue;
      xmin = std::min(xmin, tx(x));
      xmax = std::max(xmax, tx(x));
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
      if (std::find(xticks.begin(), xticks.end(), x) == xticks.end()) xticks.push_back(x);
    }
  }
  std::sort(xticks.begin(), xticks.end());
  if (!std::isfinite(xmin)) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  const double pw = W - left - right, ph = H - top - bottom;
  auto px = [&](double x) { return left + (tx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return top + (1.0 - (y - ymin) / (ymax - ymin)) * ph; };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << detail::escape_xml(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph << "\" stroke=\"black\"/>\n";
  for (double x : xticks) {
    o << "<text x=\"" << detail::fmt(px(x), 1) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
      << tsv::format_double(x) << "</text>\n";
  }
  for (int i = 0; i <= 5; ++i) {
    const double y = ymin + (ymax - ymin) * i / 5.0;
    o << "<line x1=\"" << left - 4 << "\" y1=\"" << detail::fmt(py(y), 1) << "\" x2=\"" << left << "\" y2=\""
      << detail::fmt(py(y), 1) << "\" stroke=\"black\"/>\n";
    o << "<text x=\"" << left - 8 << "\" y=\"" << detail::fmt(py(y) + 4, 1) << "\" text-anchor=\"end\">" << detail::fmt(y, 3)
      << "</text>\n";
  }
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << detail::escape_xml(x_label)
    << "</text>\n";
  o << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\">" << detail::escape_xml(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kColors[i % (sizeof(kColors) / sizeof(kColors[0]))];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end());
    std::string path;
    for (const auto& [x, y] : pts) {
      if (!std::isfinite(y)) continue;
      path += (path.empty() ? "" : " ") + detail::fmt(px(x), 1) + "," + detail::fmt(py(y), 1);
      o << "<circle cx=\"" << detail::fmt(px(x), 1) << "\" cy=\"" << detail::fmt(py(y), 1) << "\" r=\"3\" fill=\"" << color
        << "\"/>\n";
    }
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << path << "\"/>\n";
    const double ly = top + 10 + 18.0 * static_cast<double>(i);
    o << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 35 << "\" y2=\"" << ly
      << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    o << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4 << "\">" << detail::escape_xml(series[i].name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ctxinfo::report
