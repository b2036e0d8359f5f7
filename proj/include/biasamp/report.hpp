#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "biasamp/experiment.hpp"

// CSV tables and SVG line charts with confidence bands. Output is a pure
// function of the summaries: re-emission over identical input is
// byte-identical (fixed formatting, no timestamps).

namespace biasamp {

namespace reportfmt {

inline std::string f6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

inline std::string g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string coord(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

} // namespace reportfmt

namespace detail {

struct AxisScale {
  double lo = 0.0, hi = 1.0;
  double px0 = 0.0, px1 = 1.0;

  double map(double v) const { return px0 + (v - lo) / (hi - lo) * (px1 - px0); }
};

inline AxisScale make_scale(double lo, double hi, double px0, double px1) {
  if (!(hi > lo)) {
    const double pad = lo == 0.0 ? 1.0 : std::fabs(lo) * 0.1;
    lo -= pad;
    hi += pad;
  }
  return AxisScale{lo, hi, px0, px1};
}

inline void svg_header(std::string& out, const std::string& title) {
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" "
         "viewBox=\"0 0 640 400\">\n";
  out += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  out += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"16\">" + title + "</text>\n";
}

inline void svg_axes(std::string& out, const AxisScale& xs, const AxisScale& ys,
                     const std::string& x_label, const std::string& y_label) {
  using reportfmt::coord;
  using reportfmt::g6;
  out += "<line x1=\"" + coord(xs.px0) + "\" y1=\"" + coord(ys.px0) + "\" x2=\"" +
         coord(xs.px1) + "\" y2=\"" + coord(ys.px0) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  out += "<line x1=\"" + coord(xs.px0) + "\" y1=\"" + coord(ys.px0) + "\" x2=\"" +
         coord(xs.px0) + "\" y2=\"" + coord(ys.px1) +
         "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xs.lo + (xs.hi - xs.lo) * i / 4.0;
    const double px = xs.map(fx);
    out += "<line x1=\"" + coord(px) + "\" y1=\"" + coord(ys.px0) + "\" x2=\"" + coord(px) +
           "\" y2=\"" + coord(ys.px0 + 5) + "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + coord(px) + "\" y=\"" + coord(ys.px0 + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + g6(fx) +
           "</text>\n";
    const double fy = ys.lo + (ys.hi - ys.lo) * i / 4.0;
    const double py = ys.map(fy);
    out += "<line x1=\"" + coord(xs.px0 - 5) + "\" y1=\"" + coord(py) + "\" x2=\"" +
           coord(xs.px0) + "\" y2=\"" + coord(py) +
           "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + coord(xs.px0 - 8) + "\" y=\"" + coord(py + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + g6(fy) +
           "</text>\n";
  }
  out += "<text x=\"" + coord((xs.px0 + xs.px1) / 2) + "\" y=\"392\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"13\">" + x_label + "</text>\n";
  out += "<text x=\"16\" y=\"" + coord((ys.px0 + ys.px1) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 16 " + coord((ys.px0 + ys.px1) / 2) + ")\">" + y_label +
         "</text>\n";
}

struct BandSeries {
  std::vector<double> x, mean, lo, hi;
};

inline std::string line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label, const BandSeries& s) {
  using reportfmt::coord;
  double xlo = s.x.front(), xhi = s.x.front();
  double ylo = s.lo.front(), yhi = s.hi.front();
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    xlo = std::min(xlo, s.x[i]);
    xhi = std::max(xhi, s.x[i]);
    ylo = std::min(ylo, s.lo[i]);
    yhi = std::max(yhi, s.hi[i]);
  }
  const AxisScale xs = make_scale(xlo, xhi, 70, 620);
  const AxisScale ys = make_scale(ylo, yhi, 350, 40); // SVG y grows downward

  std::string out;
  svg_header(out, title);
  svg_axes(out, xs, ys, x_label, y_label);
  if (s.x.size() > 1) {
    std::string band = "<polygon fill=\"#9ecae1\" fill-opacity=\"0.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      band += coord(xs.map(s.x[i])) + "," + coord(ys.map(s.hi[i])) + " ";
    }
    for (std::size_t i = s.x.size(); i-- > 0;) {
      band += coord(xs.map(s.x[i])) + "," + coord(ys.map(s.lo[i]));
      if (i != 0) band += " ";
    }
    band += "\"/>\n";
    out += band;
    std::string line = "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      line += coord(xs.map(s.x[i])) + "," + coord(ys.map(s.mean[i]));
      if (i + 1 != s.x.size()) line += " ";
    }
    line += "\"/>\n";
    out += line;
  }
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    out += "<circle cx=\"" + coord(xs.map(s.x[i])) + "\" cy=\"" + coord(ys.map(s.mean[i])) +
           "\" r=\"3\" fill=\"#1f77b4\"/>\n";
    if (s.x.size() == 1) {
      out += "<line x1=\"" + coord(xs.map(s.x[i])) + "\" y1=\"" + coord(ys.map(s.lo[i])) +
             "\" x2=\"" + coord(xs.map(s.x[i])) + "\" y2=\"" + coord(ys.map(s.hi[i])) +
             "\" stroke=\"#1f77b4\" stroke-width=\"1\"/>\n";
    }
  }
  out += "</svg>\n";
  return out;
}

inline std::string scatter_svg(const std::string& title, const std::string& x_label,
                               const std::string& y_label, const std::vector<double>& xv,
                               const std::vector<double>& yv) {
  using reportfmt::coord;
  double xlo = xv.front(), xhi = xv.front(), ylo = yv.front(), yhi = yv.front();
  for (std::size_t i = 0; i < xv.size(); ++i) {
    xlo = std::min(xlo, xv[i]);
    xhi = std::max(xhi, xv[i]);
    ylo = std::min(ylo, yv[i]);
    yhi = std::max(yhi, yv[i]);
  }
  const AxisScale xs = make_scale(xlo, xhi, 70, 620);
  const AxisScale ys = make_scale(ylo, yhi, 350, 40);
  std::string out;
  svg_header(out, title);
  svg_axes(out, xs, ys, x_label, y_label);
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out += "<circle cx=\"" + coord(xs.map(xv[i])) + "\" cy=\"" + coord(ys.map(yv[i])) +
           "\" r=\"4\" fill=\"#d62728\" fill-opacity=\"0.8\"/>\n";
  }
  out += "</svg>\n";
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << content;
  if (!out) throw FormatError("failed writing " + path.string());
}

} // namespace detail

inline const std::vector<std::string>& report_metric_order() {
  static const std::vector<std::string> order{
      "bias_amp", "acc", "ece", "acc_pos_a", "acc_neg_a", "acc_pos_b", "acc_neg_b"};
  return order;
}

// summary.csv plus one banded SVG per headline metric and an
// ece-vs-bias_amp scatter. Optional per-axis-value trajectory tables.
inline void emit_report(
    const std::string& out_dir, const std::string& sweep_name,
    const std::string& axis_label, const std::vector<PointSummary>& points,
    const std::vector<std::pair<double, std::vector<TrajectoryPoint>>>& trajectories = {}) {
  if (points.empty()) {
    throw ConfigError("emit_report: no summary points");
  }
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(out_dir) / sweep_name;
  fs::create_directories(dir);

  using reportfmt::f6;
  std::string csv = "axis,metric,mean,ci_low,ci_high,n\n";
  for (const auto& point : points) {
    for (const auto& metric : report_metric_order()) {
      const auto it = point.metrics.find(metric);
      if (it == point.metrics.end()) continue;
      const IntervalSummary& s = it->second;
      csv += f6(point.axis_value) + "," + metric + "," + f6(s.mean) + ",";
      if (s.half_width) {
        csv += f6(s.low()) + "," + f6(s.high());
      } else {
        csv += ",";
      }
      csv += "," + std::to_string(s.n) + "\n";
    }
  }
  detail::write_text(dir / "summary.csv", csv);

  for (const std::string metric : {"bias_amp", "acc", "ece"}) {
    detail::BandSeries series;
    for (const auto& point : points) {
      const auto it = point.metrics.find(metric);
      if (it == point.metrics.end()) continue;
      series.x.push_back(point.axis_value);
      series.mean.push_back(it->second.mean);
      series.lo.push_back(it->second.low());
      series.hi.push_back(it->second.high());
    }
    if (series.x.empty()) continue;
    detail::write_text(dir / (metric + ".svg"),
                       detail::line_chart_svg(sweep_name + ": " + metric + " vs " + axis_label,
                                              axis_label, metric, series));
  }

  {
    std::vector<double> xv, yv;
    for (const auto& point : points) {
      const auto ei = point.metrics.find("ece");
      const auto bi = point.metrics.find("bias_amp");
      if (ei == point.metrics.end() || bi == point.metrics.end()) continue;
      xv.push_back(ei->second.mean);
      yv.push_back(bi->second.mean);
    }
    if (!xv.empty()) {
      detail::write_text(dir / "ece_vs_bias_amp.svg",
                         detail::scatter_svg(sweep_name + ": bias_amp vs ece", "ece",
                                             "bias_amp", xv, yv));
    }
  }

  for (const auto& [axis_value, traj] : trajectories) {
    const std::string tag = reportfmt::g6(axis_value);
    std::string tcsv = "epoch,metric,mean,ci_low,ci_high,n\n";
    for (const auto& point : traj) {
      for (const auto& metric : report_metric_order()) {
        const auto it = point.metrics.find(metric);
        if (it == point.metrics.end()) continue;
        const IntervalSummary& s = it->second;
        tcsv += std::to_string(point.epoch) + "," + metric + "," + f6(s.mean) + ",";
        if (s.half_width) {
          tcsv += f6(s.low()) + "," + f6(s.high());
        } else {
          tcsv += ",";
        }
        tcsv += "," + std::to_string(s.n) + "\n";
      }
    }
    detail::write_text(dir / ("trajectory_" + tag + ".csv"), tcsv);
    for (const std::string metric : {"bias_amp", "acc", "ece"}) {
      detail::BandSeries series;
      for (const auto& point : traj) {
        const auto it = point.metrics.find(metric);
        if (it == point.metrics.end()) continue;
        series.x.push_back(point.epoch);
        series.mean.push_back(it->second.mean);
        series.lo.push_back(it->second.low());
        series.hi.push_back(it->second.high());
      }
      if (series.x.empty()) continue;
      detail::write_text(dir / ("trajectory_" + tag + "_" + metric + ".svg"),
                         detail::line_chart_svg(sweep_name + " (" + axis_label + "=" + tag +
                                                    "): " + metric + " by epoch",
                                                "epoch", metric, series));
    }
  }
}

} // namespace biasamp
