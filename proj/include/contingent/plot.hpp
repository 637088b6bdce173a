#pragma once

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "contingent/env.hpp"
#include "contingent/errors.hpp"
#include "contingent/trajectory.hpp"

namespace contingent {

struct PlotPath {
  std::string label;  // picks the color: "optimal", "pihat_2", "contingency_3", "random"
  std::vector<std::array<double, 2>> pts;
};

struct PlotMarker {  // teleport landings (backtracks)
  double x = 0, y = 0;
};

namespace plotdetail {

// Matplotlib's default cycle: familiar, high-contrast, print-safe.
inline constexpr std::array<const char*, 6> kPalette = {
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};

inline const char* color_for(const std::string& label) {
  if (label == "random") return "#8e44ad";
  if (label == "optimal" || label == "reset") return kPalette[0];
  // trailing _<k> means library position k (1-based)
  const std::size_t us = label.rfind('_');
  if (us != std::string::npos) {
    std::size_t k = 0;
    bool digits = us + 1 < label.size();
    for (std::size_t i = us + 1; i < label.size(); ++i) {
      if (label[i] < '0' || label[i] > '9') {
        digits = false;
        break;
      }
      k = k * 10 + static_cast<std::size_t>(label[i] - '0');
    }
    if (digits && k >= 1) return kPalette[(k - 1) % kPalette.size()];
  }
  return kPalette[fnv1a64(label.data(), label.size()) % kPalette.size()];
}

inline void svg_xy(double x, double y, char* buf, std::size_t n) {
  std::snprintf(buf, n, "%.2f,%.2f", 1000.0 * x, 1000.0 * (1.0 - y));
}

inline void rect(std::string& out, const Rect& r, const char* fill) {
  const double x0 = r.x0 < 0.0 ? 0.0 : r.x0, x1 = r.x1 > 1.0 ? 1.0 : r.x1;
  const double y0 = r.y0 < 0.0 ? 0.0 : r.y0, y1 = r.y1 > 1.0 ? 1.0 : r.y1;
  char buf[160];
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%.2f\" y=\"%.2f\" width=\"%.2f\" height=\"%.2f\" fill=\"%s\"/>\n",
                1000.0 * x0, 1000.0 * (1.0 - y1), 1000.0 * (x1 - x0), 1000.0 * (y1 - y0),
                fill);
  out += buf;
}

}  // namespace plotdetail

// Static vector image of the maze plus path bundles. Byte-stable for
// identical inputs: fixed formatting, input order preserved.
inline std::string render_svg(const WorldGeometry& g, const std::vector<PlotPath>& paths,
                              const std::vector<PlotMarker>& markers = {}) {
  std::string out =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 1000 1000\" "
      "width=\"640\" height=\"640\">\n";
  out += "<rect width=\"1000\" height=\"1000\" fill=\"#fafaf7\"/>\n";
  for (const Rect& w : g.walls) plotdetail::rect(out, w, "#3d3d46");
  for (int c = 0; c < 3; ++c)
    if (g.blockade_active[c]) plotdetail::rect(out, g.blockade_slots[c], "#c0392b");

  char buf[256];
  std::snprintf(buf, sizeof buf,
                "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"%.2f\" fill=\"#27ae60\" "
                "fill-opacity=\"0.85\"/>\n",
                1000.0 * g.goal_x, 1000.0 * (1.0 - g.goal_y), 1000.0 * g.goal_r);
  out += buf;
  std::snprintf(buf, sizeof buf,
                "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"6\" fill=\"#18181c\"/>\n",
                1000.0 * g.start_x, 1000.0 * (1.0 - g.start_y));
  out += buf;

  for (const PlotPath& p : paths) {
    if (p.pts.size() < 2) continue;
    out += "<polyline fill=\"none\" stroke=\"";
    out += plotdetail::color_for(p.label);
    out += "\" stroke-width=\"2.5\" stroke-opacity=\"0.55\" stroke-linejoin=\"round\" "
           "stroke-linecap=\"round\" points=\"";
    char xy[48];
    for (std::size_t i = 0; i < p.pts.size(); ++i) {
      plotdetail::svg_xy(p.pts[i][0], p.pts[i][1], xy, sizeof xy);
      if (i) out += ' ';
      out += xy;
    }
    out += "\"/>\n";
  }
  for (const PlotMarker& m : markers) {
    std::snprintf(buf, sizeof buf,
                  "<rect x=\"%.2f\" y=\"%.2f\" width=\"9\" height=\"9\" fill=\"#555555\"/>\n",
                  1000.0 * m.x - 4.5, 1000.0 * (1.0 - m.y) - 4.5);
    out += buf;
  }
  out += "</svg>\n";
  return out;
}

// One polyline per episode, colored by the rows' controller tag.
inline std::vector<PlotPath> paths_from_trajectory(const TrajectoryFile& tf) {
  std::vector<PlotPath> paths;
  for (const TrajectoryRow& r : tf.rows) {
    if (r.controller == "reset") {
      paths.push_back({tf.policy_id, {{r.x, r.y}}});
      continue;
    }
    if (paths.empty()) throw IoError("trajectory row before any reset row");
    paths.back().pts.push_back({r.x, r.y});
    paths.back().label = r.controller;
  }
  return paths;
}

// Recovery traces split into one path per controller stretch; backtracks are
// teleports, so they break the line and leave a marker at the landing.
inline void paths_from_trace_text(const std::string& text, std::vector<PlotPath>& paths,
                                  std::vector<PlotMarker>& markers) {
  std::size_t pos = 0, line_no = 0;
  bool header_seen = false;
  PlotPath cur;
  auto flush = [&] {
    if (cur.pts.size() >= 2) paths.push_back(cur);
    cur.pts.clear();
  };
  while (pos <= text.size()) {
    const std::size_t eol = text.find('\n', pos);
    std::string line =
        text.substr(pos, eol == std::string::npos ? std::string::npos : eol - pos);
    pos = eol == std::string::npos ? text.size() + 1 : eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("step\t", 0) != 0)
        throw IoError("trace line 1: missing step/x/y/controller/round header");
      header_seen = true;
      continue;
    }
    std::array<std::string, 5> f;
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size() && field < 5; ++i) {
      if (i == line.size() || line[i] == '\t') {
        f[field++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (field != 5)
      throw IoError("trace line " + std::to_string(line_no) + ": want 5 columns");
    const double x = parse_double_token(f[1], line_no);
    const double y = parse_double_token(f[2], line_no);
    const std::string& ctrl = f[3];
    if (ctrl == "backtrack") {
      flush();
      markers.push_back({x, y});
      cur.label.clear();
      cur.pts.push_back({x, y});  // next stretch starts from the checkpoint
      continue;
    }
    if (ctrl != cur.label) {
      const std::array<double, 2> join =
          cur.pts.empty() ? std::array<double, 2>{x, y} : cur.pts.back();
      flush();
      cur.label = ctrl;
      if (!(join[0] == x && join[1] == y)) cur.pts.push_back(join);
    }
    cur.pts.push_back({x, y});
  }
  flush();
}

}  // namespace contingent
