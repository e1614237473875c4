#pragma once

#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "shadowcert/contour.hpp"

// Deterministic SVG rendering of 2-D scenes: mean polytopes (dark fill),
// shadow contours per risk level (outlines), and trajectory / tree
// polylines. Numbers are formatted with fixed precision so identical
// inputs produce byte-identical files.

namespace shadowcert {

namespace detail {

inline std::string fmt_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// Clips an axis-aligned window rectangle by the halfspaces
/// {x : mu^T lift(x) <= 0} (Sutherland-Hodgman); yields the mean polygon.
inline std::vector<Point> mean_polygon(const std::vector<GaussianFace>& faces,
                                       const Window2d& w) {
  std::vector<Point> poly{Point(w.min_x, w.min_y), Point(w.max_x, w.min_y),
                          Point(w.max_x, w.max_y), Point(w.min_x, w.max_y)};
  for (const auto& f : faces) {
    const Vec& mu = f.mu.coords;
    auto side = [&](const Point& p) { return mu[0] * p[0] + mu[1] * p[1] + mu[2]; };
    std::vector<Point> next;
    for (size_t i = 0; i < poly.size(); ++i) {
      const Point& a = poly[i];
      const Point& b = poly[(i + 1) % poly.size()];
      double sa = side(a), sb = side(b);
      bool ina = sa <= 0.0, inb = sb <= 0.0;
      if (ina) next.push_back(a);
      if (ina != inb) {
        double t = sa / (sa - sb);
        next.push_back(Point(a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])));
      }
      if (next.size() > 64) break;  // numeric pathology guard
    }
    poly = std::move(next);
    if (poly.empty()) break;
  }
  return poly;
}

}  // namespace detail

struct RenderStyle {
  std::string obstacle_fill = "#37474f";
  std::vector<std::string> shadow_colors{"#e53935", "#fb8c00", "#fdd835",
                                         "#43a047", "#1e88e5", "#8e24aa"};
  std::string trajectory_color = "#1565c0";
  std::string tree_color = "#90a4ae";
  double stroke_width = 0.5;  // in user units after scaling
  int pixels = 720;
};

/// Renders obstacles with nested shadow outlines at the given risk
/// levels. eps_levels applies to every obstacle; per-obstacle levels
/// (e.g. from a certificate) are passed as one level per obstacle.
inline std::string render_svg(const std::vector<PgdfObstacle>& obstacles,
                              const std::vector<std::vector<double>>& eps_per_obstacle,
                              const Window2d& window, int resolution,
                              const Polyline* trajectory = nullptr,
                              const std::vector<Segment>* tree_edges = nullptr,
                              const RenderStyle& style = {}) {
  if (!window.valid()) throw std::invalid_argument("render_svg: degenerate window");
  for (const auto& o : obstacles)
    if (o.homo_dim() != 3) throw std::invalid_argument("render_svg: rendering needs d = 2");

  const double ww = window.max_x - window.min_x;
  const double wh = window.max_y - window.min_y;
  const double s = style.pixels / std::max(ww, wh);
  const double width = ww * s, height = wh * s;
  auto px = [&](double x) { return (x - window.min_x) * s; };
  auto py = [&](double y) { return height - (y - window.min_y) * s; };  // y up

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << detail::fmt_num(width)
      << "\" height=\"" << detail::fmt_num(height) << "\" viewBox=\"0 0 "
      << detail::fmt_num(width) << " " << detail::fmt_num(height) << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";

  auto emit_polyline = [&](const Polyline& pl, const std::string& color, double sw,
                           bool closed, const std::string& fill) {
    out << (closed ? "<polygon" : "<polyline") << " points=\"";
    for (size_t i = 0; i < pl.size(); ++i) {
      if (i) out << " ";
      out << detail::fmt_num(px(pl.waypoints[i][0])) << "," << detail::fmt_num(py(pl.waypoints[i][1]));
    }
    out << "\" fill=\"" << fill << "\" stroke=\"" << color << "\" stroke-width=\""
        << detail::fmt_num(sw) << "\"/>\n";
  };

  // Shadow outlines first (outermost risk levels behind).
  for (size_t oi = 0; oi < obstacles.size(); ++oi) {
    const auto& levels = eps_per_obstacle[oi % eps_per_obstacle.size()];
    for (size_t li = 0; li < levels.size(); ++li) {
      ObstacleShadow os = make_obstacle_shadow(obstacles[oi], levels[li]);
      auto contours = shadow_boundary_2d(os, window, resolution);
      const std::string& color = style.shadow_colors[li % style.shadow_colors.size()];
      for (const auto& c : contours) emit_polyline(c, color, style.stroke_width * 2.0, false, "none");
    }
  }

  // Mean polytopes.
  for (const auto& o : obstacles) {
    auto poly = detail::mean_polygon(o.faces, window);
    if (poly.size() >= 3)
      emit_polyline(Polyline(poly), style.obstacle_fill, style.stroke_width, true,
                    style.obstacle_fill);
  }

  if (tree_edges) {
    for (const Segment& e : *tree_edges) {
      out << "<line x1=\"" << detail::fmt_num(px(e.a[0])) << "\" y1=\"" << detail::fmt_num(py(e.a[1]))
          << "\" x2=\"" << detail::fmt_num(px(e.b[0])) << "\" y2=\"" << detail::fmt_num(py(e.b[1]))
          << "\" stroke=\"" << style.tree_color << "\" stroke-width=\""
          << detail::fmt_num(style.stroke_width) << "\"/>\n";
    }
  }
  if (trajectory)
    emit_polyline(*trajectory, style.trajectory_color, style.stroke_width * 3.0, false, "none");

  out << "</svg>\n";
  return out.str();
}

}  // namespace shadowcert
