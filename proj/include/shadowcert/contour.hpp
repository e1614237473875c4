#pragma once

#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "shadowcert/shadow.hpp"

// Boundary contours of 2-D obstacle shadows by marching squares on the
// membership margin field f(x) = min over faces of h_i(x). Rendering
// support only; certification never touches a grid.

namespace shadowcert {

struct Window2d {
  double min_x = 0.0, min_y = 0.0, max_x = 1.0, max_y = 1.0;
  bool valid() const { return min_x < max_x && min_y < max_y; }
};

namespace detail {

inline double shadow_field(const ObstacleShadow& os, double x, double y) {
  HomoVec xh(x, y, 1.0);
  double m = std::numeric_limits<double>::infinity();
  for (const FaceShadow& fs : os.face_shadows) {
    if (fs.degenerate) continue;  // a degenerate face covers everything
    m = std::min(m, fs.margin(xh));
  }
  return m;  // +inf when every face is degenerate: all of R^2 is inside
}

}  // namespace detail

/// Extracts iso-0 contours of the shadow membership indicator over a
/// regular grid. Segments are stitched into polylines via shared grid
/// edges, so output is deterministic for fixed inputs.
inline std::vector<Polyline> shadow_boundary_2d(const ObstacleShadow& os, const Window2d& window,
                                                int resolution) {
  if (!window.valid()) throw std::invalid_argument("shadow_boundary_2d: degenerate window");
  if (resolution < 2) throw std::invalid_argument("shadow_boundary_2d: resolution must be >= 2");

  const int n = resolution;
  const double dx = (window.max_x - window.min_x) / n;
  const double dy = (window.max_y - window.min_y) / n;

  std::vector<double> f(static_cast<size_t>((n + 1) * (n + 1)));
  for (int iy = 0; iy <= n; ++iy)
    for (int ix = 0; ix <= n; ++ix)
      f[static_cast<size_t>(iy * (n + 1) + ix)] =
          detail::shadow_field(os, window.min_x + ix * dx, window.min_y + iy * dy);

  // Grid edge ids: horizontal edge (ix, iy)-(ix+1, iy) and vertical edge
  // (ix, iy)-(ix, iy+1). Interpolated crossing points live on edges, so
  // edges are the connectivity keys for stitching.
  auto h_edge = [&](int ix, int iy) { return 2 * (iy * (n + 1) + ix); };
  auto v_edge = [&](int ix, int iy) { return 2 * (iy * (n + 1) + ix) + 1; };

  auto val = [&](int ix, int iy) { return f[static_cast<size_t>(iy * (n + 1) + ix)]; };
  auto interp = [&](double fa, double fb) {
    if (!std::isfinite(fa) || !std::isfinite(fb)) return 0.5;
    double t = fa / (fa - fb);
    return std::clamp(t, 0.0, 1.0);
  };
  auto edge_point = [&](int edge_id) {
    int e = edge_id / 2, vertical = edge_id % 2;
    int iy = e / (n + 1), ix = e % (n + 1);
    double x0 = window.min_x + ix * dx, y0 = window.min_y + iy * dy;
    if (!vertical) {
      double t = interp(val(ix, iy), val(ix + 1, iy));
      return Point(x0 + t * dx, y0);
    }
    double t = interp(val(ix, iy), val(ix, iy + 1));
    return Point(x0, y0 + t * dy);
  };

  std::vector<std::pair<int, int>> segments;  // pairs of edge ids
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      bool b0 = val(ix, iy) >= 0.0;          // bottom-left
      bool b1 = val(ix + 1, iy) >= 0.0;      // bottom-right
      bool b2 = val(ix + 1, iy + 1) >= 0.0;  // top-right
      bool b3 = val(ix, iy + 1) >= 0.0;      // top-left
      int code = (b0 ? 1 : 0) | (b1 ? 2 : 0) | (b2 ? 4 : 0) | (b3 ? 8 : 0);
      if (code == 0 || code == 15) continue;
      int bottom = h_edge(ix, iy), top = h_edge(ix, iy + 1);
      int left = v_edge(ix, iy), right = v_edge(ix + 1, iy);
      switch (code) {
        case 1: case 14: segments.emplace_back(bottom, left); break;
        case 2: case 13: segments.emplace_back(bottom, right); break;
        case 4: case 11: segments.emplace_back(top, right); break;
        case 8: case 7: segments.emplace_back(top, left); break;
        case 3: case 12: segments.emplace_back(left, right); break;
        case 6: case 9: segments.emplace_back(bottom, top); break;
        case 5: case 10: {
          // Saddle: disambiguate with the cell-center value.
          double cx = window.min_x + (ix + 0.5) * dx, cy = window.min_y + (iy + 0.5) * dy;
          bool center = detail::shadow_field(os, cx, cy) >= 0.0;
          bool diag_with_b0 = (code == 5) == center;
          if (diag_with_b0) {
            segments.emplace_back(bottom, right);
            segments.emplace_back(top, left);
          } else {
            segments.emplace_back(bottom, left);
            segments.emplace_back(top, right);
          }
          break;
        }
        default: break;
      }
    }

  // Stitch segments into chains by walking shared edges.
  std::multimap<int, size_t> by_edge;
  for (size_t i = 0; i < segments.size(); ++i) {
    by_edge.emplace(segments[i].first, i);
    by_edge.emplace(segments[i].second, i);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<Polyline> out;
  for (size_t start = 0; start < segments.size(); ++start) {
    if (used[start]) continue;
    used[start] = true;
    std::vector<int> chain{segments[start].first, segments[start].second};
    // Grow forward, then backward.
    for (int dir = 0; dir < 2; ++dir) {
      while (true) {
        int tip = dir == 0 ? chain.back() : chain.front();
        auto [lo, hi] = by_edge.equal_range(tip);
        size_t next = segments.size();
        for (auto it = lo; it != hi; ++it)
          if (!used[it->second]) {
            next = it->second;
            break;
          }
        if (next == segments.size()) break;
        used[next] = true;
        int other = (segments[next].first == tip) ? segments[next].second : segments[next].first;
        if (dir == 0)
          chain.push_back(other);
        else
          chain.insert(chain.begin(), other);
      }
    }
    std::vector<Point> pts;
    pts.reserve(chain.size());
    for (int e : chain) pts.push_back(edge_point(e));
    if (pts.size() >= 2) out.push_back(Polyline(pts));
  }
  return out;
}

}  // namespace shadowcert
