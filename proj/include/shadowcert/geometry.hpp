#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "shadowcert/linalg.hpp"

// Points, homogeneous vectors, segments/polylines and the deterministic
// polytope predicates. Sign convention, repo-wide: an obstacle is
// the intersection of {x : n^T lift(x) <= 0}; all halfspace tests are
// closed (boundary counts as inside).

namespace shadowcert {

/// Workspace point, d in {2, 3}.
struct Point {
  Vec coords;

  Point() = default;
  explicit Point(Vec c) : coords(std::move(c)) {
    if (coords.size() < 2 || coords.size() > 3)
      throw std::invalid_argument("Point: dimension must be 2 or 3");
    if (!coords.finite()) throw std::invalid_argument("Point: non-finite coordinate");
  }
  Point(double x, double y) : Point(Vec{x, y}) {}
  Point(double x, double y, double z) : Point(Vec{x, y, z}) {}

  int dim() const { return coords.size(); }
  double operator[](int i) const { return coords[i]; }
  bool operator==(const Point& o) const { return coords == o.coords; }
};

/// Homogeneous vector in R^(d+1); geometrically identified up to positive
/// scaling. Used both for lifted points and halfspace parameters.
struct HomoVec {
  Vec coords;

  HomoVec() = default;
  explicit HomoVec(Vec c) : coords(std::move(c)) {
    if (coords.size() < 3 || coords.size() > 4)
      throw std::invalid_argument("HomoVec: dimension must be 3 or 4");
    if (!coords.finite()) throw std::invalid_argument("HomoVec: non-finite coordinate");
  }
  HomoVec(double a, double b, double c) : HomoVec(Vec{a, b, c}) {}
  HomoVec(double a, double b, double c, double d) : HomoVec(Vec{a, b, c, d}) {}

  int size() const { return coords.size(); }
  double operator[](int i) const { return coords[i]; }
  double dot(const HomoVec& o) const { return coords.dot(o.coords); }
};

/// Lifts p to homogeneous coordinates: (p_1, ..., p_d, 1).
inline HomoVec lift(const Point& p) {
  Vec v(p.dim() + 1);
  for (int i = 0; i < p.dim(); ++i) v[i] = p.coords[i];
  v[p.dim()] = 1.0;
  return HomoVec(v);
}

/// Segment between two points; zero-length segments are accepted and
/// flagged so callers can treat them as points.
struct Segment {
  Point a, b;

  Segment() = default;
  Segment(Point a_, Point b_) : a(std::move(a_)), b(std::move(b_)) {
    if (a.dim() != b.dim()) throw std::invalid_argument("Segment: dimension mismatch");
  }
  int dim() const { return a.dim(); }
  bool zero_length() const { return a == b; }
  Point at(double t) const {
    Vec v(a.dim());
    for (int i = 0; i < a.dim(); ++i) v[i] = (1.0 - t) * a.coords[i] + t * b.coords[i];
    return Point(v);
  }
};

/// Ordered waypoints; the swept volume of an execution. A single waypoint
/// is a point volume.
struct Polyline {
  std::vector<Point> waypoints;

  Polyline() = default;
  explicit Polyline(std::vector<Point> wps) : waypoints(std::move(wps)) {
    if (waypoints.empty()) throw std::invalid_argument("Polyline: needs at least one waypoint");
    for (size_t i = 1; i < waypoints.size(); ++i)
      if (waypoints[i].dim() != waypoints[0].dim())
        throw std::invalid_argument("Polyline: dimension mismatch");
  }

  int dim() const { return waypoints[0].dim(); }
  size_t size() const { return waypoints.size(); }

  /// Enumerates the swept segments; a point volume yields one degenerate
  /// segment so every consumer handles both cases uniformly.
  size_t segment_count() const { return waypoints.size() == 1 ? 1 : waypoints.size() - 1; }
  Segment segment(size_t i) const {
    if (waypoints.size() == 1) return Segment(waypoints[0], waypoints[0]);
    return Segment(waypoints[i], waypoints[i + 1]);
  }

  double length() const {
    double s = 0.0;
    for (size_t i = 0; i + 1 < waypoints.size(); ++i)
      s += (waypoints[i + 1].coords - waypoints[i].coords).norm();
    return s;
  }
};

/// True iff n^T lift(x) <= 0 for every face.
inline bool point_in_polytope(const Point& x, std::span<const HomoVec> faces) {
  if (faces.empty()) throw std::invalid_argument("point_in_polytope: no faces");
  HomoVec xh = lift(x);
  for (const HomoVec& n : faces)
    if (n.dot(xh) > 0.0) return false;
  return true;
}

/// True iff some point of the segment lies in the polytope. Each face
/// constrains the segment parameter to an interval; the polytope is hit
/// iff the intersection of those intervals meets [0, 1].
inline bool segment_hits_polytope(const Segment& s, std::span<const HomoVec> faces) {
  HomoVec ah = lift(s.a), bh = lift(s.b);
  double lo = 0.0, hi = 1.0;
  for (const HomoVec& n : faces) {
    double c0 = n.dot(ah);
    double c1 = n.dot(bh) - c0;  // constraint: c0 + t*c1 <= 0
    if (c1 == 0.0) {
      if (c0 > 0.0) return false;
      continue;
    }
    double t = -c0 / c1;
    if (c1 > 0.0)
      hi = std::min(hi, t);
    else
      lo = std::max(lo, t);
    if (lo > hi) return false;
  }
  return true;
}

inline bool polyline_hits_polytope(const Polyline& vol, std::span<const HomoVec> faces) {
  for (size_t i = 0; i < vol.segment_count(); ++i)
    if (segment_hits_polytope(vol.segment(i), faces)) return true;
  return false;
}

/// FNV-1a digest of a polyline's exact bit content; identifies the swept
/// volume a certificate was issued for.
inline std::string polyline_digest(const Polyline& vol) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto feed = [&h](std::uint64_t word) {
    for (int b = 0; b < 8; ++b) {
      h ^= (word >> (8 * b)) & 0xffull;
      h *= 0x100000001b3ull;
    }
  };
  feed(static_cast<std::uint64_t>(vol.dim()));
  feed(static_cast<std::uint64_t>(vol.size()));
  for (const Point& p : vol.waypoints)
    for (int i = 0; i < p.dim(); ++i) {
      std::uint64_t bits;
      double c = p.coords[i];
      std::memcpy(&bits, &c, sizeof bits);
      feed(bits);
    }
  static const char* hexd = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = hexd[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace shadowcert
