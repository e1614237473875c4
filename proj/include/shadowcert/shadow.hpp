#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "shadowcert/pgdf.hpp"
#include "shadowcert/stats.hpp"

// Epsilon-shadows of Gaussian faces and obstacles. For a face with
// parameter n ~ N(mu, sigma) (obstacle convention n^T x_h <= 0), the
// shadow at risk eps is the set of points contained by at least one
// halfspace whose (negated) parameter lies in the chi-squared confidence
// ellipsoid of radius-squared q = chi2_quantile(1 - eps, d + 1). The
// supremum of alpha^T x_h over that ellipsoid is closed-form, so
// membership needs no explicit cone construction:
//
//   x in shadow  <=>  h(x) = -mu^T x_h + sqrt(q * x_h^T Sigma x_h) >= 0.
//
// The polar-cone picture from the construction's proof is the correctness
// argument for this form; the complement of the shadow is the polar cone
// of the ellipsoid's cone, sliced at the affine chart.

namespace shadowcert {

/// Evaluated shadow of one face at a fixed risk level.
struct FaceShadow {
  GaussianFace face;
  double eps = 0.0;  // per-face risk in (0, 1]; 1 is the mean-halfspace limit
  double q = 0.0;    // chi2_quantile(1 - eps, d + 1)
  bool degenerate = false;

  /// Margin h(x_h); nonnegative means x is inside the shadow.
  double margin(const HomoVec& xh) const {
    double quad = quad_form(face.sigma, xh.coords);
    return -face.mu.dot(xh) + std::sqrt(q * std::max(0.0, quad));
  }
};

namespace detail {

/// Degeneracy of a (face, eps) pair. Two ways a shadow stops being
/// useful: the confidence ellipsoid contains the origin (every halfspace
/// becomes possible, shadow is all of R^d), or the complement of the
/// shadow has finite measure in the affine chart (the shadow reaches
/// every direction at infinity). The latter holds iff
/// mu_s mu_s^T - q * Sigma_ss has no nonnegative eigenvalue, where the
/// subscript s is the spatial block.
inline bool shadow_degenerate(const GaussianFace& face, double q) {
  const int hd = face.size();
  const int d = hd - 1;

  // Origin inside the ellipsoid around -mu (equivalently around mu):
  // mu must lie in range(Sigma) and mu^T Sigma^+ mu <= q.
  {
    EigenSym eig = eigen_sym(face.sigma);
    double lmax = std::max(std::abs(eig.values[hd - 1]), std::abs(eig.values[0]));
    double tol = 1e-12 * std::max(1.0, lmax);
    Vec b = eig.vectors.apply_transposed(face.mu.coords);
    double quad = 0.0;
    bool in_range = true;
    double mu_scale = std::max(1.0, face.mu.coords.norm());
    for (int i = 0; i < hd; ++i) {
      if (eig.values[i] > tol)
        quad += b[i] * b[i] / eig.values[i];
      else if (std::abs(b[i]) > 1e-9 * mu_scale)
        in_range = false;
    }
    if (in_range && quad <= q) return true;
  }

  // Bounded complement: max eigenvalue of mu_s mu_s^T - q Sigma_ss < 0.
  SymMatrix m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      m.at(i, j) = face.mu[i] * face.mu[j] - q * face.sigma.at(i, j);
  EigenSym eig = eigen_sym(m);
  double scale = std::max(1.0, std::abs(m.trace()));
  return eig.values[d - 1] < 1e-12 * scale;
}

}  // namespace detail

/// Builds the shadow of one face at per-face risk eps. eps = 1 is the
/// q = 0 limit (the exact mean halfspace).
inline FaceShadow make_face_shadow(const GaussianFace& face, double eps) {
  if (!(eps > 0.0 && eps <= 1.0))
    throw std::invalid_argument("make_face_shadow: eps must be in (0, 1]");
  FaceShadow fs;
  fs.face = face;
  fs.eps = eps;
  fs.q = (eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - eps, face.size());
  fs.degenerate = detail::shadow_degenerate(face, fs.q);
  return fs;
}

/// Degenerate shadows cover everything; boundary points count as inside.
inline bool face_shadow_membership(const FaceShadow& fs, const Point& x) {
  if (fs.degenerate) return true;
  return fs.margin(lift(x)) >= 0.0;
}

/// Shadow of a whole obstacle: the intersection of the eps/m shadows of
/// its m faces, which contains the obstacle with probability >= 1 - eps.
struct ObstacleShadow {
  std::vector<FaceShadow> face_shadows;
  double eps = 0.0;  // total risk
};

inline ObstacleShadow make_obstacle_shadow(const PgdfObstacle& o, double eps) {
  if (!(eps > 0.0 && eps <= 1.0))
    throw std::invalid_argument("make_obstacle_shadow: eps must be in (0, 1]");
  ObstacleShadow os;
  os.eps = eps;
  const double face_eps = eps / o.face_count();
  const double q = (face_eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - face_eps, o.homo_dim());
  os.face_shadows.reserve(o.faces.size());
  for (const auto& f : o.faces) {
    FaceShadow fs;
    fs.face = f;
    fs.eps = face_eps;
    fs.q = q;
    fs.degenerate = detail::shadow_degenerate(f, q);
    os.face_shadows.push_back(std::move(fs));
  }
  return os;
}

inline bool obstacle_shadow_membership(const ObstacleShadow& os, const Point& x) {
  HomoVec xh = lift(x);
  for (const FaceShadow& fs : os.face_shadows)
    if (!fs.degenerate && fs.margin(xh) < 0.0) return false;
  return true;
}

/// The maximal sub-interval of [0, 1] outside one face shadow along a
/// segment. h(t) along the segment is affine plus a norm of an affine
/// map, hence convex, so the non-membership set {h < 0} is one open
/// interval. Endpoints that are genuine roots are refined until
/// |h| <= 1e-12 * scale and are biased inward (a too-small gap only makes
/// certification more conservative).
struct GapInterval {
  double lo = 1.0, hi = 0.0;
  bool left_clipped = false;   // h < 0 already at t = 0
  bool right_clipped = false;  // h < 0 still at t = 1
  bool nonempty() const { return lo <= hi; }
};

inline GapInterval segment_face_gap(const FaceShadow& fs, const Segment& s) {
  GapInterval gap;
  if (fs.degenerate) return gap;

  const HomoVec ah = lift(s.a), bh = lift(s.b);
  // x_h(t) = u + t v
  const Vec& u = ah.coords;
  Vec v = bh.coords - ah.coords;
  const Vec su = fs.face.sigma.apply(u);
  const Vec sv = fs.face.sigma.apply(v);
  const double b0 = u.dot(su), b1 = u.dot(sv), b2 = v.dot(sv);
  const double a0 = fs.face.mu.coords.dot(u), av = fs.face.mu.coords.dot(v);
  const double q = fs.q;

  auto h = [&](double t) {
    double beta = b0 + t * (2.0 * b1 + t * b2);
    double alpha = a0 + t * av;
    return -alpha + std::sqrt(q * std::max(0.0, beta));
  };

  const double h0 = h(0.0), h1 = h(1.0);
  const double scale =
      std::max({1.0, std::abs(a0), std::abs(a0 + av), std::sqrt(q * std::max(0.0, b0)),
                std::sqrt(q * std::max(0.0, b0 + 2.0 * b1 + b2))});
  const double htol = 1e-12 * scale;

  // Interior minimum candidates: critical points of convex h, from
  // squaring h'(t) = 0 (spurious candidates are harmless since h is
  // evaluated directly).
  double tmin = (h0 <= h1) ? 0.0 : 1.0;
  double hmin = std::min(h0, h1);
  {
    const double qa = b2 * (q * b2 - av * av);
    const double qb = 2.0 * b1 * (q * b2 - av * av);
    const double qc = q * b1 * b1 - av * av * b0;
    auto consider = [&](double t) {
      if (t > 0.0 && t < 1.0) {
        double ht = h(t);
        if (ht < hmin) {
          hmin = ht;
          tmin = t;
        }
      }
    };
    if (std::abs(qa) > 0.0) {
      double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        double sq = std::sqrt(disc);
        consider((-qb - sq) / (2.0 * qa));
        consider((-qb + sq) / (2.0 * qa));
      }
    } else if (std::abs(qb) > 0.0) {
      consider(-qc / qb);
    }
  }

  if (hmin >= 0.0) return gap;  // segment never leaves the shadow

  // Refine each endpoint between an outside point (h >= 0) and an inside
  // point (h < 0); Illinois-damped false position with a bisection
  // safeguard. The returned endpoint is the inside point of the final
  // bracket, so gaps are biased inward.
  auto refine = [&](double t_out, double t_in) {
    double f_out = h(t_out), f_in = h(t_in);
    int side = 0;
    for (int i = 0; i < 80; ++i) {
      double denom = f_out - f_in;
      double mid = (std::abs(denom) > 0.0)
                       ? (t_in * f_out - t_out * f_in) / denom
                       : 0.5 * (t_out + t_in);
      double w = std::abs(t_in - t_out);
      if (!(mid > std::min(t_out, t_in) && mid < std::max(t_out, t_in)))
        mid = 0.5 * (t_out + t_in);
      double hm = h(mid);
      if (hm < 0.0) {
        t_in = mid;
        f_in = hm;
        if (side == -1) f_out *= 0.5;
        side = -1;
        if (-hm <= htol) break;
      } else {
        t_out = mid;
        f_out = hm;
        if (side == 1) f_in *= 0.5;
        side = 1;
      }
      if (std::abs(t_in - t_out) <= 4e-16 || std::abs(t_in - t_out) >= w) break;
    }
    return t_in;
  };

  if (h0 < 0.0) {
    gap.lo = 0.0;
    gap.left_clipped = true;
  } else {
    gap.lo = refine(0.0, tmin);
  }
  if (h1 < 0.0) {
    gap.hi = 1.0;
    gap.right_clipped = true;
  } else {
    gap.hi = refine(1.0, tmin);
  }
  return gap;
}

/// Whether some point of the swept volume lies inside the obstacle shadow
/// (in every face shadow simultaneously). Per segment this is a coverage
/// check: the segment misses the shadow iff the union of the per-face
/// gaps covers [0, 1]. Touching gap endpoints are shadow points, so
/// coverage requires strict overlap.
inline bool shadow_hits_segment(const ObstacleShadow& os, const Segment& s) {
  std::vector<std::pair<double, double>> gaps;
  gaps.reserve(os.face_shadows.size());
  for (const FaceShadow& fs : os.face_shadows) {
    GapInterval g = segment_face_gap(fs, s);
    if (!g.nonempty()) continue;
    double lo = g.left_clipped ? -1.0 : g.lo;
    double hi = g.right_clipped ? 2.0 : g.hi;
    if (lo <= -1.0 && hi >= 2.0) return false;  // one face excludes the whole segment
    gaps.emplace_back(lo, hi);
  }
  std::sort(gaps.begin(), gaps.end());
  double reach = 0.0;  // uncovered candidate point
  for (const auto& [lo, hi] : gaps) {
    if (lo >= reach) return true;  // reach is in no gap: inside the shadow
    reach = std::max(reach, hi);
    if (reach > 1.0) return false;
  }
  return reach <= 1.0;
}

inline bool shadow_hits_volume(const ObstacleShadow& os, const Polyline& vol) {
  for (size_t i = 0; i < vol.segment_count(); ++i)
    if (shadow_hits_segment(os, vol.segment(i))) return true;
  return false;
}

}  // namespace shadowcert
