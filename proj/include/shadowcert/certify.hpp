#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "shadowcert/shadow.hpp"

// Per-obstacle optimal shadow search and multi-obstacle certificates.
// For each obstacle the search finds (to additive precision) the smallest
// risk eps whose shadow misses the swept volume; the certificate sums the
// per-obstacle risks, which bounds the lifetime collision probability by
// the union bound. Certificates are cheap to re-verify: one intersection
// test per obstacle, no search.

namespace shadowcert {

enum class CertStatus {
  kCertified,        // bisection converged; shadow at eps_i misses the volume
  kUncertifiable,    // even the eps -> 1 shadow hits; treat as risk 1
  kDegenerateFloor,  // risk already below the numerical floor
};

inline const char* to_string(CertStatus s) {
  switch (s) {
    case CertStatus::kCertified: return "CERTIFIED";
    case CertStatus::kUncertifiable: return "UNCERTIFIABLE";
    case CertStatus::kDegenerateFloor: return "DEGENERATE_FLOOR";
  }
  return "?";
}

struct ObstacleCert {
  std::string obstacle_id;
  double eps_i = 1.0;
  CertStatus status = CertStatus::kUncertifiable;
  std::vector<double> per_face_q;
  long long intersection_calls = 0;
};

struct SafetyCertificate {
  std::vector<ObstacleCert> per_obstacle;  // sorted by obstacle_id
  double total_eps = 0.0;
  std::string volume_digest;
  double eps_precision = 0.0;

  bool certified() const {
    for (const auto& c : per_obstacle)
      if (c.status == CertStatus::kUncertifiable) return false;
    return true;
  }
  long long total_calls() const {
    long long n = 0;
    for (const auto& c : per_obstacle) n += c.intersection_calls;
    return n;
  }
};

struct SearchOptions {
  double eps_floor = 1e-9;
  bool log_schedule = false;  // bisect on log(eps) instead of eps
};

/// Sum with every partial result rounded up one unit in the last place,
/// so a certificate total never understates the exact sum of risks.
inline double round_up_sum(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s = std::nextafter(s + x, std::numeric_limits<double>::infinity());
  return s;
}

/// Bisection search for the largest shadow of one obstacle that misses
/// the volume, i.e. the smallest certifiable risk, within additive
/// precision eps_p. The family is monotone (larger eps, smaller shadow),
/// so the loop keeps lo hitting and hi missing and returns hi; the result
/// always misses regardless of precision.
inline ObstacleCert find_maximal_shadow(const PgdfObstacle& o, const Polyline& vol,
                                        double eps_p, const SearchOptions& opts = {}) {
  if (!(eps_p > 0.0)) throw std::invalid_argument("find_maximal_shadow: eps_p must be > 0");
  if (!(opts.eps_floor > 0.0 && opts.eps_floor < 1.0))
    throw std::invalid_argument("find_maximal_shadow: eps_floor must be in (0, 1)");

  ObstacleCert cert;
  cert.obstacle_id = o.id;
  long long calls = 0;
  auto hits = [&](double eps) {
    ++calls;
    return shadow_hits_volume(make_obstacle_shadow(o, eps), vol);
  };
  auto finish = [&](double eps, CertStatus status) {
    cert.eps_i = eps;
    cert.status = status;
    cert.intersection_calls = calls;
    double face_eps = eps / o.face_count();
    double q = (face_eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - face_eps, o.homo_dim());
    cert.per_face_q.assign(o.faces.size(), q);
    return cert;
  };

  if (!hits(opts.eps_floor)) return finish(opts.eps_floor, CertStatus::kDegenerateFloor);
  if (hits(1.0)) return finish(1.0, CertStatus::kUncertifiable);

  double lo = opts.eps_floor, hi = 1.0;
  while (hi - lo > eps_p) {
    double mid = opts.log_schedule ? std::sqrt(lo * hi) : 0.5 * (lo + hi);
    if (!(mid > lo && mid < hi)) break;
    (hits(mid) ? lo : hi) = mid;
  }
  return finish(hi, CertStatus::kCertified);
}

/// Optimal per-obstacle risk allocation: an independent search per
/// obstacle at precision eps_p / n, summed with upward rounding. The
/// assembly is sorted by obstacle id, so the result does not depend on
/// evaluation order.
inline SafetyCertificate find_maximal_shadow_set(const std::vector<PgdfObstacle>& obstacles,
                                                 const Polyline& vol, double eps_p,
                                                 const SearchOptions& opts = {}) {
  SafetyCertificate cert;
  cert.volume_digest = polyline_digest(vol);
  cert.eps_precision = eps_p;
  const double per = obstacles.empty() ? eps_p : eps_p / static_cast<double>(obstacles.size());
  cert.per_obstacle.reserve(obstacles.size());
  for (const auto& o : obstacles)
    cert.per_obstacle.push_back(find_maximal_shadow(o, vol, per, opts));
  std::sort(cert.per_obstacle.begin(), cert.per_obstacle.end(),
            [](const ObstacleCert& a, const ObstacleCert& b) {
              return a.obstacle_id < b.obstacle_id;
            });
  std::vector<double> eps;
  eps.reserve(cert.per_obstacle.size());
  for (const auto& c : cert.per_obstacle) eps.push_back(c.eps_i);
  cert.total_eps = round_up_sum(eps);
  return cert;
}

/// Equal-allocation baseline: every obstacle is charged the same risk,
/// the smallest uniform value for which all shadows miss, i.e. the
/// largest per-obstacle optimum. Kept for comparison against the optimal
/// allocation; it pays for distant obstacles as much as for near ones.
inline SafetyCertificate find_uniform_shadow_set(const std::vector<PgdfObstacle>& obstacles,
                                                 const Polyline& vol, double eps_p,
                                                 const SearchOptions& opts = {}) {
  SafetyCertificate cert = find_maximal_shadow_set(obstacles, vol, eps_p, opts);
  double eps_u = 0.0;
  for (const auto& c : cert.per_obstacle) eps_u = std::max(eps_u, c.eps_i);
  for (auto& c : cert.per_obstacle) {
    if (c.status == CertStatus::kUncertifiable) continue;
    c.eps_i = eps_u;
    const auto& o = *std::find_if(obstacles.begin(), obstacles.end(),
                                  [&](const PgdfObstacle& x) { return x.id == c.obstacle_id; });
    double face_eps = eps_u / o.face_count();
    double q = (face_eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - face_eps, o.homo_dim());
    c.per_face_q.assign(o.faces.size(), q);
  }
  std::vector<double> eps;
  for (const auto& c : cert.per_obstacle) eps.push_back(c.eps_i);
  cert.total_eps = round_up_sum(eps);
  return cert;
}

/// Independent re-check of a certificate: recomputes each shadow at the
/// recorded risk and confirms non-intersection (one intersection test per
/// obstacle, no search), the per-face radii, and the total. Throws on a
/// volume-digest mismatch; any other inconsistency returns false.
inline bool verify_certificate(const SafetyCertificate& cert,
                               const std::vector<PgdfObstacle>& obstacles,
                               const Polyline& vol) {
  if (polyline_digest(vol) != cert.volume_digest)
    throw std::invalid_argument("verify_certificate: volume digest mismatch");
  if (cert.per_obstacle.size() != obstacles.size()) return false;

  std::map<std::string, const PgdfObstacle*> by_id;
  for (const auto& o : obstacles) by_id[o.id] = &o;
  if (by_id.size() != obstacles.size()) return false;

  for (const auto& c : cert.per_obstacle) {
    auto it = by_id.find(c.obstacle_id);
    if (it == by_id.end()) return false;
    const PgdfObstacle& o = *it->second;
    if (!(c.eps_i > 0.0 && c.eps_i <= 1.0)) return false;
    if (c.per_face_q.size() != o.faces.size()) return false;
    double face_eps = c.eps_i / o.face_count();
    double q = (face_eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - face_eps, o.homo_dim());
    for (double qf : c.per_face_q)
      if (std::abs(qf - q) > 1e-12 * (1.0 + q)) return false;
    if (c.eps_i < 1.0) {
      if (shadow_hits_volume(make_obstacle_shadow(o, c.eps_i), vol)) return false;
    }
  }

  std::vector<ObstacleCert> sorted = cert.per_obstacle;
  std::sort(sorted.begin(), sorted.end(), [](const ObstacleCert& a, const ObstacleCert& b) {
    return a.obstacle_id < b.obstacle_id;
  });
  std::vector<double> eps;
  for (const auto& c : sorted) eps.push_back(c.eps_i);
  if (cert.total_eps != round_up_sum(eps)) return false;
  return true;
}

/// Joint law used by Monte-Carlo estimators that need one. The
/// certification guarantee holds for any coupling; the comonotone mode
/// (shared standard-normal draws across obstacles) probes the worst case
/// for union-bound slack.
enum class FaceCoupling { kIndependent, kComonotone };

struct UnionGapReport {
  long long trials = 0;
  double p_union = 0.0;                     // P(some obstacle escapes its shadow)
  std::vector<double> per_obstacle_escape;  // per-obstacle escape frequency
  double sum_eps = 0.0;
  double sum_escape = 0.0;
  double union_bound_gap = 0.0;   // sum of per-obstacle escapes - p_union
  double certified_slack = 0.0;   // sum_eps - p_union
  double gap_stderr = 0.0;
};

/// Monte-Carlo estimate of the union-bound slack: how much the sum of
/// per-obstacle escape probabilities overstates the probability that any
/// obstacle escapes its shadow. Escape is tested by the exact cone
/// condition face by face.
inline UnionGapReport union_bound_gap_estimate(const std::vector<PgdfObstacle>& obstacles,
                                               const std::vector<double>& eps_per_obstacle,
                                               long long trials, RngStream& rng,
                                               FaceCoupling coupling = FaceCoupling::kIndependent) {
  if (obstacles.size() != eps_per_obstacle.size())
    throw std::invalid_argument("union_bound_gap_estimate: eps list size mismatch");
  if (trials < 1) throw std::invalid_argument("union_bound_gap_estimate: trials must be >= 1");

  const size_t n = obstacles.size();
  std::vector<ObstacleSampler> samplers;
  std::vector<std::vector<FaceConeTester>> testers(n);
  std::vector<double> q(n);
  size_t max_faces = 0;
  int hd = 0;
  for (size_t i = 0; i < n; ++i) {
    samplers.emplace_back(obstacles[i]);
    double face_eps = eps_per_obstacle[i] / obstacles[i].face_count();
    q[i] = (face_eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - face_eps, obstacles[i].homo_dim());
    for (const auto& f : obstacles[i].faces) testers[i].emplace_back(f);
    max_faces = std::max(max_faces, obstacles[i].faces.size());
    hd = obstacles[i].homo_dim();
  }

  std::vector<Mat> lowers(n * max_faces, Mat(hd));
  if (coupling == FaceCoupling::kComonotone)
    for (size_t i = 0; i < n; ++i)
      for (size_t f = 0; f < obstacles[i].faces.size(); ++f)
        lowers[i * max_faces + f] = cholesky(obstacles[i].faces[f].sigma).lower;

  long long union_hits = 0;
  std::vector<long long> escapes(n, 0);
  double gap_sum = 0.0, gap_sq = 0.0;
  std::vector<double> shared_z(max_faces * static_cast<size_t>(hd));

  for (long long t = 0; t < trials; ++t) {
    int escaped = 0;
    if (coupling == FaceCoupling::kComonotone)
      for (double& z : shared_z) z = rng.normal();
    for (size_t i = 0; i < n; ++i) {
      bool esc = false;
      if (coupling == FaceCoupling::kComonotone) {
        for (size_t f = 0; f < obstacles[i].faces.size() && !esc; ++f) {
          const Mat& l = lowers[i * max_faces + f];
          Vec v(hd);
          for (int r = 0; r < hd; ++r) {
            double acc = obstacles[i].faces[f].mu[r];
            for (int c = 0; c < hd; ++c)
              acc += l.at(r, c) * shared_z[f * static_cast<size_t>(hd) + static_cast<size_t>(c)];
            v[r] = acc;
          }
          if (!testers[i][f].contains(HomoVec(v), q[i])) esc = true;
        }
      } else {
        SampledObstacle s = samplers[i].sample(rng);
        for (size_t f = 0; f < s.normals.size() && !esc; ++f)
          if (!testers[i][f].contains(s.normals[f], q[i])) esc = true;
      }
      if (esc) {
        ++escapes[i];
        ++escaped;
      }
    }
    if (escaped > 0) ++union_hits;
    double x = static_cast<double>(escaped) - (escaped > 0 ? 1.0 : 0.0);
    gap_sum += x;
    gap_sq += x * x;
  }

  UnionGapReport rep;
  rep.trials = trials;
  rep.p_union = static_cast<double>(union_hits) / static_cast<double>(trials);
  rep.per_obstacle_escape.resize(n);
  for (size_t i = 0; i < n; ++i) {
    rep.per_obstacle_escape[i] = static_cast<double>(escapes[i]) / static_cast<double>(trials);
    rep.sum_escape += rep.per_obstacle_escape[i];
    rep.sum_eps += eps_per_obstacle[i];
  }
  rep.union_bound_gap = gap_sum / static_cast<double>(trials);
  rep.certified_slack = rep.sum_eps - rep.p_union;
  double mean = rep.union_bound_gap;
  double var = std::max(0.0, gap_sq / static_cast<double>(trials) - mean * mean);
  rep.gap_stderr = std::sqrt(var / static_cast<double>(trials));
  return rep;
}

}  // namespace shadowcert
