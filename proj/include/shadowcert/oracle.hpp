#pragma once

#include <cstdint>
#include <vector>

#include "shadowcert/shadow.hpp"
#include "shadowcert/stats.hpp"

// Monte-Carlo ground truth for acceptance tests: collision probability of
// a swept volume against sampled obstacle realizations, and containment
// frequency of sampled obstacles in their shadows. Estimators are plain
// frequencies (unbiased); reports carry a one-sided Clopper-Pearson bound
// for near-zero counts.

namespace shadowcert {

struct McReport {
  long long trials = 0;
  long long hits = 0;
  double p_hat = 0.0;
  double upper_ci = 0.0;  // Clopper-Pearson, confidence 0.999
  std::uint64_t seed = 0;

  double stderr_est() const {
    double p = p_hat;
    return std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(trials)) /
                     static_cast<double>(trials));
  }
};

inline McReport make_mc_report(long long trials, long long hits, std::uint64_t seed) {
  McReport r;
  r.trials = trials;
  r.hits = hits;
  r.p_hat = static_cast<double>(hits) / static_cast<double>(trials);
  r.upper_ci = binom_upper_ci(hits, trials, 0.999);
  r.seed = seed;
  return r;
}

/// Frequency with which the swept volume collides with a sampled
/// realization of any obstacle.
inline McReport mc_collision_prob(const std::vector<PgdfObstacle>& obstacles,
                                  const Polyline& vol, long long trials, RngStream& rng) {
  if (trials < 1) throw std::invalid_argument("mc_collision_prob: trials must be >= 1");
  std::vector<ObstacleSampler> samplers;
  samplers.reserve(obstacles.size());
  for (const auto& o : obstacles) samplers.emplace_back(o);

  long long hits = 0;
  for (long long t = 0; t < trials; ++t) {
    bool collided = false;
    for (size_t i = 0; i < samplers.size() && !collided; ++i) {
      SampledObstacle s = samplers[i].sample(rng);
      if (polyline_hits_polytope(vol, s.normals)) collided = true;
    }
    if (collided) ++hits;
  }
  return make_mc_report(trials, hits, rng.seed());
}

/// Frequency with which a sampled obstacle is entirely contained in its
/// eps-shadow. Containment of an unbounded halfspace cannot be certified
/// by point sampling, so each sampled face is tested by the exact cone
/// condition at the shadow's chi-squared radius.
inline McReport mc_containment(const PgdfObstacle& o, double eps, long long trials,
                               RngStream& rng) {
  if (trials < 1) throw std::invalid_argument("mc_containment: trials must be >= 1");
  double face_eps = eps / o.face_count();
  double q = (face_eps >= 1.0) ? 0.0 : chi2_quantile(1.0 - face_eps, o.homo_dim());
  std::vector<FaceConeTester> testers;
  testers.reserve(o.faces.size());
  for (const auto& f : o.faces) testers.emplace_back(f);
  ObstacleSampler sampler(o);

  long long contained = 0;
  for (long long t = 0; t < trials; ++t) {
    SampledObstacle s = sampler.sample(rng);
    bool all_in = true;
    for (size_t f = 0; f < s.normals.size() && all_in; ++f)
      if (!testers[f].contains(s.normals[f], q)) all_in = false;
    if (all_in) ++contained;
  }
  return make_mc_report(trials, contained, rng.seed());
}

}  // namespace shadowcert
