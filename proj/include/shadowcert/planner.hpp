#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "shadowcert/certify.hpp"
#include "shadowcert/random.hpp"

// Risk-constrained RRT: the tree only grows through extensions whose
// root-to-new-node trajectory certifies below eps_safe. Each node caches
// its per-obstacle risks; because a path's optimal risk per obstacle is
// determined by the closest approach, the risk of (root -> near -> new)
// is the per-obstacle maximum of the cached value and the new segment's
// risk. Returned paths are recertified from scratch before they are
// handed back, so the planner's output contract does not depend on the
// incremental bookkeeping.
//
// This is plain RRT (no rewiring); a failure to find a path is not
// evidence that none exists - the risk constraint breaks the assumptions
// behind RRT completeness arguments.

namespace shadowcert {

struct PlannerConfig {
  double eps_safe = 0.005;
  double eps_p = 1e-4;
  double step_size = 0.0;    // 0: 5% of the workspace diagonal
  double goal_bias = 0.05;
  int max_iterations = 5000;
  double goal_radius = 0.0;  // 0: step_size
  Point workspace_min, workspace_max;
  SearchOptions search;

  void validate() const {
    if (!(eps_safe > 0.0 && eps_safe < 1.0))
      throw std::invalid_argument("PlannerConfig: eps_safe must be in (0, 1)");
    if (!(eps_p > 0.0)) throw std::invalid_argument("PlannerConfig: eps_p must be > 0");
    if (!(goal_bias >= 0.0 && goal_bias <= 1.0))
      throw std::invalid_argument("PlannerConfig: goal_bias must be in [0, 1]");
    if (workspace_min.dim() != workspace_max.dim())
      throw std::invalid_argument("PlannerConfig: workspace bounds dimension mismatch");
    for (int i = 0; i < workspace_min.dim(); ++i)
      if (!(workspace_min[i] < workspace_max[i]))
        throw std::invalid_argument("PlannerConfig: empty workspace box");
  }
  double diagonal() const { return (workspace_max.coords - workspace_min.coords).norm(); }
  double effective_step() const { return step_size > 0.0 ? step_size : 0.05 * diagonal(); }
  double effective_goal_radius() const {
    return goal_radius > 0.0 ? goal_radius : effective_step();
  }
};

struct TreeNode {
  Point config;
  int parent = -1;
  std::vector<double> cached_eps;  // per-obstacle risk of the root-to-node path
  double cached_total = 0.0;
};

/// Uniform sample in the workspace box, except with probability goal_bias
/// the goal itself.
inline Point random_state(const PlannerConfig& cfg, const Point& goal, RngStream& rng) {
  if (rng.uniform() <= cfg.goal_bias) return goal;
  Vec v(cfg.workspace_min.dim());
  for (int i = 0; i < v.size(); ++i) {
    double u = rng.uniform();
    v[i] = cfg.workspace_min[i] + u * (cfg.workspace_max[i] - cfg.workspace_min[i]);
  }
  return Point(v);
}

/// Closest tree node by Euclidean distance; ties go to the lowest
/// insertion index.
inline int nearest_neighbor(const std::vector<TreeNode>& tree, const Point& x) {
  if (tree.empty()) throw std::invalid_argument("nearest_neighbor: empty tree");
  int best = 0;
  double best_d = (tree[0].config.coords - x.coords).norm2();
  for (size_t i = 1; i < tree.size(); ++i) {
    double d = (tree[i].config.coords - x.coords).norm2();
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

/// Steps from x_near toward x_rand by at most eta.
inline Point extend(const Point& x_near, const Point& x_rand, double eta) {
  Vec d = x_rand.coords - x_near.coords;
  double len = d.norm();
  if (len <= eta) return x_rand;
  return Point(x_near.coords + d * (eta / len));
}

struct ExtendResult {
  bool accepted = false;
  double risk = 0.0;               // total risk of root -> near -> new
  int node_index = -1;             // valid when accepted
  std::vector<double> path_eps;    // per-obstacle maxima
};

/// Certifies only the new segment and composes per-obstacle risks with
/// the cached root-to-near values by taking the maximum; accepts iff the
/// composed total stays within eps_safe.
inline ExtendResult try_extend(std::vector<TreeNode>& tree, int near_index, const Point& x_new,
                               const std::vector<PgdfObstacle>& obstacles,
                               const PlannerConfig& cfg) {
  const TreeNode& near = tree[static_cast<size_t>(near_index)];
  ExtendResult res;
  res.path_eps.resize(obstacles.size());
  Polyline seg(std::vector<Point>{near.config, x_new});
  const double per = obstacles.empty()
                         ? cfg.eps_p
                         : cfg.eps_p / static_cast<double>(obstacles.size());
  for (size_t i = 0; i < obstacles.size(); ++i) {
    ObstacleCert c = find_maximal_shadow(obstacles[i], seg, per, cfg.search);
    res.path_eps[i] = std::max(near.cached_eps[i], c.eps_i);
  }
  res.risk = round_up_sum(res.path_eps);
  res.accepted = res.risk <= cfg.eps_safe;
  if (res.accepted) {
    TreeNode node;
    node.config = x_new;
    node.parent = near_index;
    node.cached_eps = res.path_eps;
    node.cached_total = res.risk;
    tree.push_back(std::move(node));
    res.node_index = static_cast<int>(tree.size()) - 1;
  }
  return res;
}

struct PlanResult {
  enum class Status { kFound, kNotFound } status = Status::kNotFound;
  Polyline path;                    // root -> goal-region waypoints
  SafetyCertificate recertification;  // from-scratch certificate for path
  std::vector<TreeNode> tree;
  int iterations = 0;
};

/// SAFE_RRT. Returns a waypoint path whose from-scratch recertification
/// is at most eps_safe, or NOT_FOUND after max_iterations. Throws if the
/// start itself cannot be certified under eps_safe.
inline PlanResult plan(const std::vector<PgdfObstacle>& obstacles, const Point& start,
                       const Point& goal, const PlannerConfig& cfg, RngStream& rng) {
  cfg.validate();
  const double eta = cfg.effective_step();
  const double goal_r = cfg.effective_goal_radius();

  PlanResult res;
  TreeNode root;
  root.config = start;
  root.parent = -1;
  Polyline start_vol(std::vector<Point>{start});
  const double per = obstacles.empty()
                         ? cfg.eps_p
                         : cfg.eps_p / static_cast<double>(obstacles.size());
  for (const auto& o : obstacles) {
    ObstacleCert c = find_maximal_shadow(o, start_vol, per, cfg.search);
    if (c.status == CertStatus::kUncertifiable)
      throw std::invalid_argument("plan: start configuration is uncertifiable (inside '" +
                                  o.id + "')");
    root.cached_eps.push_back(c.eps_i);
  }
  root.cached_total = round_up_sum(root.cached_eps);
  if (root.cached_total > cfg.eps_safe)
    throw std::invalid_argument("plan: start configuration risk exceeds eps_safe");
  res.tree.push_back(root);

  auto path_to = [&](int idx) {
    std::vector<Point> rev;
    for (int i = idx; i >= 0; i = res.tree[static_cast<size_t>(i)].parent)
      rev.push_back(res.tree[static_cast<size_t>(i)].config);
    std::vector<Point> fwd(rev.rbegin(), rev.rend());
    return Polyline(fwd);
  };
  auto try_finish = [&](int idx) -> bool {
    if ((res.tree[static_cast<size_t>(idx)].config.coords - goal.coords).norm() > goal_r)
      return false;
    Polyline candidate = path_to(idx);
    SafetyCertificate cert = find_maximal_shadow_set(obstacles, candidate, cfg.eps_p, cfg.search);
    if (cert.total_eps > cfg.eps_safe) return false;
    res.status = PlanResult::Status::kFound;
    res.path = std::move(candidate);
    res.recertification = std::move(cert);
    return true;
  };

  if (try_finish(0)) return res;

  for (int it = 1; it <= cfg.max_iterations; ++it) {
    res.iterations = it;
    Point x_rand = random_state(cfg, goal, rng);
    int near = nearest_neighbor(res.tree, x_rand);
    Point x_new = extend(res.tree[static_cast<size_t>(near)].config, x_rand, eta);
    if (x_new == res.tree[static_cast<size_t>(near)].config) continue;  // no-op extension
    ExtendResult ext = try_extend(res.tree, near, x_new, obstacles, cfg);
    if (!ext.accepted) continue;
    if (try_finish(ext.node_index)) return res;
  }
  res.status = PlanResult::Status::kNotFound;
  return res;
}

}  // namespace shadowcert
