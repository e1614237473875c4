#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "shadowcert/certify.hpp"
#include "shadowcert/oracle.hpp"

// Online absolute-safety accounting. A ledger tracks, against a lifetime
// contract eps, the risk already spent on the executed prefix plus the
// certified bound on the committed remainder; the invariant
// spent + committed_future <= contract holds after every operation.
//
// The probability already incurred by an executed prefix is not directly
// computable from geometry, so it is attributed conservatively: the
// prefix is charged the difference between the committed certificate and
// a recertification of the remaining suffix under the commitment-time
// beliefs, with each obstacle's suffix risk capped at its committed
// value. Risk transfers from committed_future to spent; it never appears
// or disappears during execution.

namespace shadowcert {

struct ObservationUpdate {
  std::string obstacle_id;
  std::vector<GaussianFace> new_face_posteriors;
  double timestamp = 0.0;
};

struct LedgerEvent {
  std::string op;
  double spent_after = 0.0;
  double committed_future_after = 0.0;
  double value = 0.0;  // op-specific: certificate total, attributed risk, ...
  bool accepted = true;
  std::string note;
};

struct CommitDecision {
  bool accepted = false;
  double sum = 0.0;  // spent + proposed total, the quantity gated by the contract
};

struct ReplanResult {
  SafetyCertificate cert;
  bool accepted = false;
  double sum = 0.0;
};

class RiskLedger {
 public:
  explicit RiskLedger(double contract_eps) : contract_(contract_eps) {
    if (!(contract_eps > 0.0)) throw std::invalid_argument("RiskLedger: contract must be > 0");
  }

  double contract() const { return contract_; }
  double spent() const { return spent_base_ + (committed_total_ - committed_future_); }
  double committed_future() const { return committed_future_; }
  bool invariant_holds() const { return spent_base_ + committed_total_ <= contract_; }
  const std::vector<LedgerEvent>& history() const { return history_; }

  struct Commitment {
    std::vector<PgdfObstacle> beliefs;
    Polyline path;
    SafetyCertificate cert;
    double eps_p = 0.0;
    SearchOptions opts;
    size_t next_waypoint = 1;  // index of the first waypoint not yet reached
    Point position;            // current position on the committed path
  };
  const std::optional<Commitment>& commitment() const { return commitment_; }

  /// Accepts the plan iff risk already spent plus the certificate total
  /// stays within the contract. Rejections mutate nothing but history.
  CommitDecision commit_plan(const SafetyCertificate& cert, std::vector<PgdfObstacle> beliefs,
                             Polyline path, double eps_p, const SearchOptions& opts = {}) {
    CommitDecision d;
    d.sum = std::nextafter(spent() + cert.total_eps,
                           std::numeric_limits<double>::infinity());
    d.accepted = d.sum <= contract_ && cert.certified();
    if (d.accepted) {
      spent_base_ = spent();
      committed_total_ = cert.total_eps;
      committed_future_ = cert.total_eps;
      commitment_.emplace();
      commitment_->beliefs = std::move(beliefs);
      commitment_->path = std::move(path);
      commitment_->cert = cert;
      commitment_->eps_p = eps_p;
      commitment_->opts = opts;
      commitment_->next_waypoint = 1;
      commitment_->position = commitment_->path.waypoints[0];
    }
    log("commit_plan", cert.total_eps, d.accepted,
        d.accepted ? "" : "sum exceeds contract");
    return d;
  }

  /// Moves the execution point along the committed path by one segment
  /// (within the current edge, or exactly to its end). Transfers the
  /// attributed prefix risk from committed_future to spent.
  void advance(const Segment& executed) {
    if (!commitment_) throw std::logic_error("advance: no committed plan");
    Commitment& cm = *commitment_;
    const double tol = 1e-9;
    if ((executed.a.coords - cm.position.coords).norm() > tol)
      throw std::invalid_argument("advance: segment does not start at the current position");
    if (executed.zero_length()) {
      log("advance", 0.0, true, "zero-length");
      return;
    }
    if (cm.next_waypoint >= cm.path.size())
      throw std::invalid_argument("advance: committed trajectory already fully executed");

    // executed.b must lie on [position, next waypoint].
    const Point& wp = cm.path.waypoints[cm.next_waypoint];
    Vec edge = wp.coords - cm.position.coords;
    Vec step = executed.b.coords - cm.position.coords;
    double el = edge.norm();
    double sl = step.norm();
    if (sl > el + tol || (step - edge * (sl / std::max(el, 1e-300))).norm() > tol)
      throw std::invalid_argument("advance: segment leaves the committed trajectory");

    bool reached_wp = (executed.b.coords - wp.coords).norm() <= tol;
    cm.position = reached_wp ? wp : executed.b;
    if (reached_wp) ++cm.next_waypoint;

    double new_future = 0.0;
    if (cm.next_waypoint >= cm.path.size() &&
        (cm.position.coords - cm.path.waypoints.back().coords).norm() <= tol) {
      new_future = 0.0;  // fully executed: nothing left to risk
    } else {
      std::vector<Point> suffix;
      suffix.push_back(cm.position);
      for (size_t i = cm.next_waypoint; i < cm.path.size(); ++i)
        suffix.push_back(cm.path.waypoints[i]);
      Polyline rest(suffix);
      double per = cm.beliefs.empty()
                       ? cm.eps_p
                       : cm.eps_p / static_cast<double>(cm.beliefs.size());
      std::vector<double> eps;
      eps.reserve(cm.cert.per_obstacle.size());
      for (const auto& oc : cm.cert.per_obstacle) {
        const auto it = std::find_if(cm.beliefs.begin(), cm.beliefs.end(),
                                     [&](const PgdfObstacle& o) { return o.id == oc.obstacle_id; });
        if (it == cm.beliefs.end()) {
          eps.push_back(oc.eps_i);  // unknown belief: nothing transfers
          continue;
        }
        ObstacleCert sc = find_maximal_shadow(*it, rest, per, cm.opts);
        eps.push_back(std::min(oc.eps_i, sc.eps_i));
      }
      new_future = round_up_sum(eps);
    }
    if (new_future > committed_future_) new_future = committed_future_;
    double attributed = committed_future_ - new_future;
    committed_future_ = new_future;
    log("advance", attributed, true, "");
  }

  /// Algorithm-2 step: recertifies the remaining volume under updated
  /// beliefs and accepts iff spent risk plus the new bound fits the
  /// contract. A rejected replan leaves the committed plan active.
  ReplanResult replan_online(std::vector<PgdfObstacle> new_beliefs, const Polyline& remaining_vol,
                             double eps_p, const SearchOptions& opts = {}) {
    if (!commitment_) throw std::logic_error("replan_online: no committed plan");
    const double tol = 1e-9;
    if ((remaining_vol.waypoints[0].coords - commitment_->position.coords).norm() > tol)
      throw std::invalid_argument("replan_online: remainder does not start at current position");

    ReplanResult r;
    r.cert = find_maximal_shadow_set(new_beliefs, remaining_vol, eps_p, opts);
    double eps1 = spent();
    r.sum = std::nextafter(eps1 + r.cert.total_eps, std::numeric_limits<double>::infinity());
    r.accepted = r.sum <= contract_ && r.cert.certified();
    if (r.accepted) {
      spent_base_ = eps1;
      committed_total_ = r.cert.total_eps;
      committed_future_ = r.cert.total_eps;
      commitment_->beliefs = std::move(new_beliefs);
      commitment_->path = remaining_vol;
      commitment_->cert = r.cert;
      commitment_->eps_p = eps_p;
      commitment_->opts = opts;
      commitment_->next_waypoint = 1;
      commitment_->position = remaining_vol.waypoints[0];
    }
    log("replan_online", r.cert.total_eps, r.accepted,
        r.accepted ? "" : "sum exceeds contract");
    return r;
  }

  /// Force-installs a plan without the contract gate. Only the policy
  /// simulator uses this, to reproduce what a system that ignores its
  /// ledger would do.
  void force_commit_unchecked(const SafetyCertificate& cert, std::vector<PgdfObstacle> beliefs,
                              Polyline path, double eps_p, const SearchOptions& opts = {}) {
    spent_base_ = spent();
    committed_total_ = cert.total_eps;
    committed_future_ = cert.total_eps;
    commitment_.emplace();
    commitment_->beliefs = std::move(beliefs);
    commitment_->path = std::move(path);
    commitment_->cert = cert;
    commitment_->eps_p = eps_p;
    commitment_->opts = opts;
    commitment_->next_waypoint = 1;
    commitment_->position = commitment_->path.waypoints[0];
    log("force_commit", cert.total_eps, true, "ledger disabled");
  }

 private:
  void log(std::string op, double value, bool accepted, std::string note) {
    LedgerEvent e;
    e.op = std::move(op);
    e.spent_after = spent();
    e.committed_future_after = committed_future_;
    e.value = value;
    e.accepted = accepted;
    e.note = std::move(note);
    history_.push_back(std::move(e));
  }

  double contract_;
  double spent_base_ = 0.0;
  double committed_total_ = 0.0;
  double committed_future_ = 0.0;
  std::optional<Commitment> commitment_;
  std::vector<LedgerEvent> history_;
};

/// Scripted online policy: an initial trajectory plus replan events that
/// fire when the execution reaches a given waypoint (the proposed
/// remainder starts there, so compositions are well-defined whether or
/// not earlier replans were accepted).
struct ReplanEvent {
  Point at_point;
  std::vector<ObservationUpdate> updates;
  Polyline proposed_remainder;
};

struct PolicyScript {
  Polyline initial;
  std::vector<ReplanEvent> events;
};

struct StopTimeOutcome {
  size_t events_before_cut = 0;  // information cut after this many events
  Polyline effective_path;       // what the robot ends up sweeping
  McReport collision;
};

struct PolicySimReport {
  bool ledger_enabled = true;
  bool initial_accepted = false;
  std::vector<bool> event_accepted;
  std::vector<StopTimeOutcome> per_stop_time;
  std::vector<LedgerEvent> ledger_history;
  double contract = 0.0;
};

namespace detail {

inline void apply_updates(std::vector<PgdfObstacle>& beliefs,
                          const std::vector<ObservationUpdate>& updates) {
  for (const auto& u : updates) {
    bool found = false;
    for (auto& o : beliefs)
      if (o.id == u.obstacle_id) {
        o.faces = u.new_face_posteriors;
        o.validate();
        found = true;
      }
    if (!found)
      throw std::invalid_argument("observation update names unknown obstacle '" + u.obstacle_id +
                                  "'");
  }
}

inline size_t waypoint_index(const Polyline& path, const Point& p, size_t from) {
  const double tol = 1e-9;
  for (size_t i = from; i < path.size(); ++i)
    if ((path.waypoints[i].coords - p.coords).norm() <= tol) return i;
  throw std::invalid_argument("replan event point is not a waypoint of the committed path");
}

}  // namespace detail

/// Runs the scripted policy once to fix all accept/reject decisions (they
/// depend only on beliefs and the ledger, never on the realization), then
/// Monte-Carlo evaluates the collision frequency of the effective swept
/// volume under every adversarial stop time: the information stream is
/// cut after k events and the robot finishes its committed plan.
inline PolicySimReport simulate_policy(const std::vector<PgdfObstacle>& ground_truth,
                                       const PolicyScript& script, double contract_eps,
                                       double eps_p, long long trials, RngStream& rng,
                                       bool ledger_enabled, const SearchOptions& opts = {}) {
  PolicySimReport rep;
  rep.ledger_enabled = ledger_enabled;
  rep.contract = contract_eps;

  RiskLedger ledger(contract_eps);
  std::vector<PgdfObstacle> beliefs = ground_truth;

  SafetyCertificate cert0 = find_maximal_shadow_set(beliefs, script.initial, eps_p, opts);
  if (ledger_enabled) {
    rep.initial_accepted = ledger.commit_plan(cert0, beliefs, script.initial, eps_p, opts).accepted;
    if (!rep.initial_accepted) {
      rep.ledger_history = ledger.history();
      return rep;  // the robot never moves; nothing to simulate
    }
  } else {
    ledger.force_commit_unchecked(cert0, beliefs, script.initial, eps_p, opts);
    rep.initial_accepted = true;
  }

  // Decision pass: advance to each event point, apply updates, decide.
  std::vector<Polyline> executed_prefix;  // waypoints swept before event k
  std::vector<Polyline> committed_at;     // committed remainder after event k resolved
  std::vector<Point> path_so_far{script.initial.waypoints[0]};

  auto remainder_of = [](const RiskLedger::Commitment& cm) {
    std::vector<Point> rest{cm.position};
    for (size_t i = cm.next_waypoint; i < cm.path.size(); ++i)
      rest.push_back(cm.path.waypoints[i]);
    return Polyline(rest);
  };
  committed_at.push_back(remainder_of(*ledger.commitment()));

  for (const ReplanEvent& ev : script.events) {
    const auto& cm = *ledger.commitment();
    size_t target = detail::waypoint_index(cm.path, ev.at_point, cm.next_waypoint - 1);
    while (ledger.commitment()->next_waypoint <= target) {
      const auto& c = *ledger.commitment();
      Segment step(c.position, c.path.waypoints[c.next_waypoint]);
      path_so_far.push_back(step.b);
      ledger.advance(step);
    }
    detail::apply_updates(beliefs, ev.updates);

    bool accepted;
    if (ledger_enabled) {
      accepted = ledger.replan_online(beliefs, ev.proposed_remainder, eps_p, opts).accepted;
    } else {
      SafetyCertificate ev_cert =
          find_maximal_shadow_set(beliefs, ev.proposed_remainder, eps_p, opts);
      ledger.force_commit_unchecked(ev_cert, beliefs, ev.proposed_remainder, eps_p, opts);
      accepted = true;
    }
    rep.event_accepted.push_back(accepted);
    executed_prefix.push_back(Polyline(path_so_far));
    committed_at.push_back(remainder_of(*ledger.commitment()));
  }

  // Effective swept volume per stop time: executed prefix up to the cut,
  // then the committed remainder as of the cut, run to completion.
  for (size_t cut = 0; cut <= script.events.size(); ++cut) {
    StopTimeOutcome out;
    out.events_before_cut = cut;
    std::vector<Point> pts = (cut == 0) ? std::vector<Point>{script.initial.waypoints[0]}
                                        : executed_prefix[cut - 1].waypoints;
    const Polyline& rest = committed_at[cut];
    for (size_t i = 0; i < rest.size(); ++i) {
      if (!pts.empty() && (pts.back().coords - rest.waypoints[i].coords).norm() <= 1e-12) continue;
      pts.push_back(rest.waypoints[i]);
    }
    out.effective_path = Polyline(pts);
    RngStream mc_rng = rng.split(1000 + cut);
    out.collision = mc_collision_prob(ground_truth, out.effective_path, trials, mc_rng);
    rep.per_stop_time.push_back(std::move(out));
  }

  rep.ledger_history = ledger.history();
  return rep;
}

}  // namespace shadowcert
