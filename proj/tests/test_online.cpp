#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shadowcert/online.hpp"
#include "shadowcert/scene.hpp"

using namespace shadowcert;

namespace {

SymMatrix offset_noise(double s) {
  SymMatrix m(3);
  m.at(2, 2) = s * s;
  return m;
}

PgdfObstacle wall(const std::string& id, double x0, double x1, double ytop, double s) {
  SymMatrix sig = offset_noise(s);
  return PgdfObstacle(id, {GaussianFace(HomoVec(0.0, 1.0, -ytop), sig),
                           GaussianFace(HomoVec(-1.0, 0.0, x0), sig),
                           GaussianFace(HomoVec(1.0, 0.0, -x1), sig)});
}

SafetyCertificate synthetic_cert(double total) {
  SafetyCertificate c;
  ObstacleCert oc;
  oc.obstacle_id = "x";
  oc.eps_i = total;
  oc.status = CertStatus::kCertified;
  oc.per_face_q = {chi2_quantile(1.0 - total, 3)};
  c.per_obstacle.push_back(oc);
  c.total_eps = total;
  return c;
}

Scene load_fixture(const char* name) { return load_scene(std::string(FIXTURE_DIR) + "/" + name); }

}  // namespace

TEST_CASE("commit_plan accounting") {
  Polyline path({Point(0.0, 0.0), Point(1.0, 0.0)});

  SECTION("fresh ledger accepts a certificate within the contract") {
    RiskLedger ledger(0.005);
    auto d = ledger.commit_plan(synthetic_cert(0.0026), {}, path, 1e-4);
    CHECK(d.accepted);
    CHECK(ledger.spent() == 0.0);
    CHECK(ledger.committed_future() == 0.0026);
    CHECK(ledger.invariant_holds());
  }

  SECTION("the half-plus-half cheat is rejected") {
    RiskLedger ledger(0.3);
    REQUIRE(ledger.commit_plan(synthetic_cert(0.3 - 1e-12), {}, path, 1e-4).accepted);
    // pretend the whole committed risk was spent
    ledger.advance(Segment(Point(0.0, 0.0), Point(1.0, 0.0)));
    CHECK(ledger.spent() == Catch::Approx(0.3).margin(1e-9));
    auto d = ledger.replan_online({}, Polyline({Point(1.0, 0.0), Point(2.0, 0.0)}), 1e-4);
    // empty obstacle set: future risk 0 -> accepted
    CHECK(d.accepted);
    // but a plan whose certificate alone fits cannot be layered on spent risk
    RiskLedger l2(0.3);
    REQUIRE(l2.commit_plan(synthetic_cert(0.29), {}, path, 1e-4).accepted);
    l2.advance(Segment(Point(0.0, 0.0), Point(1.0, 0.0)));
    auto d2 = l2.commit_plan(synthetic_cert(0.29), {}, path, 1e-4);
    CHECK_FALSE(d2.accepted);
    CHECK(d2.sum >= 0.58);
    CHECK(l2.invariant_holds());
  }

  SECTION("empty certificate is accepted at zero spent") {
    RiskLedger ledger(0.005);
    SafetyCertificate empty;
    empty.total_eps = 0.0;
    CHECK(ledger.commit_plan(empty, {}, path, 1e-4).accepted);
  }

  SECTION("rejections leave the accounting untouched") {
    RiskLedger ledger(0.005);
    auto d = ledger.commit_plan(synthetic_cert(0.006), {}, path, 1e-4);
    CHECK_FALSE(d.accepted);
    CHECK(ledger.spent() == 0.0);
    CHECK(ledger.committed_future() == 0.0);
    CHECK_FALSE(ledger.commitment().has_value());
  }
}

TEST_CASE("advance transfers risk without creating or destroying it") {
  // One wall under the first leg; the suffix after the leg is cheap.
  std::vector<PgdfObstacle> obstacles{wall("w", 0.7, 1.3, 0.9, 0.039)};
  Polyline path({Point(0.0, 2.2), Point(0.2, 1.0), Point(1.8, 1.0), Point(2.0, 2.2),
                 Point(4.0, 2.2)});
  const double eps_p = 1e-5;
  SafetyCertificate cert = find_maximal_shadow_set(obstacles, path, eps_p);
  RiskLedger ledger(0.3);
  REQUIRE(ledger.commit_plan(cert, obstacles, path, eps_p).accepted);
  double budget0 = ledger.spent() + ledger.committed_future();

  SECTION("zero-length advance is a no-op") {
    ledger.advance(Segment(Point(0.0, 2.2), Point(0.0, 2.2)));
    CHECK(ledger.spent() == 0.0);
    CHECK(ledger.committed_future() == cert.total_eps);
  }

  SECTION("off-trajectory segments are rejected") {
    CHECK_THROWS_AS(ledger.advance(Segment(Point(0.0, 2.2), Point(1.0, 2.2))),
                    std::invalid_argument);
    CHECK_THROWS_AS(ledger.advance(Segment(Point(5.0, 5.0), Point(6.0, 5.0))),
                    std::invalid_argument);
  }

  SECTION("full execution moves the entire budget to spent") {
    for (size_t i = 0; i + 1 < path.size(); ++i) {
      ledger.advance(Segment(path.waypoints[i], path.waypoints[i + 1]));
      CHECK(ledger.invariant_holds());
      CHECK(ledger.spent() + ledger.committed_future() ==
            Catch::Approx(budget0).margin(1e-15));
    }
    CHECK(ledger.committed_future() == 0.0);
    CHECK(ledger.spent() == Catch::Approx(cert.total_eps).margin(1e-15));
  }

  SECTION("prefix attribution matches the suffix recertification") {
    // advance across the risky leg (waypoints 0..3)
    for (size_t i = 0; i < 3; ++i)
      ledger.advance(Segment(path.waypoints[i], path.waypoints[i + 1]));
    // independent computation: committed minus capped suffix optimum
    Polyline suffix({path.waypoints[3], path.waypoints[4]});
    ObstacleCert sc = find_maximal_shadow(obstacles[0], suffix, eps_p);
    double expect_future = std::min(cert.per_obstacle[0].eps_i, sc.eps_i);
    expect_future = round_up_sum(std::vector<double>{expect_future});
    CHECK(ledger.committed_future() == Catch::Approx(expect_future).margin(1e-15));
    CHECK(ledger.spent() ==
          Catch::Approx(cert.total_eps - expect_future).margin(1e-12));
    // the wall is behind us: almost everything is spent
    CHECK(ledger.spent() >= 0.9 * cert.total_eps);
  }

  SECTION("partial advance within an edge stays on the path") {
    ledger.advance(Segment(Point(0.0, 2.2), Point(0.1, 1.6)));  // half of edge 0
    CHECK(ledger.invariant_holds());
    ledger.advance(Segment(Point(0.1, 1.6), Point(0.2, 1.0)));  // rest of edge 0
    CHECK(ledger.invariant_holds());
    CHECK(ledger.spent() + ledger.committed_future() ==
          Catch::Approx(budget0).margin(1e-15));
  }
}

TEST_CASE("replan_online") {
  Scene scene = load_fixture("fig9.json");
  REQUIRE(scene.online_script.has_value());
  const PolicyScript& script = *scene.online_script;
  const double eps_p = 1e-6;

  RiskLedger ledger(scene.online_contract_eps);
  SafetyCertificate cert0 = find_maximal_shadow_set(scene.obstacles, script.initial, eps_p);
  REQUIRE(ledger.commit_plan(cert0, scene.obstacles, script.initial, eps_p).accepted);
  // walk to the event point (2, 2.2) = waypoint 3
  for (size_t i = 0; i < 3; ++i)
    ledger.advance(Segment(script.initial.waypoints[i], script.initial.waypoints[i + 1]));

  SECTION("a refining update lets the shorter remainder through") {
    std::vector<PgdfObstacle> updated = scene.obstacles;
    detail::apply_updates(updated, script.events[0].updates);
    ReplanResult r = ledger.replan_online(updated, script.events[0].proposed_remainder, eps_p);
    CHECK(r.accepted);
    CHECK(ledger.invariant_holds());
    CHECK(ledger.committed_future() == r.cert.total_eps);
    // under the refined beliefs the dip is at the floor for o2
    for (const auto& c : r.cert.per_obstacle)
      CHECK(c.eps_i <= 1e-6);
  }

  SECTION("a widening update forces a rejection and keeps the old plan") {
    std::vector<PgdfObstacle> widened = scene.obstacles;
    for (auto& o : widened)
      if (o.id == "o2") o = wall("o2", 2.7, 3.3, 0.9, 0.2);
    double spent_before = ledger.spent();
    double future_before = ledger.committed_future();
    ReplanResult r = ledger.replan_online(widened, script.events[0].proposed_remainder, eps_p);
    CHECK_FALSE(r.accepted);
    CHECK(ledger.spent() == spent_before);
    CHECK(ledger.committed_future() == future_before);
    CHECK(ledger.commitment()->path.size() == script.initial.size());
    CHECK(ledger.invariant_holds());
  }

  SECTION("a no-op update matches committing the unchanged remainder") {
    std::vector<Point> rest{ledger.commitment()->position};
    for (size_t i = ledger.commitment()->next_waypoint; i < script.initial.size(); ++i)
      rest.push_back(script.initial.waypoints[i]);
    Polyline remainder(rest);
    ReplanResult r = ledger.replan_online(scene.obstacles, remainder, eps_p);
    CHECK(r.accepted);  // same beliefs, same remainder: spent + suffix <= committed total
    CHECK(ledger.invariant_holds());
  }
}

TEST_CASE("ledger invariant over randomized operation sequences") {
  RngStream rng(91);
  std::vector<PgdfObstacle> obstacles{wall("a", 0.7, 1.3, 0.9, 0.04),
                                      wall("b", 2.7, 3.3, 0.9, 0.08)};
  const double eps_p = 1e-4;
  int sequences = 0;
  for (int seq = 0; seq < 300; ++seq) {
    double contract = 0.05 + 0.3 * rng.uniform();
    RiskLedger ledger(contract);
    // random initial path along y in [1, 2.5]
    double y0 = 1.0 + 1.5 * rng.uniform();
    Polyline path({Point(0.0, y0), Point(2.0, y0), Point(4.0, y0)});
    SafetyCertificate cert = find_maximal_shadow_set(obstacles, path, eps_p);
    bool committed = ledger.commit_plan(cert, obstacles, path, eps_p).accepted;
    REQUIRE(ledger.invariant_holds());
    if (!committed) continue;
    ++sequences;
    for (int op = 0; op < 6; ++op) {
      const auto& cm = *ledger.commitment();
      double pick = rng.uniform();
      if (pick < 0.5 && cm.next_waypoint < cm.path.size()) {
        ledger.advance(Segment(cm.position, cm.path.waypoints[cm.next_waypoint]));
      } else if (cm.next_waypoint < cm.path.size()) {
        // replan the remainder at a random altitude
        double y = 1.0 + 1.5 * rng.uniform();
        std::vector<Point> rest{cm.position};
        for (size_t i = cm.next_waypoint; i < cm.path.size(); ++i)
          rest.push_back(Point(cm.path.waypoints[i][0], y));
        if ((rest[0].coords - rest[1].coords).norm() < 1e-12) continue;
        ledger.replan_online(obstacles, Polyline(rest), eps_p);
      }
      REQUIRE(ledger.invariant_holds());
      REQUIRE(ledger.spent() >= 0.0);
      REQUIRE(ledger.committed_future() >= 0.0);
    }
  }
  CHECK(sequences > 100);  // the generator must exercise real commitments
}

TEST_CASE("simulate_policy on the cheating fixture at reduced scale") {
  Scene scene = load_fixture("fig7.json");
  REQUIRE(scene.online_script.has_value());
  const long long trials = 20000;
  const double eps_p = 1e-5;

  SECTION("with the ledger disabled some stop time violates the contract") {
    RngStream rng(7001);
    PolicySimReport rep = simulate_policy(scene.obstacles, *scene.online_script,
                                          scene.online_contract_eps, eps_p, trials, rng, false);
    REQUIRE(rep.per_stop_time.size() == 4);
    for (bool acc : rep.event_accepted) CHECK(acc);
    double worst = 0.0;
    for (const auto& st : rep.per_stop_time) worst = std::max(worst, st.collision.p_hat);
    CHECK(worst > scene.online_contract_eps + 5.0 * rep.per_stop_time.back().collision.stderr_est());
    // the composed true risk of the fully cheated execution is ~0.447
    CHECK(rep.per_stop_time.back().collision.p_hat == Catch::Approx(0.447).margin(0.02));
  }

  SECTION("with the ledger enabled every stop time respects the contract") {
    RngStream rng(7002);
    PolicySimReport rep = simulate_policy(scene.obstacles, *scene.online_script,
                                          scene.online_contract_eps, eps_p, trials, rng, true);
    CHECK(rep.initial_accepted);
    REQUIRE(rep.event_accepted.size() == 3);
    for (bool acc : rep.event_accepted) CHECK_FALSE(acc);
    for (const auto& st : rep.per_stop_time)
      CHECK(st.collision.p_hat <= scene.online_contract_eps + 3.0 * st.collision.stderr_est());
    // the first rejection is a genuine Eq.-style sum violation: the
    // proposal alone fits the contract, spent + proposal does not
    bool found_sum_rejection = false;
    for (const auto& e : rep.ledger_history)
      if (e.op == "replan_online" && !e.accepted && e.value <= scene.online_contract_eps)
        found_sum_rejection = true;
    CHECK(found_sum_rejection);
  }

  SECTION("a policy that never replans reduces to offline soundness") {
    PolicyScript no_replan{scene.online_script->initial, {}};
    RngStream rng(7003);
    PolicySimReport rep = simulate_policy(scene.obstacles, no_replan,
                                          scene.online_contract_eps, eps_p, trials, rng, true);
    REQUIRE(rep.per_stop_time.size() == 1);
    SafetyCertificate cert =
        find_maximal_shadow_set(scene.obstacles, no_replan.initial, eps_p);
    CHECK(rep.per_stop_time[0].collision.p_hat <=
          cert.total_eps + 3.0 * rep.per_stop_time[0].collision.stderr_est());
  }
}

TEST_CASE("fig9 replan end to end") {
  Scene scene = load_fixture("fig9.json");
  RngStream rng(7004);
  PolicySimReport rep = simulate_policy(scene.obstacles, *scene.online_script,
                                        scene.online_contract_eps, 1e-6, 5000, rng, true);
  CHECK(rep.initial_accepted);
  REQUIRE(rep.event_accepted.size() == 1);
  CHECK(rep.event_accepted[0]);  // the refined posterior admits the shorter path
  // ledger invariant held throughout
  for (const auto& e : rep.ledger_history)
    CHECK(e.spent_after + e.committed_future_after <= scene.online_contract_eps + 1e-12);
  // the accepted effective path is the shorter one
  CHECK(rep.per_stop_time[1].effective_path.length() <
        rep.per_stop_time[0].effective_path.length());
}
