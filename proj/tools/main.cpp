// shadowcert CLI: certify trajectories against uncertain polytopes, plan
// with the risk-constrained RRT, run online-safety simulations, validate
// certificates by Monte-Carlo, render scenes, and fit PGDF obstacles from
// segmented point clouds.
//
// Exit codes: 0 success / gate passed, 1 gate failed, 2 input error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "shadowcert/shadowcert.hpp"

namespace sc = shadowcert;
using nlohmann::json;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitGateFailed = 1;
constexpr int kExitInputError = 2;

struct CertifyArgs {
  std::string scene_path;
  double eps_precision = 1e-4;
  double eps_floor = 1e-9;
  bool log_schedule = false;
  bool uniform = false;
  std::optional<double> max_risk;
  std::string cert_out, report_out;
};

int run_certify(const CertifyArgs& a) {
  sc::Scene scene = sc::load_scene(a.scene_path);
  if (!scene.trajectory) {
    std::cerr << "error: scene has no trajectory to certify\n";
    return kExitInputError;
  }
  sc::SearchOptions opts;
  opts.eps_floor = a.eps_floor;
  opts.log_schedule = a.log_schedule;
  sc::SafetyCertificate cert =
      a.uniform ? sc::find_uniform_shadow_set(scene.obstacles, *scene.trajectory,
                                              a.eps_precision, opts)
                : sc::find_maximal_shadow_set(scene.obstacles, *scene.trajectory,
                                              a.eps_precision, opts);

  std::ostringstream rep;
  rep << "certification report (" << (a.uniform ? "uniform" : "optimal") << " allocation)\n";
  rep << "  volume digest:  " << cert.volume_digest << "\n";
  rep << "  eps precision:  " << cert.eps_precision << "\n";
  for (const auto& c : cert.per_obstacle) {
    rep << "  obstacle " << c.obstacle_id << ": eps_i = " << c.eps_i << "  ["
        << sc::to_string(c.status) << ", " << c.intersection_calls << " intersection calls]\n";
  }
  rep << "  total risk bound: " << cert.total_eps << "\n";
  rep << "  total intersection calls: " << cert.total_calls() << "\n";
  if (a.max_risk)
    rep << "  gate --max-risk " << *a.max_risk << ": "
        << (cert.total_eps <= *a.max_risk ? "PASS" : "FAIL") << "\n";
  std::cout << rep.str();
  if (!a.report_out.empty()) sc::write_text_file(a.report_out, rep.str());
  if (!a.cert_out.empty())
    sc::write_text_file(a.cert_out, sc::certificate_to_json(cert).dump(2) + "\n");

  if (a.max_risk && cert.total_eps > *a.max_risk) return kExitGateFailed;
  return kExitPass;
}

struct PlanArgs {
  std::string scene_path;
  std::uint64_t seed = 1;
  std::string waypoints_out, cert_out;
};

int run_plan(const PlanArgs& a) {
  sc::Scene scene = sc::load_scene(a.scene_path);
  if (!scene.planner) {
    std::cerr << "error: scene has no planner configuration\n";
    return kExitInputError;
  }
  sc::RngStream rng(a.seed);
  sc::PlanResult res =
      sc::plan(scene.obstacles, scene.planner->start, scene.planner->goal,
               scene.planner->config, rng);
  if (res.status != sc::PlanResult::Status::kFound) {
    std::cout << "NOT_FOUND after " << res.iterations << " iterations (tree size "
              << res.tree.size() << ")\n";
    return kExitGateFailed;
  }
  std::cout << "path found: " << res.path.size() << " waypoints, recertified total risk "
            << res.recertification.total_eps << " (<= eps_safe "
            << scene.planner->config.eps_safe << "), tree size " << res.tree.size() << "\n";
  for (const auto& p : res.path.waypoints) {
    std::cout << " ";
    for (int i = 0; i < p.dim(); ++i) std::cout << " " << p[i];
    std::cout << "\n";
  }
  if (!a.waypoints_out.empty()) {
    json wj = sc::detail::dump_polyline(res.path);
    wj["recertified_total_eps"] = res.recertification.total_eps;
    sc::write_text_file(a.waypoints_out, wj.dump(2) + "\n");
  }
  if (!a.cert_out.empty())
    sc::write_text_file(a.cert_out,
                        sc::certificate_to_json(res.recertification).dump(2) + "\n");
  return kExitPass;
}

struct SimArgs {
  std::string scene_path;
  long long trials = 100000;
  std::uint64_t seed = 1;
  bool disable_ledger = false;
  double eps_precision = 1e-4;
  std::string report_out;
};

int run_simulate(const SimArgs& a) {
  sc::Scene scene = sc::load_scene(a.scene_path);
  if (!scene.online_script) {
    std::cerr << "error: scene has no online script\n";
    return kExitInputError;
  }
  sc::RngStream rng(a.seed);
  sc::PolicySimReport rep =
      sc::simulate_policy(scene.obstacles, *scene.online_script, scene.online_contract_eps,
                          a.eps_precision, a.trials, rng, !a.disable_ledger);

  std::cout << "online simulation (" << (rep.ledger_enabled ? "ledger enforced" : "LEDGER DISABLED")
            << "), contract eps = " << rep.contract << "\n";
  std::cout << "  initial commitment: " << (rep.initial_accepted ? "accepted" : "REJECTED") << "\n";
  for (size_t k = 0; k < rep.event_accepted.size(); ++k)
    std::cout << "  replan event " << (k + 1) << ": "
              << (rep.event_accepted[k] ? "accepted" : "rejected") << "\n";
  bool any_violation = false;
  for (const auto& st : rep.per_stop_time) {
    double se = st.collision.stderr_est();
    bool violated = st.collision.p_hat > rep.contract + 3.0 * se;
    any_violation = any_violation || violated;
    std::cout << "  stop time " << st.events_before_cut << ": failure frequency "
              << st.collision.p_hat << " (stderr " << se << ", contract " << rep.contract << ")"
              << (violated ? "  CONTRACT VIOLATED" : "") << "\n";
  }
  for (const auto& e : rep.ledger_history)
    std::cout << "  ledger: " << e.op << " value=" << e.value
              << " spent=" << e.spent_after << " future=" << e.committed_future_after
              << (e.accepted ? "" : " [rejected]") << (e.note.empty() ? "" : " (" + e.note + ")")
              << "\n";

  if (!a.report_out.empty()) {
    json rj;
    rj["ledger_enabled"] = rep.ledger_enabled;
    rj["contract_eps"] = rep.contract;
    rj["initial_accepted"] = rep.initial_accepted;
    rj["event_accepted"] = rep.event_accepted;
    json stops = json::array();
    for (const auto& st : rep.per_stop_time)
      stops.push_back(json{{"events_before_cut", st.events_before_cut},
                           {"collision", sc::mc_report_to_json(st.collision)}});
    rj["per_stop_time"] = stops;
    rj["ledger_history"] = sc::ledger_history_to_json(rep.ledger_history);
    sc::write_text_file(a.report_out, rj.dump(2) + "\n");
  }
  return any_violation ? kExitGateFailed : kExitPass;
}

struct RenderArgs {
  std::string scene_path;
  std::string eps_list;
  std::string cert_path;
  std::vector<double> window;
  int resolution = 256;
  std::string out;
};

int run_render(const RenderArgs& a) {
  sc::Scene scene = sc::load_scene(a.scene_path);
  if (scene.dimension != 2) {
    std::cerr << "error: rendering needs a 2-D scene\n";
    return kExitInputError;
  }
  std::vector<std::vector<double>> levels;
  if (!a.cert_path.empty()) {
    std::ifstream in(a.cert_path);
    if (!in) {
      std::cerr << "error: cannot open certificate '" << a.cert_path << "'\n";
      return kExitInputError;
    }
    json cj;
    in >> cj;
    sc::SafetyCertificate cert = sc::certificate_from_json(cj);
    for (const auto& o : scene.obstacles) {
      bool found = false;
      for (const auto& c : cert.per_obstacle)
        if (c.obstacle_id == o.id) {
          levels.push_back({c.eps_i});
          found = true;
        }
      if (!found) {
        std::cerr << "error: certificate has no entry for obstacle '" << o.id << "'\n";
        return kExitInputError;
      }
    }
  } else {
    std::vector<double> shared;
    std::stringstream ss(a.eps_list.empty() ? std::string("0.5,0.1,0.01") : a.eps_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) shared.push_back(std::stod(tok));
    levels.push_back(shared);
  }

  sc::Window2d window;
  if (a.window.size() == 4) {
    window = {a.window[0], a.window[1], a.window[2], a.window[3]};
  } else if (scene.planner) {
    window = {scene.planner->config.workspace_min[0], scene.planner->config.workspace_min[1],
              scene.planner->config.workspace_max[0], scene.planner->config.workspace_max[1]};
  } else if (scene.trajectory) {
    double margin = 2.0;
    double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
    for (const auto& p : scene.trajectory->waypoints) {
      x0 = std::min(x0, p[0]); x1 = std::max(x1, p[0]);
      y0 = std::min(y0, p[1]); y1 = std::max(y1, p[1]);
    }
    window = {x0 - margin, y0 - margin, x1 + margin, y1 + margin};
  } else {
    std::cerr << "error: no --window and the scene implies none\n";
    return kExitInputError;
  }

  const sc::Polyline* traj = scene.trajectory ? &*scene.trajectory : nullptr;
  std::string svg = sc::render_svg(scene.obstacles, levels, window, a.resolution, traj);
  sc::write_text_file(a.out, svg);
  std::cout << "wrote " << a.out << " (" << svg.size() << " bytes)\n";
  return kExitPass;
}

struct McValidateArgs {
  std::string scene_path;
  std::string cert_path;
  long long trials = 100000;
  std::uint64_t seed = 1;
  std::string report_out;
};

int run_mc_validate(const McValidateArgs& a) {
  sc::Scene scene = sc::load_scene(a.scene_path);
  if (!scene.trajectory) {
    std::cerr << "error: scene has no trajectory\n";
    return kExitInputError;
  }
  std::ifstream in(a.cert_path);
  if (!in) {
    std::cerr << "error: cannot open certificate '" << a.cert_path << "'\n";
    return kExitInputError;
  }
  json cj;
  try {
    in >> cj;
  } catch (const json::exception& e) {
    std::cerr << "error: certificate is not valid JSON: " << e.what() << "\n";
    return kExitInputError;
  }
  sc::SafetyCertificate cert = sc::certificate_from_json(cj);
  if (cert.volume_digest != sc::polyline_digest(*scene.trajectory)) {
    std::cerr << "error: certificate volume digest does not match the scene trajectory\n";
    return kExitInputError;
  }
  sc::RngStream rng(a.seed);
  sc::McReport mc = sc::mc_collision_prob(scene.obstacles, *scene.trajectory, a.trials, rng);
  double se = mc.stderr_est();
  bool consistent = mc.p_hat <= cert.total_eps + 3.0 * se;
  std::cout << "mc-validate: p_hat = " << mc.p_hat << " (" << mc.hits << "/" << mc.trials
            << ", stderr " << se << ", CP upper " << mc.upper_ci << ") vs certified bound "
            << cert.total_eps << " -> " << (consistent ? "CONSISTENT" : "REFUTED") << "\n";
  if (!a.report_out.empty()) {
    json rj = sc::mc_report_to_json(mc);
    rj["certified_total_eps"] = cert.total_eps;
    rj["consistent"] = consistent;
    sc::write_text_file(a.report_out, rj.dump(2) + "\n");
  }
  return consistent ? kExitPass : kExitGateFailed;
}

struct FitArgs {
  std::string scene_path;
  std::string out;
};

int run_fit(const FitArgs& a) {
  sc::Scene scene = sc::load_scene(a.scene_path);
  if (scene.clouds.empty()) {
    std::cerr << "error: scene has no point clouds to fit\n";
    return kExitInputError;
  }
  sc::Scene fitted = scene;
  for (const auto& spec : scene.clouds) {
    sc::PgdfObstacle o;
    o.id = spec.obstacle_id;
    for (const auto& cloud : spec.faces) o.faces.push_back(sc::fit_face(cloud));
    o.validate();
    bool replaced = false;
    for (auto& existing : fitted.obstacles)
      if (existing.id == o.id) {
        existing = o;
        replaced = true;
      }
    if (!replaced) fitted.obstacles.push_back(std::move(o));
    std::cout << "fitted obstacle '" << spec.obstacle_id << "' from " << spec.faces.size()
              << " face clouds\n";
  }
  fitted.clouds.clear();
  json out = sc::scene_to_json(fitted);
  sc::write_text_file(a.out, out.dump(2) + "\n");
  std::cout << "wrote " << a.out << "\n";
  return kExitPass;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"epsilon-shadow safety certification for uncertain polytopal obstacles"};
  app.require_subcommand(1);

  CertifyArgs cert_args;
  auto* certify = app.add_subcommand("certify", "certify a scene trajectory");
  certify->add_option("scene", cert_args.scene_path, "scene file")->required();
  certify->add_option("--eps-precision", cert_args.eps_precision,
                      "total additive precision of the risk search");
  certify->add_option("--eps-floor", cert_args.eps_floor, "per-obstacle risk floor");
  certify->add_flag("--log-schedule", cert_args.log_schedule, "bisect on log(eps)");
  certify->add_flag("--uniform-allocation", cert_args.uniform,
                    "charge every obstacle the same risk (baseline)");
  double max_risk_val = 0.0;
  auto* gate = certify->add_option("--max-risk", max_risk_val,
                                   "exit 1 unless total risk is at most this");
  certify->add_option("--cert-out", cert_args.cert_out, "write certificate JSON here");
  certify->add_option("--report-out", cert_args.report_out, "write the text report here");

  PlanArgs plan_args;
  auto* planc = app.add_subcommand("plan", "run the risk-constrained RRT");
  planc->add_option("scene", plan_args.scene_path, "scene file")->required();
  planc->add_option("--seed", plan_args.seed, "rng seed");
  planc->add_option("--waypoints-out", plan_args.waypoints_out, "write the waypoint path here");
  planc->add_option("--cert-out", plan_args.cert_out, "write the recertification here");

  SimArgs sim_args;
  auto* sim = app.add_subcommand("simulate-online", "run the scripted online policy");
  sim->add_option("scene", sim_args.scene_path, "scene file")->required();
  sim->add_option("--trials", sim_args.trials, "Monte-Carlo trials per stop time");
  sim->add_option("--seed", sim_args.seed, "rng seed");
  sim->add_option("--eps-precision", sim_args.eps_precision, "certification precision");
  sim->add_flag("--disable-ledger", sim_args.disable_ledger,
                "accept every replan, ignoring the risk ledger");
  sim->add_option("--report-out", sim_args.report_out, "write the JSON report here");

  RenderArgs render_args;
  auto* render = app.add_subcommand("render", "render the scene to SVG");
  render->add_option("scene", render_args.scene_path, "scene file")->required();
  render->add_option("--eps-list", render_args.eps_list, "comma-separated shadow risk levels");
  render->add_option("--cert", render_args.cert_path, "render the shadows of this certificate");
  render->add_option("--window", render_args.window, "x0 y0 x1 y1")->expected(4);
  render->add_option("--resolution", render_args.resolution, "contour grid resolution");
  render->add_option("--out", render_args.out, "output SVG path")->required();

  McValidateArgs mc_args;
  auto* mcv = app.add_subcommand("mc-validate", "Monte-Carlo check of a certificate");
  mcv->add_option("scene", mc_args.scene_path, "scene file")->required();
  mcv->add_option("--cert", mc_args.cert_path, "certificate JSON")->required();
  mcv->add_option("--trials", mc_args.trials, "Monte-Carlo trials");
  mcv->add_option("--seed", mc_args.seed, "rng seed");
  mcv->add_option("--report-out", mc_args.report_out, "write the JSON report here");

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "fit PGDF obstacles from segmented point clouds");
  fit->add_option("scene", fit_args.scene_path, "scene file with clouds")->required();
  fit->add_option("--out", fit_args.out, "output scene path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*certify) {
      if (*gate) cert_args.max_risk = max_risk_val;
      return run_certify(cert_args);
    }
    if (*planc) return run_plan(plan_args);
    if (*sim) return run_simulate(sim_args);
    if (*render) return run_render(render_args);
    if (*mcv) return run_mc_validate(mc_args);
    if (*fit) return run_fit(fit_args);
  } catch (const sc::SceneError& e) {
    std::cerr << "scene error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
