#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "shadowcert/online.hpp"
#include "shadowcert/planner.hpp"

// Scene files: one self-contained JSON document holding the PGDF
// obstacles (covariances row-major with explicit dimension), an optional
// trajectory, optional planner setup, an optional online script, and
// optional per-face point clouds for fitting. Validation errors name the
// offending field by path. Numeric fields round-trip exactly (values are
// emitted with shortest exact decimal representation).

namespace shadowcert {

using nlohmann::json;

struct SceneError : std::runtime_error {
  explicit SceneError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PlannerSetup {
  PlannerConfig config;
  Point start, goal;
};

struct CloudSpec {
  std::string obstacle_id;
  std::vector<FacePointCloud> faces;
};

struct Scene {
  int dimension = 2;
  std::vector<PgdfObstacle> obstacles;
  std::optional<Polyline> trajectory;
  std::optional<PlannerSetup> planner;
  std::optional<PolicyScript> online_script;
  double online_contract_eps = 0.0;
  std::vector<CloudSpec> clouds;
};

namespace detail {

[[noreturn]] inline void fail(const std::string& path, const std::string& what) {
  throw SceneError(path + ": " + what);
}

inline const json& need(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) fail(path + "." + key, "missing required field");
  return *it;
}

inline double need_num(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "must be finite");
  return v;
}

inline Vec parse_vec(const json& j, int n, const std::string& path) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    fail(path, "expected an array of " + std::to_string(n) + " numbers");
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = need_num(j[static_cast<size_t>(i)], path + "[" + std::to_string(i) + "]");
  return v;
}

inline Point parse_point(const json& j, int d, const std::string& path) {
  return Point(parse_vec(j, d, path));
}

inline Polyline parse_polyline(const json& j, int d, const std::string& path) {
  const json& wp = need(j, "waypoints", path);
  if (!wp.is_array() || wp.empty()) fail(path + ".waypoints", "expected a nonempty array");
  std::vector<Point> pts;
  for (size_t i = 0; i < wp.size(); ++i)
    pts.push_back(parse_point(wp[i], d, path + ".waypoints[" + std::to_string(i) + "]"));
  return Polyline(pts);
}

inline GaussianFace parse_face(const json& j, int hd, const std::string& path) {
  Vec mu = parse_vec(need(j, "mu", path), hd, path + ".mu");
  const json& sj = need(j, "sigma", path);
  if (!sj.is_array() || static_cast<int>(sj.size()) != hd * hd)
    fail(path + ".sigma", "expected " + std::to_string(hd * hd) + " row-major entries");
  std::vector<double> entries(static_cast<size_t>(hd * hd));
  for (int i = 0; i < hd * hd; ++i)
    entries[static_cast<size_t>(i)] =
        need_num(sj[static_cast<size_t>(i)], path + ".sigma[" + std::to_string(i) + "]");
  SymMatrix sigma;
  try {
    sigma = SymMatrix::from_rows(hd, entries.data());
  } catch (const std::exception& e) {
    fail(path + ".sigma", e.what());
  }
  if (!is_psd(sigma)) {
    EigenSym eig = eigen_sym(sigma);
    std::ostringstream os;
    os << "not positive semidefinite (min eigenvalue " << eig.values[0] << ")";
    fail(path + ".sigma", os.str());
  }
  return GaussianFace(HomoVec(mu), sigma);
}

inline json dump_vec(const Vec& v) {
  json j = json::array();
  for (int i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline json dump_polyline(const Polyline& p) {
  json wps = json::array();
  for (const Point& pt : p.waypoints) wps.push_back(dump_vec(pt.coords));
  return json{{"waypoints", wps}};
}

}  // namespace detail

inline Scene parse_scene(const json& root) {
  using detail::fail;
  using detail::need;
  Scene s;
  const json& dj = need(root, "dimension", "scene");
  if (!dj.is_number_integer()) fail("scene.dimension", "expected an integer");
  s.dimension = dj.get<int>();
  if (s.dimension != 2 && s.dimension != 3) fail("scene.dimension", "must be 2 or 3");
  const int hd = s.dimension + 1;

  const json& obs = need(root, "obstacles", "scene");
  if (!obs.is_array()) fail("scene.obstacles", "expected an array");
  std::set<std::string> seen_ids;
  for (size_t i = 0; i < obs.size(); ++i) {
    std::string path = "scene.obstacles[" + std::to_string(i) + "]";
    const json& oj = obs[i];
    const json& idj = need(oj, "id", path);
    if (!idj.is_string()) fail(path + ".id", "expected a string");
    PgdfObstacle o;
    o.id = idj.get<std::string>();
    if (!seen_ids.insert(o.id).second) fail(path + ".id", "duplicate obstacle id '" + o.id + "'");
    const json& fj = need(oj, "faces", path);
    if (!fj.is_array() || fj.empty()) fail(path + ".faces", "expected a nonempty array");
    for (size_t f = 0; f < fj.size(); ++f)
      o.faces.push_back(detail::parse_face(fj[f], hd, path + ".faces[" + std::to_string(f) + "]"));
    if (oj.contains("joint_sigma")) {
      const json& jj = oj["joint_sigma"];
      int n = static_cast<int>(o.faces.size()) * hd;
      if (!jj.is_array() || static_cast<int>(jj.size()) != n * n)
        fail(path + ".joint_sigma", "expected " + std::to_string(n * n) + " row-major entries");
      JointCovariance jc;
      jc.dim = n;
      for (size_t k = 0; k < jj.size(); ++k)
        jc.entries.push_back(detail::need_num(jj[k], path + ".joint_sigma[" + std::to_string(k) + "]"));
      o.joint = std::move(jc);
    }
    o.validate();
    s.obstacles.push_back(std::move(o));
  }

  if (root.contains("trajectory"))
    s.trajectory = detail::parse_polyline(root["trajectory"], s.dimension, "scene.trajectory");

  if (root.contains("planner")) {
    const json& pj = root["planner"];
    std::string path = "scene.planner";
    PlannerSetup ps;
    ps.config.eps_safe = detail::need_num(need(pj, "eps_safe", path), path + ".eps_safe");
    ps.config.eps_p = detail::need_num(need(pj, "eps_p", path), path + ".eps_p");
    const json& wj = need(pj, "workspace", path);
    ps.config.workspace_min =
        detail::parse_point(need(wj, "min", path + ".workspace"), s.dimension, path + ".workspace.min");
    ps.config.workspace_max =
        detail::parse_point(need(wj, "max", path + ".workspace"), s.dimension, path + ".workspace.max");
    ps.start = detail::parse_point(need(pj, "start", path), s.dimension, path + ".start");
    ps.goal = detail::parse_point(need(pj, "goal", path), s.dimension, path + ".goal");
    if (pj.contains("step_size")) ps.config.step_size = detail::need_num(pj["step_size"], path + ".step_size");
    if (pj.contains("goal_bias")) ps.config.goal_bias = detail::need_num(pj["goal_bias"], path + ".goal_bias");
    if (pj.contains("goal_radius"))
      ps.config.goal_radius = detail::need_num(pj["goal_radius"], path + ".goal_radius");
    if (pj.contains("max_iterations")) {
      if (!pj["max_iterations"].is_number_integer()) fail(path + ".max_iterations", "expected an integer");
      ps.config.max_iterations = pj["max_iterations"].get<int>();
    }
    try {
      ps.config.validate();
    } catch (const std::exception& e) {
      fail(path, e.what());
    }
    s.planner = std::move(ps);
  }

  if (root.contains("online")) {
    const json& onj = root["online"];
    std::string path = "scene.online";
    s.online_contract_eps = detail::need_num(need(onj, "contract_eps", path), path + ".contract_eps");
    PolicyScript script;
    script.initial = detail::parse_polyline(need(onj, "committed", path), s.dimension, path + ".committed");
    if (onj.contains("events")) {
      const json& evs = onj["events"];
      if (!evs.is_array()) fail(path + ".events", "expected an array");
      for (size_t k = 0; k < evs.size(); ++k) {
        std::string epath = path + ".events[" + std::to_string(k) + "]";
        const json& ej = evs[k];
        ReplanEvent ev;
        ev.at_point = detail::parse_point(need(ej, "at", epath), s.dimension, epath + ".at");
        ev.proposed_remainder = detail::parse_polyline(need(ej, "proposed_remainder", epath),
                                                       s.dimension, epath + ".proposed_remainder");
        if (ej.contains("updates")) {
          const json& ups = ej["updates"];
          if (!ups.is_array()) fail(epath + ".updates", "expected an array");
          for (size_t u = 0; u < ups.size(); ++u) {
            std::string upath = epath + ".updates[" + std::to_string(u) + "]";
            const json& uj = ups[u];
            ObservationUpdate upd;
            const json& uid = need(uj, "obstacle_id", upath);
            if (!uid.is_string()) fail(upath + ".obstacle_id", "expected a string");
            upd.obstacle_id = uid.get<std::string>();
            const json& ufs = need(uj, "faces", upath);
            if (!ufs.is_array() || ufs.empty()) fail(upath + ".faces", "expected a nonempty array");
            for (size_t f = 0; f < ufs.size(); ++f)
              upd.new_face_posteriors.push_back(
                  detail::parse_face(ufs[f], hd, upath + ".faces[" + std::to_string(f) + "]"));
            ev.updates.push_back(std::move(upd));
          }
        }
        script.events.push_back(std::move(ev));
      }
    }
    s.online_script = std::move(script);
  }

  if (root.contains("clouds")) {
    const json& cls = root["clouds"];
    if (!cls.is_array()) fail("scene.clouds", "expected an array");
    for (size_t i = 0; i < cls.size(); ++i) {
      std::string path = "scene.clouds[" + std::to_string(i) + "]";
      const json& cj = cls[i];
      CloudSpec spec;
      const json& cid = need(cj, "id", path);
      if (!cid.is_string()) fail(path + ".id", "expected a string");
      spec.obstacle_id = cid.get<std::string>();
      const json& fcs = need(cj, "faces", path);
      if (!fcs.is_array() || fcs.empty()) fail(path + ".faces", "expected a nonempty array");
      for (size_t f = 0; f < fcs.size(); ++f) {
        std::string fpath = path + ".faces[" + std::to_string(f) + "]";
        const json& fj = fcs[f];
        FacePointCloud cloud;
        cloud.noise_sd = detail::need_num(need(fj, "noise_sd", fpath), fpath + ".noise_sd");
        if (!(cloud.noise_sd > 0.0)) fail(fpath + ".noise_sd", "must be > 0");
        cloud.prior = detail::parse_face(need(fj, "prior", fpath), hd, fpath + ".prior");
        const json& pts = need(fj, "points", fpath);
        if (!pts.is_array()) fail(fpath + ".points", "expected an array");
        for (size_t p = 0; p < pts.size(); ++p)
          cloud.points.push_back(
              detail::parse_point(pts[p], s.dimension, fpath + ".points[" + std::to_string(p) + "]"));
        spec.faces.push_back(std::move(cloud));
      }
      s.clouds.push_back(std::move(spec));
    }
  }
  return s;
}

inline Scene load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open scene file '" + path + "'");
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw SceneError("scene file '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_scene(root);
}

inline json scene_to_json(const Scene& s) {
  json root;
  root["dimension"] = s.dimension;
  json obs = json::array();
  for (const auto& o : s.obstacles) {
    json oj;
    oj["id"] = o.id;
    json faces = json::array();
    for (const auto& f : o.faces) {
      json fj;
      fj["mu"] = detail::dump_vec(f.mu.coords);
      json sig = json::array();
      for (int i = 0; i < f.sigma.size(); ++i)
        for (int j = 0; j < f.sigma.size(); ++j) sig.push_back(f.sigma.at(i, j));
      fj["sigma"] = sig;
      faces.push_back(fj);
    }
    oj["faces"] = faces;
    if (o.joint) {
      json jj = json::array();
      for (double v : o.joint->entries) jj.push_back(v);
      oj["joint_sigma"] = jj;
    }
    obs.push_back(oj);
  }
  root["obstacles"] = obs;
  if (s.trajectory) root["trajectory"] = detail::dump_polyline(*s.trajectory);
  if (s.planner) {
    json pj;
    pj["eps_safe"] = s.planner->config.eps_safe;
    pj["eps_p"] = s.planner->config.eps_p;
    pj["workspace"] = json{{"min", detail::dump_vec(s.planner->config.workspace_min.coords)},
                           {"max", detail::dump_vec(s.planner->config.workspace_max.coords)}};
    pj["start"] = detail::dump_vec(s.planner->start.coords);
    pj["goal"] = detail::dump_vec(s.planner->goal.coords);
    if (s.planner->config.step_size > 0.0) pj["step_size"] = s.planner->config.step_size;
    pj["goal_bias"] = s.planner->config.goal_bias;
    if (s.planner->config.goal_radius > 0.0) pj["goal_radius"] = s.planner->config.goal_radius;
    pj["max_iterations"] = s.planner->config.max_iterations;
    root["planner"] = pj;
  }
  if (s.online_script) {
    json onj;
    onj["contract_eps"] = s.online_contract_eps;
    onj["committed"] = detail::dump_polyline(s.online_script->initial);
    json evs = json::array();
    for (const auto& ev : s.online_script->events) {
      json ej;
      ej["at"] = detail::dump_vec(ev.at_point.coords);
      ej["proposed_remainder"] = detail::dump_polyline(ev.proposed_remainder);
      json ups = json::array();
      for (const auto& u : ev.updates) {
        json uj;
        uj["obstacle_id"] = u.obstacle_id;
        json faces = json::array();
        for (const auto& f : u.new_face_posteriors) {
          json fj;
          fj["mu"] = detail::dump_vec(f.mu.coords);
          json sig = json::array();
          for (int i = 0; i < f.sigma.size(); ++i)
            for (int j = 0; j < f.sigma.size(); ++j) sig.push_back(f.sigma.at(i, j));
          fj["sigma"] = sig;
          faces.push_back(fj);
        }
        uj["faces"] = faces;
        ups.push_back(uj);
      }
      if (!ups.empty()) ej["updates"] = ups;
      evs.push_back(ej);
    }
    if (!evs.empty()) onj["events"] = evs;
    root["online"] = onj;
  }
  return root;
}

// --- certificate serialization ---------------------------------------

inline json certificate_to_json(const SafetyCertificate& cert) {
  json root;
  root["volume_digest"] = cert.volume_digest;
  root["eps_precision"] = cert.eps_precision;
  json per = json::array();
  for (const auto& c : cert.per_obstacle) {
    json cj;
    cj["id"] = c.obstacle_id;
    cj["eps_i"] = c.eps_i;
    cj["status"] = to_string(c.status);
    cj["per_face_q"] = c.per_face_q;
    cj["intersection_calls"] = c.intersection_calls;
    per.push_back(cj);
  }
  root["per_obstacle"] = per;
  root["total_eps"] = cert.total_eps;
  return root;
}

inline SafetyCertificate certificate_from_json(const json& root) {
  using detail::fail;
  using detail::need;
  SafetyCertificate cert;
  const json& dj = need(root, "volume_digest", "certificate");
  if (!dj.is_string()) fail("certificate.volume_digest", "expected a string");
  cert.volume_digest = dj.get<std::string>();
  cert.eps_precision = detail::need_num(need(root, "eps_precision", "certificate"),
                                        "certificate.eps_precision");
  cert.total_eps = detail::need_num(need(root, "total_eps", "certificate"), "certificate.total_eps");
  const json& per = need(root, "per_obstacle", "certificate");
  if (!per.is_array()) fail("certificate.per_obstacle", "expected an array");
  for (size_t i = 0; i < per.size(); ++i) {
    std::string path = "certificate.per_obstacle[" + std::to_string(i) + "]";
    const json& cj = per[i];
    ObstacleCert c;
    const json& idj = need(cj, "id", path);
    if (!idj.is_string()) fail(path + ".id", "expected a string");
    c.obstacle_id = idj.get<std::string>();
    c.eps_i = detail::need_num(need(cj, "eps_i", path), path + ".eps_i");
    const json& st = need(cj, "status", path);
    if (!st.is_string()) fail(path + ".status", "expected a string");
    std::string sv = st.get<std::string>();
    if (sv == "CERTIFIED")
      c.status = CertStatus::kCertified;
    else if (sv == "UNCERTIFIABLE")
      c.status = CertStatus::kUncertifiable;
    else if (sv == "DEGENERATE_FLOOR")
      c.status = CertStatus::kDegenerateFloor;
    else
      fail(path + ".status", "unknown status '" + sv + "'");
    const json& qs = need(cj, "per_face_q", path);
    if (!qs.is_array()) fail(path + ".per_face_q", "expected an array");
    for (size_t f = 0; f < qs.size(); ++f)
      c.per_face_q.push_back(detail::need_num(qs[f], path + ".per_face_q[" + std::to_string(f) + "]"));
    if (cj.contains("intersection_calls"))
      c.intersection_calls = cj["intersection_calls"].get<long long>();
    cert.per_obstacle.push_back(std::move(c));
  }
  return cert;
}

inline json mc_report_to_json(const McReport& r) {
  return json{{"trials", r.trials}, {"hits", r.hits},        {"p_hat", r.p_hat},
              {"upper_ci", r.upper_ci}, {"stderr", r.stderr_est()}, {"seed", r.seed}};
}

inline json ledger_history_to_json(const std::vector<LedgerEvent>& history) {
  json arr = json::array();
  for (const auto& e : history)
    arr.push_back(json{{"op", e.op},
                       {"spent_after", e.spent_after},
                       {"committed_future_after", e.committed_future_after},
                       {"value", e.value},
                       {"accepted", e.accepted},
                       {"note", e.note}});
  return arr;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SceneError("cannot write file '" + path + "'");
  out << content;
}

}  // namespace shadowcert
