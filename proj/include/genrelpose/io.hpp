#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "genrelpose/solver.hpp"
#include "genrelpose/synthetic.hpp"

namespace genrelpose {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::json;

namespace detail {

inline const Json& member(const Json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw IoError(path + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw IoError(path + "." + key + ": missing");
  return *it;
}

inline double num_at(const Json& j, const std::string& path) {
  if (!j.is_number()) throw IoError(path + ": expected a number");
  return j.get<double>();
}

inline double num_field(const Json& j, const char* key, const std::string& path) {
  return num_at(member(j, key, path), path + "." + key);
}

inline bool bool_field(const Json& j, const char* key, const std::string& path,
                       bool fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  if (!j[key].is_boolean()) throw IoError(path + "." + key + ": expected a boolean");
  return j[key].get<bool>();
}

inline std::vector<double> num_array(const Json& j, const std::string& path,
                                     std::size_t n) {
  if (!j.is_array() || j.size() != n)
    throw IoError(path + ": expected " + std::to_string(n) + " numbers");
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    out.push_back(num_at(j[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

inline Mat3 mat3_field(const Json& j, const char* key, const std::string& path) {
  const auto v = num_array(member(j, key, path), path + "." + key, 9);
  Mat3 M;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) M(r, c) = v[3 * r + c];
  return M;
}

inline Vec3 vec3_field(const Json& j, const char* key, const std::string& path) {
  const auto v = num_array(member(j, key, path), path + "." + key, 3);
  return Vec3(v[0], v[1], v[2]);
}

inline Json json_of(const Mat3& M) {
  Json a = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) a.push_back(M(r, c));
  return a;
}

inline Json json_of(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

inline ImuAttitude attitude_field(const Json& j, const char* key,
                                  const std::string& path) {
  const Json& a = member(j, key, path);
  ImuAttitude att;
  att.roll = deg2rad(num_field(a, "roll_deg", path + "." + key));
  att.pitch = deg2rad(num_field(a, "pitch_deg", path + "." + key));
  return att;
}

// printed degrees must survive parse (deg2rad) and re-print (rad2deg)
// byte-identically; one extra round trip projects onto that fixed point
inline double stable_deg(double rad) {
  const double d = rad2deg(rad);
  return rad2deg(deg2rad(d));
}

inline Json attitude_json(const ImuAttitude& att) {
  return Json{{"roll_deg", stable_deg(att.roll)}, {"pitch_deg", stable_deg(att.pitch)}};
}

inline std::string fmt_g(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

}  // namespace detail

struct Problem {
  RigExtrinsics rig;
  ImuAttitude att_i, att_j;
  std::vector<AffineCorrespondence> corrs;
};

inline Problem problem_from_json(const Json& j) {
  Problem p;

  const Json& rig = detail::member(j, "rig", "problem");
  if (!rig.is_array() || rig.empty()) throw IoError("problem.rig: expected a non-empty array");
  for (std::size_t k = 0; k < rig.size(); ++k) {
    const std::string path = "rig[" + std::to_string(k) + "]";
    RigCamera cam;
    const Json& jc = rig[k];
    const Json& jid = detail::member(jc, "id", path);
    if (!jid.is_number_integer()) throw IoError(path + ".id: expected an integer");
    cam.id = jid.get<int>();
    cam.R = detail::mat3_field(jc, "R", path);
    if (!is_rotation(cam.R, 1e-6)) throw IoError(path + ".R: not a rotation matrix");
    cam.t = detail::vec3_field(jc, "t", path);
    for (const RigCamera& other : p.rig.cameras)
      if (other.id == cam.id) throw IoError(path + ".id: duplicate camera id");
    p.rig.cameras.push_back(cam);
  }

  p.att_i = detail::attitude_field(j, "imu_i", "problem");
  p.att_j = detail::attitude_field(j, "imu_j", "problem");

  const bool pixels = detail::bool_field(j, "points_in_pixels", "problem", false);
  std::map<int, std::array<double, 4>> intr;  // id -> fx fy cx cy
  if (pixels) {
    const Json& ji = detail::member(j, "intrinsics", "problem");
    if (!ji.is_array()) throw IoError("problem.intrinsics: expected an array");
    for (std::size_t k = 0; k < ji.size(); ++k) {
      const std::string path = "intrinsics[" + std::to_string(k) + "]";
      const Json& e = ji[k];
      const Json& jid = detail::member(e, "id", path);
      if (!jid.is_number_integer()) throw IoError(path + ".id: expected an integer");
      intr[jid.get<int>()] = {
          detail::num_field(e, "fx", path), detail::num_field(e, "fy", path),
          detail::num_field(e, "cx", path), detail::num_field(e, "cy", path)};
    }
  }
  auto intrinsics_of = [&](int id, const std::string& path) {
    const auto it = intr.find(id);
    if (it == intr.end())
      throw IoError(path + ": no intrinsics for camera id " + std::to_string(id));
    return it->second;
  };

  const Json& corrs = detail::member(j, "correspondences", "problem");
  if (!corrs.is_array()) throw IoError("problem.correspondences: expected an array");
  if (corrs.size() < 2) throw IoError("need at least 2 affine correspondences");
  for (std::size_t k = 0; k < corrs.size(); ++k) {
    const std::string path = "correspondences[" + std::to_string(k) + "]";
    const Json& je = corrs[k];
    AffineCorrespondence c;
    const Json& jci = detail::member(je, "cam_i", path);
    const Json& jcj = detail::member(je, "cam_j", path);
    if (!jci.is_number_integer()) throw IoError(path + ".cam_i: expected an integer");
    if (!jcj.is_number_integer()) throw IoError(path + ".cam_j: expected an integer");
    c.cam_i = jci.get<int>();
    c.cam_j = jcj.get<int>();
    try {
      p.rig.camera(c.cam_i);
      p.rig.camera(c.cam_j);
    } catch (const std::invalid_argument&) {
      throw IoError(path + ": references a camera id not present in the rig");
    }
    const auto xi = detail::num_array(detail::member(je, "x_i", path), path + ".x_i", 2);
    const auto xj = detail::num_array(detail::member(je, "x_j", path), path + ".x_j", 2);
    const auto av = detail::num_array(detail::member(je, "A", path), path + ".A", 4);
    c.x_i = Vec3(xi[0], xi[1], 1.0);
    c.x_j = Vec3(xj[0], xj[1], 1.0);
    c.A << av[0], av[1], av[2], av[3];
    if (pixels) {
      const auto ii = intrinsics_of(c.cam_i, path + ".cam_i");
      const auto ij = intrinsics_of(c.cam_j, path + ".cam_j");
      c.x_i = Vec3((xi[0] - ii[2]) / ii[0], (xi[1] - ii[3]) / ii[1], 1.0);
      c.x_j = Vec3((xj[0] - ij[2]) / ij[0], (xj[1] - ij[3]) / ij[1], 1.0);
      const Mat2 Si = Eigen::DiagonalMatrix<double, 2>(ii[0], ii[1]);
      const Mat2 SjInv = Eigen::DiagonalMatrix<double, 2>(1.0 / ij[0], 1.0 / ij[1]);
      c.A = Si * c.A * SjInv;
    }
    if (!c.x_i.allFinite() || !c.x_j.allFinite() || !c.A.allFinite())
      throw IoError(path + ": non-finite value");
    p.corrs.push_back(c);
  }
  return p;
}

inline Json problem_to_json(const Problem& p) {
  Json j;
  Json rig = Json::array();
  for (const RigCamera& cam : p.rig.cameras)
    rig.push_back(Json{{"id", cam.id}, {"R", detail::json_of(cam.R)}, {"t", detail::json_of(cam.t)}});
  j["rig"] = rig;
  j["imu_i"] = detail::attitude_json(p.att_i);
  j["imu_j"] = detail::attitude_json(p.att_j);
  Json corrs = Json::array();
  for (const AffineCorrespondence& c : p.corrs)
    corrs.push_back(Json{{"cam_i", c.cam_i},
                         {"cam_j", c.cam_j},
                         {"x_i", Json::array({c.x_i.x(), c.x_i.y()})},
                         {"x_j", Json::array({c.x_j.x(), c.x_j.y()})},
                         {"A", Json::array({c.A(0, 0), c.A(0, 1), c.A(1, 0), c.A(1, 1)})}});
  j["correspondences"] = corrs;
  return j;
}

struct Truth {
  AlignedPose aligned;
  RelativePose pose;
  ImuAttitude att_i, att_j;
};

inline Json truth_to_json(const Truth& t) {
  Json j;
  j["s"] = t.aligned.s;
  j["theta_y_deg"] = rad2deg(angle_from_cayley(t.aligned.s));
  j["t_tilde"] = detail::json_of(t.aligned.t_tilde);
  j["R"] = detail::json_of(t.pose.R);
  j["t"] = detail::json_of(t.pose.t);
  j["imu_i"] = detail::attitude_json(t.att_i);
  j["imu_j"] = detail::attitude_json(t.att_j);
  return j;
}

inline Truth truth_from_json(const Json& j) {
  Truth t;
  t.aligned.s = detail::num_field(j, "s", "truth");
  t.aligned.t_tilde = detail::vec3_field(j, "t_tilde", "truth");
  t.pose.R = detail::mat3_field(j, "R", "truth");
  t.pose.t = detail::vec3_field(j, "t", "truth");
  t.att_i = detail::attitude_field(j, "imu_i", "truth");
  t.att_j = detail::attitude_field(j, "imu_j", "truth");
  return t;
}

inline Json solution_to_json(const SolveReport& r) {
  Json j;
  j["mode"] = r.mode == SolveMode::full ? "full" : "linearized";
  j["s"] = r.aligned.s;
  j["theta_y_deg"] = rad2deg(angle_from_cayley(r.aligned.s));
  j["t_tilde"] = detail::json_of(r.aligned.t_tilde);
  j["R"] = detail::json_of(r.pose.R);
  j["t"] = detail::json_of(r.pose.t);
  j["lambda_min"] = r.lambda_min;
  j["companion_size"] = r.companion_size;
  j["degenerate_translation"] = r.degenerate_translation;
  j["fallback_used"] = r.fallback_used;
  j["wall_time_ms"] = r.wall_time_ms;
  Json cands = Json::array();
  for (const ScoredCandidate& c : r.candidates)
    cands.push_back(Json{{"s", c.s}, {"lambda_min", c.lambda_min}});
  j["candidates"] = cands;
  return j;
}

inline SolveReport solution_from_json(const Json& j) {
  SolveReport r;
  const Json& jm = detail::member(j, "mode", "solution");
  if (!jm.is_string()) throw IoError("solution.mode: expected a string");
  const std::string mode = jm.get<std::string>();
  if (mode != "full" && mode != "linearized")
    throw IoError("solution.mode: expected 'full' or 'linearized'");
  r.mode = mode == "full" ? SolveMode::full : SolveMode::linearized;
  r.aligned.s = detail::num_field(j, "s", "solution");
  r.aligned.t_tilde = detail::vec3_field(j, "t_tilde", "solution");
  r.pose.R = detail::mat3_field(j, "R", "solution");
  r.pose.t = detail::vec3_field(j, "t", "solution");
  r.lambda_min = detail::num_field(j, "lambda_min", "solution");
  r.companion_size = static_cast<int>(detail::num_field(j, "companion_size", "solution"));
  r.degenerate_translation =
      detail::bool_field(j, "degenerate_translation", "solution", false);
  r.fallback_used = detail::bool_field(j, "fallback_used", "solution", false);
  r.wall_time_ms = detail::num_field(j, "wall_time_ms", "solution");
  if (j.contains("candidates")) {
    const Json& jc = j["candidates"];
    if (!jc.is_array()) throw IoError("solution.candidates: expected an array");
    for (std::size_t k = 0; k < jc.size(); ++k) {
      const std::string path = "candidates[" + std::to_string(k) + "]";
      r.candidates.push_back({detail::num_field(jc[k], "s", path),
                              detail::num_field(jc[k], "lambda_min", path)});
    }
  }
  r.t_hat << r.aligned.t_tilde, r.degenerate_translation ? 0.0 : 1.0;
  return r;
}

inline Json parse_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  Json j = Json::parse(in, nullptr, false);
  if (j.is_discarded()) throw IoError(path + ": malformed JSON");
  return j;
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

inline Problem load_problem(const std::string& path) {
  return problem_from_json(parse_json_file(path));
}
inline void save_problem(const Problem& p, const std::string& path) {
  write_text_file(path, problem_to_json(p).dump(2) + "\n");
}
inline Truth load_truth(const std::string& path) {
  return truth_from_json(parse_json_file(path));
}
inline void save_truth(const Truth& t, const std::string& path) {
  write_text_file(path, truth_to_json(t).dump(2) + "\n");
}
inline SolveReport load_solution(const std::string& path) {
  return solution_from_json(parse_json_file(path));
}
inline void save_solution(const SolveReport& r, const std::string& path) {
  write_text_file(path, solution_to_json(r).dump(2) + "\n");
}

// Pose chains: one step per line, 12 numbers, row-major [R | t].
inline std::vector<RelativePose> load_pose_chain(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  std::vector<RelativePose> steps;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::vector<double> v;
    double x;
    while (ss >> x) v.push_back(x);
    if (v.empty()) continue;
    const std::string ctx = path + " line " + std::to_string(lineno);
    if (v.size() != 12) throw IoError(ctx + ": expected 12 numbers, got " + std::to_string(v.size()));
    RelativePose p;
    p.R << v[0], v[1], v[2], v[4], v[5], v[6], v[8], v[9], v[10];
    p.t << v[3], v[7], v[11];
    if (!is_rotation(p.R, 1e-6)) throw IoError(ctx + ": not a rotation matrix");
    steps.push_back(p);
  }
  return steps;
}

inline void save_pose_chain(const std::vector<RelativePose>& steps,
                            const std::string& path) {
  std::ostringstream out;
  for (const RelativePose& p : steps) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << detail::fmt_g(p.R(r, c), 17) << ' ';
      out << detail::fmt_g(p.t(r), 17);
      out << (r < 2 ? " " : "");
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

inline BenchConfig bench_config_from_json(const Json& j) {
  BenchConfig cfg;
  const std::string path = "config";
  if (!j.is_object()) throw IoError(path + ": expected an object");
  if (j.contains("motion")) {
    if (!j["motion"].is_string()) throw IoError(path + ".motion: expected a string");
    cfg.motion = motion_from_name(j["motion"].get<std::string>());
  }
  if (j.contains("solver")) {
    if (!j["solver"].is_string()) throw IoError(path + ".solver: expected a string");
    const std::string s = j["solver"].get<std::string>();
    if (s != "full" && s != "linearized")
      throw IoError(path + ".solver: expected 'full' or 'linearized'");
    cfg.solver = s == "full" ? SolveMode::full : SolveMode::linearized;
  }
  auto int_field = [&](const char* key, int fallback, int lo) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_integer())
      throw IoError(path + "." + key + ": expected an integer");
    const int v = j[key].get<int>();
    if (v < lo) throw IoError(path + "." + key + ": must be >= " + std::to_string(lo));
    return v;
  };
  cfg.trials = int_field("trials", cfg.trials, 1);
  cfg.correspondences = int_field("correspondences", cfg.correspondences, 2);
  cfg.threads = int_field("threads", cfg.threads, 0);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer()) throw IoError(path + ".seed: expected an integer");
    cfg.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("noise_kind")) {
    if (!j["noise_kind"].is_string())
      throw IoError(path + ".noise_kind: expected a string");
    cfg.noise_kind = j["noise_kind"].get<std::string>();
    noise_at_level(cfg, 0.0);  // validates the name
  }
  if (j.contains("levels")) {
    if (!j["levels"].is_array() || j["levels"].empty())
      throw IoError(path + ".levels: expected a non-empty array");
    cfg.levels.clear();
    for (std::size_t k = 0; k < j["levels"].size(); ++k)
      cfg.levels.push_back(
          detail::num_at(j["levels"][k], path + ".levels[" + std::to_string(k) + "]"));
  }
  cfg.affine_from_noisy_points =
      detail::bool_field(j, "affine_from_noisy_points", path, cfg.affine_from_noisy_points);
  cfg.measure_time = detail::bool_field(j, "measure_time", path, cfg.measure_time);
  return cfg;
}

inline BenchConfig load_bench_config(const std::string& path) {
  return bench_config_from_json(parse_json_file(path));
}

inline std::string bench_csv(const BenchReport& report) {
  std::ostringstream out;
  out << "noise_kind,noise_level,trial,eps_r_deg,eps_t,eps_tdir_deg,solve_ms,status\n";
  auto num = [](double v) { return std::isnan(v) ? std::string("nan") : detail::fmt_g(v, 9); };
  for (const BenchLevel& lvl : report.levels) {
    for (const TrialResult& tr : lvl.trials) {
      out << report.config.noise_kind << ',' << detail::fmt_g(lvl.level, 9) << ','
          << tr.trial << ',' << num(tr.eps_r_deg) << ',' << num(tr.eps_t) << ','
          << num(tr.eps_tdir_deg) << ',';
      char ms[32];
      std::snprintf(ms, sizeof(ms), "%.3f", tr.solve_ms);
      out << ms << ',' << status_name(tr.status) << '\n';
    }
  }
  for (const BenchLevel& lvl : report.levels) {
    out << "# noise_kind=" << report.config.noise_kind
        << " level=" << detail::fmt_g(lvl.level, 9) << " trials=" << lvl.trials.size()
        << " failures=" << lvl.stats.failures
        << " mean_eps_r_deg=" << num(lvl.stats.mean_eps_r_deg)
        << " median_eps_r_deg=" << num(lvl.stats.median_eps_r_deg)
        << " mean_eps_t=" << num(lvl.stats.mean_eps_t)
        << " median_eps_t=" << num(lvl.stats.median_eps_t)
        << " mean_eps_tdir_deg=" << num(lvl.stats.mean_eps_tdir_deg)
        << " median_eps_tdir_deg=" << num(lvl.stats.median_eps_tdir_deg) << '\n';
  }
  return out.str();
}

}  // namespace genrelpose
