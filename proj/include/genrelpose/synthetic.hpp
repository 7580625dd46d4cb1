#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "genrelpose/solver.hpp"

namespace genrelpose {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
}

// mt19937_64 bit stream with hand-rolled distributions, so that identical
// seeds give identical doubles on every platform.
struct Rng {
  std::mt19937_64 eng;

  explicit Rng(std::uint64_t seed) : eng(seed) {}

  double uniform() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  Vec3 unit_vector() {
    const double z = uniform(-1.0, 1.0);
    const double phi = uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    return Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }

  // uniform in the spherical cap of half-angle `cone` around `axis`
  Vec3 cone_vector(const Vec3& axis, double cone) {
    const double cz = uniform(std::cos(cone), 1.0);
    const double phi = uniform(0.0, 2.0 * kPi);
    const double r = std::sqrt(std::max(0.0, 1.0 - cz * cz));
    Vec3 any = std::abs(axis.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 e1 = axis.cross(any).normalized();
    const Vec3 e2 = axis.cross(e1);
    return (r * std::cos(phi)) * e1 + (r * std::sin(phi)) * e2 + cz * axis;
  }
};

struct RigSpec {
  int camera_count = 4;
  double radius = 0.5;
};

// Cameras on a ring in the body x-z plane, optical axes pointing outward.
inline RigExtrinsics default_rig(const RigSpec& spec = {}) {
  RigExtrinsics rig;
  for (int i = 0; i < spec.camera_count; ++i) {
    const double az = 2.0 * kPi * i / spec.camera_count;
    RigCamera cam;
    cam.id = i;
    cam.R = rot_y(az);
    cam.t = spec.radius * Vec3(std::sin(az), 0.0, std::cos(az));
    rig.cameras.push_back(cam);
  }
  return rig;
}

enum class MotionMode { random_dir, forward, planar, sideways };

inline const char* motion_name(MotionMode m) {
  switch (m) {
    case MotionMode::random_dir: return "random";
    case MotionMode::forward: return "forward";
    case MotionMode::planar: return "planar";
    case MotionMode::sideways: return "sideways";
  }
  return "random";
}

inline MotionMode motion_from_name(const std::string& s) {
  if (s == "random") return MotionMode::random_dir;
  if (s == "forward") return MotionMode::forward;
  if (s == "planar") return MotionMode::planar;
  if (s == "sideways") return MotionMode::sideways;
  throw std::invalid_argument("unknown motion mode '" + s + "'");
}

struct MotionParams {
  double max_yaw_deg = 10.0;
  double max_attitude_deg = 10.0;
  double translation_norm = 2.0;
};

struct MotionSample {
  AlignedPose aligned;
  ImuAttitude att_i, att_j;
};

inline MotionSample sample_motion(MotionMode mode, Rng& rng,
                                  const MotionParams& params = {}) {
  MotionSample m;
  const double yaw = deg2rad(rng.uniform(-params.max_yaw_deg, params.max_yaw_deg));
  m.aligned.s = cayley_from_angle(yaw);
  const double amax = deg2rad(params.max_attitude_deg);
  m.att_i.roll = rng.uniform(-amax, amax);
  m.att_i.pitch = rng.uniform(-amax, amax);
  m.att_j.roll = rng.uniform(-amax, amax);
  m.att_j.pitch = rng.uniform(-amax, amax);

  Vec3 dir;
  switch (mode) {
    case MotionMode::random_dir:
      dir = rng.unit_vector();
      break;
    case MotionMode::planar: {
      const double phi = rng.uniform(0.0, 2.0 * kPi);
      dir = Vec3(std::cos(phi), 0.0, std::sin(phi));
      break;
    }
    case MotionMode::forward:
      dir = Vec3(0.0, 0.0, rng.uniform() < 0.5 ? -1.0 : 1.0);
      break;
    case MotionMode::sideways:
      dir = Vec3(rng.uniform() < 0.5 ? -1.0 : 1.0, 0.0, 0.0);
      break;
  }
  m.aligned.t_tilde = params.translation_norm * dir;
  return m;
}

// Pinhole model shared by the synthetic experiments: focal 400, 640x480,
// principal point at the center; normalized bounds |u|<=0.8, |v|<=0.6.
struct ImageModel {
  double focal = 400.0;
  double width = 640.0;
  double height = 480.0;

  double umax() const { return width / (2.0 * focal); }
  double vmax() const { return height / (2.0 * focal); }
};

// Scene plane in body frame i: n . X = d.
struct ScenePlane {
  Vec3 n = Vec3::UnitZ();
  double d = 1.0;
};

struct SyntheticInstance {
  RigExtrinsics rig;
  ImuAttitude att_i, att_j;
  std::vector<AffineCorrespondence> corrs;
  std::vector<ScenePlane> planes;
  AlignedPose truth_aligned;
  RelativePose truth_pose;
  ImageModel image;
};

namespace detail {

// camera-frame homography (camera `ci` at time i -> camera `cj` at time j)
// for a plane n_c . X_c = d_c given in ci-at-i coordinates
inline Mat3 camera_homography(const RigCamera& ci, const RigCamera& cj,
                              const RelativePose& pose, const Vec3& n_c, double d_c) {
  const Mat3 Rc = cj.R.transpose() * pose.R * ci.R;
  const Vec3 tc = cj.R.transpose() * (pose.R * ci.t + pose.t - cj.t);
  return Rc + tc * n_c.transpose() / d_c;
}

inline Mat3 camera_homography(const RigCamera& cam, const RelativePose& pose,
                              const Vec3& n_c, double d_c) {
  return camera_homography(cam, cam, pose, n_c, d_c);
}

// local affine frame A = J^T of the homography point transfer at (x_i, x_j)
inline Mat2 affine_from_homography(const Mat3& H, const Vec3& x_i, const Vec3& x_j) {
  const double b = H.row(2).dot(x_i);
  Mat2 A;
  A(0, 0) = (H(0, 0) - H(2, 0) * x_j.x()) / b;
  A(0, 1) = (H(1, 0) - H(2, 0) * x_j.y()) / b;
  A(1, 0) = (H(0, 1) - H(2, 1) * x_j.x()) / b;
  A(1, 1) = (H(1, 1) - H(2, 1) * x_j.y()) / b;
  return A;
}

}  // namespace detail

// intra_camera tracks each point in one camera across time; cross_camera
// prefers a different camera at time j when one sees the point, falling back
// to the tracking camera otherwise
enum class Pairing { intra_camera, cross_camera };

// One plane-induced correspondence per plane, cameras assigned round robin.
// Anchor points sit 4-8 m along the sampled ray, plane normals within 45
// degrees of it; both projections must land inside the image.
inline SyntheticInstance generate_instance(const RigExtrinsics& rig,
                                           const MotionSample& motion, int n_planes,
                                           Rng& rng, const ImageModel& image = {},
                                           Pairing pairing = Pairing::intra_camera) {
  SyntheticInstance inst;
  inst.rig = rig;
  inst.att_i = motion.att_i;
  inst.att_j = motion.att_j;
  inst.truth_aligned = motion.aligned;
  inst.truth_pose = unaligned_pose(motion.aligned, motion.att_i, motion.att_j);
  inst.image = image;

  const int n_cams = static_cast<int>(rig.cameras.size());
  const double umax = image.umax(), vmax = image.vmax();
  constexpr int kMaxAttempts = 200;

  for (int p = 0; p < n_planes; ++p) {
    const RigCamera& cam = rig.cameras[p % n_cams];
    bool placed = false;
    for (int attempt = 0; attempt < kMaxAttempts && !placed; ++attempt) {
      const Vec3 x_i(rng.uniform(-umax, umax), rng.uniform(-vmax, vmax), 1.0);
      const Vec3 f_c = x_i.normalized();
      const double dist = rng.uniform(4.0, 8.0);
      const Vec3 X_c = dist * f_c;
      const Vec3 n_c = rng.cone_vector(f_c, deg2rad(45.0));
      const double d_c = n_c.dot(X_c);

      const Vec3 X_i = cam.R * X_c + cam.t;
      const Vec3 X_j = inst.truth_pose.R * X_i + inst.truth_pose.t;
      const RigCamera* cam_j = nullptr;
      Vec3 x_j = Vec3::Zero();
      const auto sees = [&](const RigCamera& cj) {
        const Vec3 X_cj = cj.R.transpose() * (X_j - cj.t);
        if (X_cj.z() < 0.1) return false;
        const Vec3 xc(X_cj.x() / X_cj.z(), X_cj.y() / X_cj.z(), 1.0);
        if (std::abs(xc.x()) > umax || std::abs(xc.y()) > vmax) return false;
        cam_j = &cj;
        x_j = xc;
        return true;
      };
      if (pairing == Pairing::intra_camera) {
        if (!sees(cam)) continue;
      } else {
        for (int o = 1; o <= n_cams && cam_j == nullptr; ++o)
          sees(rig.cameras[(p % n_cams + o) % n_cams]);
        if (cam_j == nullptr) continue;
      }

      const Mat3 H = detail::camera_homography(cam, *cam_j, inst.truth_pose, n_c, d_c);
      AffineCorrespondence corr;
      corr.cam_i = cam.id;
      corr.cam_j = cam_j->id;
      corr.x_i = x_i;
      corr.x_j = x_j;
      corr.A = detail::affine_from_homography(H, x_i, x_j);
      inst.corrs.push_back(corr);

      ScenePlane plane;
      plane.n = cam.R * n_c;
      plane.d = d_c + plane.n.dot(cam.t);
      inst.planes.push_back(plane);
      placed = true;
    }
    if (!placed)
      throw GenerationError("frustum exhaustion placing plane " + std::to_string(p));
  }
  return inst;
}

struct NoiseSpec {
  double pixel_sigma = 0.0;
  double pitch_sigma_deg = 0.0;
  double roll_sigma_deg = 0.0;
  double extrinsic_rot_perturb = 0.0;    // radians, exact angle random axis
  double extrinsic_trans_perturb = 0.0;  // meters, exact norm random direction
  bool affine_from_noisy_points = true;
};

// Perturbs observations only; truth fields stay untouched for evaluation.
// With affine_from_noisy_points the affine frames are re-derived from the true
// plane homography at the noisy point locations.
inline SyntheticInstance apply_noise(const SyntheticInstance& inst, const NoiseSpec& spec,
                                     Rng& rng) {
  SyntheticInstance out = inst;

  if (spec.pixel_sigma > 0.0) {
    const double sn = spec.pixel_sigma / inst.image.focal;
    for (std::size_t k = 0; k < out.corrs.size(); ++k) {
      AffineCorrespondence& c = out.corrs[k];
      c.x_i.x() += sn * rng.normal();
      c.x_i.y() += sn * rng.normal();
      c.x_j.x() += sn * rng.normal();
      c.x_j.y() += sn * rng.normal();
      if (spec.affine_from_noisy_points) {
        const RigCamera& cam = inst.rig.camera(c.cam_i);
        const ScenePlane& pl = inst.planes[k];
        const Vec3 n_c = cam.R.transpose() * pl.n;
        const double d_c = pl.d - pl.n.dot(cam.t);
        const Mat3 H = detail::camera_homography(cam, inst.rig.camera(c.cam_j),
                                                 inst.truth_pose, n_c, d_c);
        c.A = detail::affine_from_homography(H, c.x_i, c.x_j);
      }
    }
  }

  if (spec.roll_sigma_deg > 0.0) {
    out.att_i.roll += deg2rad(spec.roll_sigma_deg) * rng.normal();
    out.att_j.roll += deg2rad(spec.roll_sigma_deg) * rng.normal();
  }
  if (spec.pitch_sigma_deg > 0.0) {
    out.att_i.pitch += deg2rad(spec.pitch_sigma_deg) * rng.normal();
    out.att_j.pitch += deg2rad(spec.pitch_sigma_deg) * rng.normal();
  }

  if (spec.extrinsic_rot_perturb > 0.0)
    for (RigCamera& cam : out.rig.cameras)
      cam.R = Eigen::AngleAxisd(spec.extrinsic_rot_perturb, rng.unit_vector())
                  .toRotationMatrix() *
              cam.R;
  if (spec.extrinsic_trans_perturb > 0.0)
    for (RigCamera& cam : out.rig.cameras)
      cam.t += spec.extrinsic_trans_perturb * rng.unit_vector();

  return out;
}

struct BenchConfig {
  MotionMode motion = MotionMode::random_dir;
  SolveMode solver = SolveMode::full;
  int trials = 1000;
  int correspondences = 100;
  std::uint64_t seed = 0;
  std::string noise_kind = "pixel";  // pixel|pitch|roll|extrinsic_rotation|extrinsic_translation|none
  std::vector<double> levels{0.0};
  bool affine_from_noisy_points = true;
  bool measure_time = false;
  int threads = 0;  // 0 = hardware concurrency; env GENRELPOSE_THREADS caps
  RigSpec rig;
  MotionParams motion_params;
};

enum class TrialStatus { ok, degenerate, fallback, failed };

inline const char* status_name(TrialStatus s) {
  switch (s) {
    case TrialStatus::ok: return "ok";
    case TrialStatus::degenerate: return "degenerate";
    case TrialStatus::fallback: return "fallback";
    case TrialStatus::failed: return "failed";
  }
  return "failed";
}

struct TrialResult {
  int trial = 0;
  double eps_r_deg = 0.0;
  double eps_t = 0.0;
  double eps_tdir_deg = 0.0;
  double solve_ms = 0.0;
  TrialStatus status = TrialStatus::ok;
};

struct LevelStats {
  int failures = 0;
  double mean_eps_r_deg = 0.0, median_eps_r_deg = 0.0;
  double mean_eps_t = 0.0, median_eps_t = 0.0;
  double mean_eps_tdir_deg = 0.0, median_eps_tdir_deg = 0.0;
};

struct BenchLevel {
  double level = 0.0;
  std::vector<TrialResult> trials;
  LevelStats stats;
};

struct BenchReport {
  BenchConfig config;
  std::vector<BenchLevel> levels;
  double total_runtime_s = 0.0;
};

inline NoiseSpec noise_at_level(const BenchConfig& cfg, double level) {
  NoiseSpec n;
  n.affine_from_noisy_points = cfg.affine_from_noisy_points;
  if (cfg.noise_kind == "pixel")
    n.pixel_sigma = level;
  else if (cfg.noise_kind == "pitch")
    n.pitch_sigma_deg = level;
  else if (cfg.noise_kind == "roll")
    n.roll_sigma_deg = level;
  else if (cfg.noise_kind == "extrinsic_rotation")
    n.extrinsic_rot_perturb = level;
  else if (cfg.noise_kind == "extrinsic_translation")
    n.extrinsic_trans_perturb = level;
  else if (cfg.noise_kind != "none")
    throw std::invalid_argument("unknown noise kind '" + cfg.noise_kind + "'");
  return n;
}

inline TrialResult run_trial(const BenchConfig& cfg, int level_idx, double level,
                             int trial) {
  TrialResult r;
  r.trial = trial;
  try {
    Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(level_idx),
                     static_cast<std::uint64_t>(trial)));
    const MotionSample motion = sample_motion(cfg.motion, rng, cfg.motion_params);
    const SyntheticInstance clean =
        generate_instance(default_rig(cfg.rig), motion, cfg.correspondences, rng);
    const SyntheticInstance obs = apply_noise(clean, noise_at_level(cfg, level), rng);

    const auto t0 = std::chrono::steady_clock::now();
    const SolveReport rep = solve(obs.corrs, obs.rig, obs.att_i, obs.att_j, cfg.solver);
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();

    // score the estimated yaw and t_tilde against the aligned truth; noisy
    // attitudes perturb the solve inputs, not the frame of the comparison
    r.eps_r_deg = eps_rotation_deg(cayley_y(clean.truth_aligned.s), cayley_y(rep.aligned.s));
    r.eps_t = eps_translation(clean.truth_aligned.t_tilde, rep.aligned.t_tilde);
    r.eps_tdir_deg = eps_direction_deg(clean.truth_aligned.t_tilde, rep.aligned.t_tilde);
    r.solve_ms = cfg.measure_time ? ms : 0.0;
    r.status = rep.degenerate_translation ? TrialStatus::degenerate
               : rep.fallback_used        ? TrialStatus::fallback
                                          : TrialStatus::ok;
  } catch (const std::exception&) {
    r.status = TrialStatus::failed;
    r.eps_r_deg = r.eps_t = r.eps_tdir_deg =
        std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

namespace detail {

inline double mean_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

inline int bench_thread_count(const BenchConfig& cfg, int work_items) {
  int n = cfg.threads > 0 ? cfg.threads
                          : static_cast<int>(std::thread::hardware_concurrency());
  if (n < 1) n = 1;
  if (const char* env = std::getenv("GENRELPOSE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) n = std::min(n, cap);
  }
  return std::min(n, std::max(1, work_items));
}

}  // namespace detail

inline BenchReport run_bench(const BenchConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("bench needs at least 1 trial");
  if (cfg.levels.empty()) throw std::invalid_argument("bench needs at least 1 noise level");

  const auto t0 = std::chrono::steady_clock::now();
  BenchReport report;
  report.config = cfg;
  report.levels.resize(cfg.levels.size());
  for (std::size_t li = 0; li < cfg.levels.size(); ++li) {
    report.levels[li].level = cfg.levels[li];
    report.levels[li].trials.resize(cfg.trials);
  }

  const int total = static_cast<int>(cfg.levels.size()) * cfg.trials;
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int idx = next.fetch_add(1); idx < total; idx = next.fetch_add(1)) {
      const int li = idx / cfg.trials;
      const int trial = idx % cfg.trials;
      report.levels[li].trials[trial] = run_trial(cfg, li, cfg.levels[li], trial);
    }
  };
  const int n_threads = detail::bench_thread_count(cfg, total);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  for (BenchLevel& lvl : report.levels) {
    std::vector<double> er, et, ed;
    for (const TrialResult& tr : lvl.trials) {
      if (tr.status == TrialStatus::failed) {
        ++lvl.stats.failures;
        continue;
      }
      er.push_back(tr.eps_r_deg);
      et.push_back(tr.eps_t);
      ed.push_back(tr.eps_tdir_deg);
    }
    lvl.stats.mean_eps_r_deg = detail::mean_of(er);
    lvl.stats.median_eps_r_deg = detail::median_of(er);
    lvl.stats.mean_eps_t = detail::mean_of(et);
    lvl.stats.median_eps_t = detail::median_of(et);
    lvl.stats.mean_eps_tdir_deg = detail::mean_of(ed);
    lvl.stats.median_eps_tdir_deg = detail::median_of(ed);
  }
  report.total_runtime_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return report;
}

}  // namespace genrelpose
