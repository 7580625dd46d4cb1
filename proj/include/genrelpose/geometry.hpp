#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace genrelpose {

using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

// Yaw parameterization used by the solver.
//   full:       u is the Cayley parameter s = tan(theta_y / 2)
//   linearized: u is theta_y itself (radians), small-angle rotation model
enum class SolveMode { full, linearized };

// Gravity-referenced attitude of one body frame, radians.
// roll rotates about the body x axis, pitch about the body z axis.
struct ImuAttitude {
  double roll = 0.0;
  double pitch = 0.0;
};

inline Mat3 rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << 1, 0, 0, 0, c, -s, 0, s, c;
  return R;
}

inline Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, 0, s, 0, 1, 0, -s, 0, c;
  return R;
}

inline Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Mat3 R;
  R << c, -s, 0, s, c, 0, 0, 0, 1;
  return R;
}

inline Mat3 imu_rotation(const ImuAttitude& att) {
  return rot_x(att.roll) * rot_z(att.pitch);
}

// Rotation about y with s = tan(theta_y / 2).
inline Mat3 cayley_y(double s) {
  const double a = 1.0 + s * s;
  Mat3 R;
  R << (1.0 - s * s) / a, 0.0, 2.0 * s / a,
       0.0, 1.0, 0.0,
       -2.0 * s / a, 0.0, (1.0 - s * s) / a;
  return R;
}

inline double cayley_from_angle(double theta) { return std::tan(theta / 2.0); }
inline double angle_from_cayley(double s) { return 2.0 * std::atan(s); }

// Small-angle yaw model R approx I + theta * d(rot_y)/d(theta)|_0.
inline Mat3 yaw_linearized(double theta) {
  Mat3 R;
  R << 1, 0, theta, 0, 1, 0, -theta, 0, 1;
  return R;
}

inline Mat3 yaw_matrix(double u, SolveMode mode) {
  return mode == SolveMode::full ? cayley_y(u) : yaw_linearized(u);
}

inline Mat3 skew(const Vec3& v) {
  Mat3 S;
  S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return S;
}

inline bool is_rotation(const Mat3& R, double tol = 1e-6) {
  return (R.transpose() * R - Mat3::Identity()).norm() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

// Camera pose in the body frame: X_body = R * X_cam + t.
struct RigCamera {
  int id = 0;
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

struct RigExtrinsics {
  std::vector<RigCamera> cameras;

  const RigCamera& camera(int id) const {
    for (const RigCamera& c : cameras)
      if (c.id == id) return c;
    throw std::invalid_argument("rig has no camera with id " + std::to_string(id));
  }
};

// Normalized image points (z = 1) in cameras cam_i / cam_j plus the 2x2 local
// affine frame change A mapping directions so that (E^T x')_12 + A (E x)_12 = 0.
struct AffineCorrespondence {
  int cam_i = 0;
  int cam_j = 0;
  Vec3 x_i = Vec3::UnitZ();
  Vec3 x_j = Vec3::UnitZ();
  Mat2 A = Mat2::Identity();
};

struct PluckerLine {
  Vec3 direction = Vec3::UnitZ();
  Vec3 moment = Vec3::Zero();
};

inline PluckerLine plucker(const Vec3& x, const RigCamera& cam) {
  PluckerLine l;
  l.direction = (cam.R * x).normalized();
  l.moment = cam.t.cross(l.direction);
  return l;
}

// Gravity-aligned pose: yaw Cayley parameter s and aligned translation.
struct AlignedPose {
  double s = 0.0;
  Vec3 t_tilde = Vec3::Zero();
};

// Body-frame relative pose: X_j = R * X_i + t.
struct RelativePose {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();
};

inline RelativePose unaligned_pose(const AlignedPose& p, const ImuAttitude& att_i,
                                   const ImuAttitude& att_j) {
  const Mat3 Ri = imu_rotation(att_i);
  const Mat3 Rj = imu_rotation(att_j);
  RelativePose out;
  out.R = Rj.transpose() * cayley_y(p.s) * Ri;
  out.t = Rj.transpose() * p.t_tilde;
  return out;
}

// Essential matrix between camera cam_a (frame i) and camera cam_b (frame j)
// under body pose (R, t): E = R_b^T (R [t_a]x + [t - t_b]x R) R_a.
inline Mat3 pairwise_essential(const RigCamera& cam_a, const RigCamera& cam_b,
                               const RelativePose& pose) {
  return cam_b.R.transpose() *
         (pose.R * skew(cam_a.t) + skew(pose.t - cam_b.t) * pose.R) * cam_a.R;
}

struct ConstraintResidual {
  double epipolar = 0.0;
  Vec2 affine = Vec2::Zero();
};

// Residuals for the homogeneous translation (t_tilde, t4); linear in both.
// t4 scales every translation-independent term, so basis evaluations
// (e_b, 0) and (0, 1) read off the constraint row coefficients exactly.
inline ConstraintResidual direct_residuals_homogeneous(
    const AffineCorrespondence& c, const RigExtrinsics& rig, const ImuAttitude& att_i,
    const ImuAttitude& att_j, double u, const Vec3& t_tilde, double t4,
    SolveMode mode = SolveMode::full) {
  const RigCamera& ca = rig.camera(c.cam_i);
  const RigCamera& cb = rig.camera(c.cam_j);
  const Mat3 Ri = imu_rotation(att_i);
  const Mat3 Rj = imu_rotation(att_j);
  const Mat3 Rbar = Rj.transpose() * yaw_matrix(u, mode) * Ri;
  const Vec3 t = Rj.transpose() * t_tilde;

  const PluckerLine la = plucker(c.x_i, ca);
  const PluckerLine lb = plucker(c.x_j, cb);

  ConstraintResidual r;
  r.epipolar = lb.direction.dot(skew(t) * (Rbar * la.direction)) +
               t4 * (lb.direction.dot(Rbar * la.moment) +
                     lb.moment.dot(Rbar * la.direction));

  const Mat3 E = cb.R.transpose() *
                 (t4 * (Rbar * skew(ca.t) - skew(cb.t) * Rbar) + skew(t) * Rbar) * ca.R;
  r.affine = (E.transpose() * c.x_j).head<2>() + c.A * (E * c.x_i).head<2>();
  return r;
}

inline ConstraintResidual direct_residuals(const AffineCorrespondence& c,
                                           const RigExtrinsics& rig,
                                           const ImuAttitude& att_i,
                                           const ImuAttitude& att_j,
                                           const AlignedPose& pose,
                                           SolveMode mode = SolveMode::full) {
  return direct_residuals_homogeneous(c, rig, att_i, att_j, pose.s, pose.t_tilde, 1.0,
                                      mode);
}

// arccos((trace(Ra Rb^T) - 1)/2), evaluated through half-angle sine and cosine
// so angles near zero keep full precision instead of flooring at sqrt(eps)
inline double eps_rotation_deg(const Mat3& Ra, const Mat3& Rb) {
  const double tr = (Ra.transpose() * Rb).trace();
  const double shalf = (Ra - Rb).norm() / std::sqrt(2.0);
  const double chalf = std::sqrt(std::max(0.0, tr + 1.0));
  return rad2deg(2.0 * std::atan2(shalf, chalf));
}

inline double eps_translation(const Vec3& ta, const Vec3& tb) {
  const double denom = ta.norm() + tb.norm();
  if (denom < 1e-300) return 0.0;
  return 2.0 * (ta - tb).norm() / denom;
}

inline double eps_direction_deg(const Vec3& ta, const Vec3& tb) {
  const double denom = ta.norm() * tb.norm();
  if (denom < 1e-300) return 0.0;
  return rad2deg(std::acos(std::clamp(ta.dot(tb) / denom, -1.0, 1.0)));
}

}  // namespace genrelpose
