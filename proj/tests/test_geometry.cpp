#include <catch2/catch_amalgamated.hpp>

#include <genrelpose/genrelpose.hpp>

#include "test_util.hpp"

using namespace genrelpose;
using testutil::random_attitude;
using testutil::random_rotation;

TEST_CASE("imu_rotation basic values") {
  CHECK(imu_rotation({0.0, 0.0}).isApprox(Mat3::Identity(), 1e-15));

  Mat3 expected;
  expected << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  CHECK((imu_rotation({kPi / 2.0, 0.0}) - expected).norm() < 1e-15);
}

TEST_CASE("imu_rotation matches direct product of axis rotations") {
  const double roll = 0.1, pitch = -0.2;
  const double cr = std::cos(roll), sr = std::sin(roll);
  const double cp = std::cos(pitch), sp = std::sin(pitch);
  Mat3 Rx, Rz;
  Rx << 1, 0, 0, 0, cr, -sr, 0, sr, cr;
  Rz << cp, -sp, 0, sp, cp, 0, 0, 0, 1;
  CHECK((imu_rotation({roll, pitch}) - Rx * Rz).norm() < 1e-15);
}

TEST_CASE("imu_rotation stays in SO(3)") {
  Rng rng(11);
  for (int k = 0; k < 1000; ++k) {
    const Mat3 R = imu_rotation({rng.uniform(-kPi, kPi), rng.uniform(-kPi, kPi)});
    CHECK(is_rotation(R, 1e-12));
  }
}

TEST_CASE("cayley_y closed-form values") {
  CHECK(cayley_y(0.0).isApprox(Mat3::Identity(), 1e-15));

  Mat3 quarter;
  quarter << 0, 0, 1, 0, 1, 0, -1, 0, 0;
  CHECK((cayley_y(1.0) - quarter).norm() < 1e-15);

  const double s = std::tan(5.0 * kPi / 360.0);
  CHECK((cayley_y(s) - rot_y(deg2rad(5.0))).norm() < 1e-15);
}

TEST_CASE("cayley_y properties") {
  Rng rng(12);
  for (int k = 0; k < 10000; ++k) {
    const double s = rng.uniform(-50.0, 50.0);
    const Mat3 R = cayley_y(s);
    CHECK(is_rotation(R, 1e-12));
    CHECK((cayley_y(-s) - R.transpose()).norm() < 1e-14);
    CHECK(std::abs(angle_from_cayley(s) - 2.0 * std::atan(s)) == 0.0);
  }
  for (int k = 0; k < 100; ++k) {
    const double theta = rng.uniform(-3.0, 3.0);
    CHECK((cayley_y(cayley_from_angle(theta)) - rot_y(theta)).norm() < 1e-12);
  }
}

TEST_CASE("yaw_linearized is the first-order yaw model") {
  const double theta = 1e-4;
  CHECK((yaw_linearized(theta) - rot_y(theta)).norm() < 1e-7);
  CHECK((yaw_matrix(0.3, SolveMode::full) - cayley_y(0.3)).norm() == 0.0);
  CHECK((yaw_matrix(0.3, SolveMode::linearized) - yaw_linearized(0.3)).norm() == 0.0);
}

TEST_CASE("unaligned_pose identity attitudes") {
  AlignedPose ap{0.2, Vec3(1.0, -2.0, 0.5)};
  const RelativePose p = unaligned_pose(ap, {0, 0}, {0, 0});
  CHECK((p.R - cayley_y(0.2)).norm() < 1e-15);
  CHECK((p.t - ap.t_tilde).norm() == 0.0);
}

TEST_CASE("unaligned_pose zero yaw and translation") {
  const ImuAttitude ai{0.05, -0.1}, aj{-0.02, 0.07};
  const RelativePose p = unaligned_pose({0.0, Vec3::Zero()}, ai, aj);
  CHECK((p.R - imu_rotation(aj).transpose() * imu_rotation(ai)).norm() < 1e-15);
  CHECK(p.t.norm() == 0.0);
}

TEST_CASE("unaligned_pose round-trips to a pure yaw in the aligned frame") {
  Rng rng(13);
  for (int k = 0; k < 300; ++k) {
    const ImuAttitude ai = random_attitude(rng), aj = random_attitude(rng);
    const double s = rng.uniform(-1.0, 1.0);
    const Vec3 tt = rng.unit_vector() * rng.uniform(0.0, 3.0);
    const RelativePose p = unaligned_pose({s, tt}, ai, aj);

    const Mat3 Y = imu_rotation(aj) * p.R * imu_rotation(ai).transpose();
    CHECK((Y - cayley_y(s)).norm() < 1e-12);
    CHECK((imu_rotation(aj) * p.t - tt).norm() < 1e-12);
  }
}

TEST_CASE("plucker lines") {
  RigCamera origin_cam;
  CHECK(plucker(Vec3(0.3, -0.2, 1.0), origin_cam).moment.norm() == 0.0);
  CHECK((plucker(Vec3(0.0, 0.0, 1.0), origin_cam).direction - Vec3::UnitZ()).norm() == 0.0);

  Rng rng(14);
  for (int k = 0; k < 1000; ++k) {
    RigCamera cam;
    cam.R = random_rotation(rng);
    cam.t = rng.unit_vector() * rng.uniform(0.0, 2.0);
    const Vec3 x(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 1.0);
    const PluckerLine l = plucker(x, cam);
    CHECK(std::abs(l.direction.norm() - 1.0) < 1e-14);
    CHECK(std::abs(l.direction.dot(l.moment)) < 1e-14);
  }
}

TEST_CASE("pairwise_essential trivial cases") {
  RigCamera cam;
  cam.t = Vec3(0.3, 0.0, 0.1);
  cam.R = rot_y(0.4);
  CHECK(pairwise_essential(cam, cam, RelativePose{}).norm() < 1e-15);

  RigCamera origin_a, origin_b;
  Rng rng(1);
  RelativePose pose;
  pose.R = random_rotation(rng);
  pose.t = Vec3(0.1, 0.2, -0.3);
  CHECK((pairwise_essential(origin_a, origin_b, pose) - skew(pose.t) * pose.R).norm() <
        1e-15);
}

TEST_CASE("pairwise_essential equals the camera-pair route") {
  Rng rng(15);
  for (int k = 0; k < 500; ++k) {
    RigCamera a, b;
    a.R = random_rotation(rng);
    a.t = rng.unit_vector() * rng.uniform(0.0, 1.0);
    b.R = random_rotation(rng);
    b.t = rng.unit_vector() * rng.uniform(0.0, 1.0);
    RelativePose pose;
    pose.R = random_rotation(rng);
    pose.t = rng.unit_vector() * rng.uniform(0.0, 3.0);

    const Mat3 Rij = b.R.transpose() * pose.R * a.R;
    const Vec3 tij = b.R.transpose() * (pose.R * a.t + pose.t - b.t);
    const Mat3 E_route = skew(tij) * Rij;
    const Mat3 E = pairwise_essential(a, b, pose);
    CHECK((E - E_route).norm() < 1e-12 * (1.0 + E_route.norm()));
  }
}

TEST_CASE("direct_residuals vanish on noise-free instances") {
  Rng rng(16);
  for (int k = 0; k < 10; ++k) {
    const MotionSample motion = sample_motion(MotionMode::random_dir, rng);
    const SyntheticInstance inst = generate_instance(default_rig(), motion, 20, rng);
    double worst = 0.0;
    for (const auto& c : inst.corrs) {
      const ConstraintResidual r =
          direct_residuals(c, inst.rig, inst.att_i, inst.att_j, inst.truth_aligned);
      worst = std::max({worst, std::abs(r.epipolar), r.affine.cwiseAbs().maxCoeff()});
    }
    CHECK(worst <= 1e-10);

    AlignedPose off = inst.truth_aligned;
    off.s += 0.01;
    double biggest = 0.0;
    for (const auto& c : inst.corrs) {
      const ConstraintResidual r =
          direct_residuals(c, inst.rig, inst.att_i, inst.att_j, off);
      biggest = std::max({biggest, std::abs(r.epipolar), r.affine.cwiseAbs().maxCoeff()});
    }
    CHECK(biggest > 1e-6);
  }
}

TEST_CASE("direct_residuals vanish for pure rotation with co-located cameras") {
  Rng rng(17);
  MotionSample motion = sample_motion(MotionMode::random_dir, rng);
  motion.aligned.t_tilde.setZero();
  const SyntheticInstance inst =
      generate_instance(default_rig({4, 0.0}), motion, 12, rng);
  for (const auto& c : inst.corrs) {
    const ConstraintResidual r =
        direct_residuals(c, inst.rig, inst.att_i, inst.att_j, inst.truth_aligned);
    CHECK(std::abs(r.epipolar) <= 1e-10);
    CHECK(r.affine.cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("error metrics") {
  CHECK(eps_rotation_deg(rot_y(0.3), rot_y(0.3)) == 0.0);
  CHECK(std::abs(eps_rotation_deg(Mat3::Identity(), rot_y(deg2rad(10.0))) - 10.0) < 1e-12);

  const Vec3 t(0.3, -1.0, 2.0);
  CHECK(std::abs(eps_translation(t, -t) - 2.0) < 1e-15);
  CHECK(std::abs(eps_direction_deg(t, -t) - 180.0) < 1e-12);
  CHECK(eps_translation(t, t) == 0.0);
  CHECK(eps_direction_deg(t, 3.0 * t) == 0.0);

  Rng rng(18);
  for (int k = 0; k < 1000; ++k) {
    const Vec3 a = rng.unit_vector() * rng.uniform(0.1, 5.0);
    const Vec3 b = rng.unit_vector() * rng.uniform(0.1, 5.0);
    const double et = eps_translation(a, b);
    const double ed = eps_direction_deg(a, b);
    CHECK(et >= 0.0);
    CHECK(et <= 2.0 + 1e-12);
    CHECK(ed >= 0.0);
    CHECK(ed <= 180.0);
    CHECK(std::abs(eps_translation(a, b) - eps_translation(b, a)) == 0.0);
    CHECK(std::abs(eps_direction_deg(2.0 * a, b) - ed) < 1e-9);
  }
}
