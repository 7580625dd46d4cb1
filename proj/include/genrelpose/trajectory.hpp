#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "genrelpose/geometry.hpp"

namespace genrelpose {

// Composes step poses (X_{k+1} = R X_k + t) into world poses of each frame,
// starting from the identity; returns n+1 poses for n steps.
inline std::vector<RelativePose> accumulate_trajectory(
    const std::vector<RelativePose>& steps) {
  std::vector<RelativePose> world(1);
  for (const RelativePose& step : steps) {
    const RelativePose& prev = world.back();
    RelativePose next;
    next.R = prev.R * step.R.transpose();
    next.t = prev.t - next.R * step.t;
    world.push_back(next);
  }
  return world;
}

// RMS position error between two world trajectories; the shared initial
// identity frame is excluded. No alignment is applied.
inline double ate(const std::vector<RelativePose>& traj,
                  const std::vector<RelativePose>& gt) {
  if (traj.size() != gt.size())
    throw std::invalid_argument("trajectory length mismatch: " +
                                std::to_string(traj.size()) + " vs " +
                                std::to_string(gt.size()));
  if (traj.size() <= 1) return 0.0;
  double acc = 0.0;
  for (std::size_t k = 1; k < traj.size(); ++k)
    acc += (traj[k].t - gt[k].t).squaredNorm();
  return std::sqrt(acc / static_cast<double>(traj.size() - 1));
}

inline double ate_of_steps(const std::vector<RelativePose>& est_steps,
                           const std::vector<RelativePose>& gt_steps) {
  return ate(accumulate_trajectory(est_steps), accumulate_trajectory(gt_steps));
}

}  // namespace genrelpose
