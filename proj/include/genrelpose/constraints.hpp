#pragma once

#include <array>
#include <utility>
#include <vector>

#include "genrelpose/geometry.hpp"

namespace genrelpose {

// One constraint row: coefficients of t_hat = (t_tilde, 1), each entry a
// polynomial of degree <= 2 in the yaw parameter. In full mode the row equals
// (1 + u^2) times the residual coefficient, clearing the Cayley denominator.
struct RowPoly {
  Eigen::Matrix<double, 4, 3> c = Eigen::Matrix<double, 4, 3>::Zero();

  Vec4 eval(double u) const { return c.col(0) + u * (c.col(1) + u * c.col(2)); }
};

// Rows are recovered from exact evaluations of the homogeneous residual at
// interpolation nodes; the residual is linear in t_hat, so four basis
// evaluations per node give the coefficients exactly.
inline std::array<RowPoly, 3> constraint_rows(const AffineCorrespondence& c,
                                              const RigExtrinsics& rig,
                                              const ImuAttitude& att_i,
                                              const ImuAttitude& att_j,
                                              SolveMode mode = SolveMode::full) {
  const bool full = mode == SolveMode::full;
  const int n_nodes = full ? 3 : 2;
  const double nodes[3] = {full ? -1.0 : 0.0, full ? 0.0 : 1.0, 1.0};

  double vals[3][4][3] = {};
  for (int n = 0; n < n_nodes; ++n) {
    const double u = nodes[n];
    const double alpha = full ? 1.0 + u * u : 1.0;
    for (int b = 0; b < 4; ++b) {
      Vec3 tt = Vec3::Zero();
      double t4 = 0.0;
      if (b < 3)
        tt[b] = 1.0;
      else
        t4 = 1.0;
      const ConstraintResidual r =
          direct_residuals_homogeneous(c, rig, att_i, att_j, u, tt, t4, mode);
      vals[0][b][n] = alpha * r.epipolar;
      vals[1][b][n] = alpha * r.affine[0];
      vals[2][b][n] = alpha * r.affine[1];
    }
  }

  std::array<RowPoly, 3> rows;
  for (int k = 0; k < 3; ++k)
    for (int b = 0; b < 4; ++b) {
      if (full) {
        const double vm = vals[k][b][0], v0 = vals[k][b][1], vp = vals[k][b][2];
        rows[k].c(b, 0) = v0;
        rows[k].c(b, 1) = (vp - vm) / 2.0;
        rows[k].c(b, 2) = (vp + vm) / 2.0 - v0;
      } else {
        // linear in theta; quadratic coefficient kept exactly zero so the
        // degree table of the small-angle system holds bitwise
        rows[k].c(b, 0) = vals[k][b][0];
        rows[k].c(b, 1) = vals[k][b][1] - vals[k][b][0];
        rows[k].c(b, 2) = 0.0;
      }
    }
  return rows;
}

inline RowPoly epipolar_row(const AffineCorrespondence& c, const RigExtrinsics& rig,
                            const ImuAttitude& att_i, const ImuAttitude& att_j,
                            SolveMode mode = SolveMode::full) {
  return constraint_rows(c, rig, att_i, att_j, mode)[0];
}

inline std::pair<RowPoly, RowPoly> affine_rows(const AffineCorrespondence& c,
                                               const RigExtrinsics& rig,
                                               const ImuAttitude& att_i,
                                               const ImuAttitude& att_j,
                                               SolveMode mode = SolveMode::full) {
  auto r = constraint_rows(c, rig, att_i, att_j, mode);
  return {r[1], r[2]};
}

// 4x4 cost numerator C(u) = sum_i m_i(u) m_i(u)^T, entries of degree <= 4.
// In full mode the true cost is num / (1 + u^2)^2.
struct CostPoly {
  SolveMode mode = SolveMode::full;
  int n_rows = 0;
  std::array<std::array<std::array<double, 5>, 4>, 4> num{};

  void add_outer(const RowPoly& r) {
    for (int i = 0; i < 4; ++i)
      for (int j = i; j < 4; ++j) {
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) num[i][j][p + q] += r.c(i, p) * r.c(j, q);
        if (j > i) num[j][i] = num[i][j];
      }
    ++n_rows;
  }

  Mat4 eval(double u) const {
    Mat4 C;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const auto& a = num[i][j];
        C(i, j) = ((a[4] * u + a[3]) * u + a[2]) * u * u + a[1] * u + a[0];
      }
    if (mode == SolveMode::full) {
      const double alpha = 1.0 + u * u;
      C /= alpha * alpha;
    }
    return C;
  }

  // d/du of eval: N'/alpha^2 - (4u/alpha) * (N/alpha^2) in full mode
  Mat4 eval_deriv(double u) const {
    Mat4 D;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const auto& a = num[i][j];
        D(i, j) = ((4.0 * a[4] * u + 3.0 * a[3]) * u + 2.0 * a[2]) * u + a[1];
      }
    if (mode == SolveMode::full) {
      const double alpha = 1.0 + u * u;
      D /= alpha * alpha;
      D -= (4.0 * u / alpha) * eval(u);
    }
    return D;
  }
};

inline CostPoly stack_cost(const std::vector<RowPoly>& rows,
                           SolveMode mode = SolveMode::full) {
  if (rows.size() < 6)
    throw std::invalid_argument("stack_cost needs at least 6 constraint rows, got " +
                                std::to_string(rows.size()));
  CostPoly cp;
  cp.mode = mode;
  for (const RowPoly& r : rows) cp.add_outer(r);
  return cp;
}

inline Mat4 eval_cost(const CostPoly& cp, double u) { return cp.eval(u); }
inline Mat4 eval_cost_deriv(const CostPoly& cp, double u) { return cp.eval_deriv(u); }

}  // namespace genrelpose
