#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "genrelpose/constraints.hpp"
#include "genrelpose/polynomial.hpp"

namespace genrelpose {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IllConditionedError : SolverError {
  using SolverError::SolverError;
};
struct StructuralError : SolverError {
  using SolverError::SolverError;
};

// Numerator polynomials of the characteristic coefficients of the cost and of
// their derivatives:
//   full:       g_i = f_i * (1+u^2)^(2i),  w_i = g_i' * (1+u^2) - 4 i u g_i
//   linearized: g_i = f_i,                 w_i = g_i'
// where det(C - lambda I) = lambda^4 + f_1 lambda^3 + f_2 lambda^2 + f_3 lambda + f_4.
// The cost is scaled by 1/scale first; stationary points are unaffected.
struct CharSystem {
  SolveMode mode = SolveMode::full;
  double scale = 1.0;
  std::array<Poly, 4> g;
  std::array<Poly, 4> w;
};

namespace detail {

inline Poly det3(const Poly& a, const Poly& b, const Poly& c, const Poly& d,
                 const Poly& e, const Poly& f, const Poly& g, const Poly& h,
                 const Poly& i) {
  return poly_add(poly_sub(poly_mul(a, poly_sub(poly_mul(e, i), poly_mul(f, h))),
                           poly_mul(b, poly_sub(poly_mul(d, i), poly_mul(f, g)))),
                  poly_mul(c, poly_sub(poly_mul(d, h), poly_mul(e, g))));
}

}  // namespace detail

inline CharSystem char_polys(const CostPoly& cp) {
  CharSystem cs;
  cs.mode = cp.mode;

  double scale = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int p = 0; p < 5; ++p) scale = std::max(scale, std::abs(cp.num[i][j][p]));
  if (scale == 0.0) scale = 1.0;
  cs.scale = scale;

  Poly P[4][4];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      P[i][j].assign(5, 0.0);
      for (int p = 0; p < 5; ++p) P[i][j][p] = cp.num[i][j][p] / scale;
    }

  Poly tr;
  for (int i = 0; i < 4; ++i) tr = poly_add(tr, P[i][i]);

  Poly C2[4][4];
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) C2[i][j] = poly_add(C2[i][j], poly_mul(P[i][k], P[k][j]));

  Poly tr2, tr3;
  for (int i = 0; i < 4; ++i) tr2 = poly_add(tr2, C2[i][i]);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) tr3 = poly_add(tr3, poly_mul(C2[i][k], P[k][i]));

  const Poly det =
      poly_add(poly_sub(poly_mul(P[0][0], detail::det3(P[1][1], P[1][2], P[1][3], P[2][1],
                                                       P[2][2], P[2][3], P[3][1], P[3][2],
                                                       P[3][3])),
                        poly_mul(P[0][1], detail::det3(P[1][0], P[1][2], P[1][3], P[2][0],
                                                       P[2][2], P[2][3], P[3][0], P[3][2],
                                                       P[3][3]))),
               poly_sub(poly_mul(P[0][2], detail::det3(P[1][0], P[1][1], P[1][3], P[2][0],
                                                       P[2][1], P[2][3], P[3][0], P[3][1],
                                                       P[3][3])),
                        poly_mul(P[0][3], detail::det3(P[1][0], P[1][1], P[1][2], P[2][0],
                                                       P[2][1], P[2][2], P[3][0], P[3][1],
                                                       P[3][2]))));

  cs.g[0] = poly_scale(tr, -1.0);
  cs.g[1] = poly_scale(poly_sub(poly_mul(tr, tr), tr2), 0.5);
  cs.g[2] = poly_add(poly_scale(poly_mul(tr, poly_mul(tr, tr)), -1.0 / 6.0),
                     poly_add(poly_scale(poly_mul(tr, tr2), 0.5), poly_scale(tr3, -1.0 / 3.0)));
  cs.g[3] = det;

  if (cp.mode == SolveMode::full) {
    const Poly alpha{1.0, 0.0, 1.0};
    for (int i = 0; i < 4; ++i)
      cs.w[i] = poly_sub(poly_mul(poly_deriv(cs.g[i]), alpha),
                         poly_scale(poly_shift_up(cs.g[i]), 4.0 * (i + 1)));
  } else {
    for (int i = 0; i < 4; ++i) cs.w[i] = poly_deriv(cs.g[i]);
  }
  return cs;
}

// 7x7 polynomial pencil B(u) acting on the monomial vector
// J = [beta^6 ... beta 1], beta = (1+u^2)^2 lambda (full) or lambda (linearized).
// Rows 0-2: characteristic quartic shifted by beta^0..beta^2; rows 3-6: the
// derivative cubic shifted by beta^0..beta^3.
struct PencilB {
  SolveMode mode = SolveMode::full;
  int degree = 16;
  std::vector<Eigen::Matrix<double, 7, 7>> B;

  Eigen::Matrix<double, 7, 7> eval(double u) const {
    Eigen::Matrix<double, 7, 7> M = B.back();
    for (std::size_t k = B.size() - 1; k-- > 0;) M = M * u + B[k];
    return M;
  }
};

inline PencilB build_pencil(const CharSystem& cs) {
  PencilB p;
  p.mode = cs.mode;
  p.degree = cs.mode == SolveMode::full ? 16 : 8;

  std::array<std::array<Poly, 7>, 7> ent;
  const Poly one{1.0};
  for (int shift = 0; shift < 3; ++shift) {
    ent[shift][2 - shift] = one;
    for (int i = 0; i < 4; ++i) ent[shift][3 - shift + i] = cs.g[i];
  }
  for (int shift = 0; shift < 4; ++shift)
    for (int i = 0; i < 4; ++i) ent[3 + shift][3 - shift + i] = cs.w[i];

  for (int r = 0; r < 7; ++r)
    for (int c = 0; c < 7; ++c)
      if (poly_degree(ent[r][c]) > p.degree)
        throw StructuralError("pencil entry degree exceeds " + std::to_string(p.degree));

  p.B.assign(p.degree + 1, Eigen::Matrix<double, 7, 7>::Zero());
  for (int k = 0; k <= p.degree; ++k)
    for (int r = 0; r < 7; ++r)
      for (int c = 0; c < 7; ++c) p.B[k](r, c) = poly_coeff(ent[r][c], k);
  return p;
}

// Yaw candidates from the block companion of B in z = 1/u, deflated by its
// structural zero columns, eigenvalues via real Schur.
struct CandidateSet {
  std::vector<double> s;
  int companion_size = 0;
};

namespace detail {

// Two-sided power-of-two equilibration of the pencil, driven by the constant
// slice (the matrix that gets inverted). Row and column scalings move no
// eigenvalue of B(u) and keep exact zeros exact.
inline void equilibrate_pencil(std::vector<Eigen::Matrix<double, 7, 7>>& B) {
  for (int sweep = 0; sweep < 20; ++sweep) {
    bool changed = false;
    for (int i = 0; i < 7; ++i) {
      const double m = B[0].row(i).cwiseAbs().maxCoeff();
      if (m > 0.0) {
        const double f = std::exp2(-std::round(std::log2(m)));
        if (f != 1.0) {
          for (auto& Bk : B) Bk.row(i) *= f;
          changed = true;
        }
      }
    }
    for (int j = 0; j < 7; ++j) {
      const double m = B[0].col(j).cwiseAbs().maxCoeff();
      if (m > 0.0) {
        const double f = std::exp2(-std::round(std::log2(m)));
        if (f != 1.0) {
          for (auto& Bk : B) Bk.col(j) *= f;
          changed = true;
        }
      }
    }
    if (!changed) break;
  }
}

// Parlett-Reinsch balancing: diagonal similarity with power-of-two factors, so
// the spectrum is untouched and the Schur iteration sees a well-scaled matrix.
inline void balance_similarity(Eigen::MatrixXd& A) {
  const int n = static_cast<int>(A.rows());
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool converged = true;
    for (int i = 0; i < n; ++i) {
      double c = A.col(i).cwiseAbs().sum() - std::abs(A(i, i));
      double r = A.row(i).cwiseAbs().sum() - std::abs(A(i, i));
      if (c == 0.0 || r == 0.0) continue;
      double f = 1.0;
      while (c < r * 0.5) {
        c *= 2.0;
        r *= 0.5;
        f *= 2.0;
      }
      while (c >= r * 2.0) {
        c *= 0.5;
        r *= 2.0;
        f *= 0.5;
      }
      if (f != 1.0) {
        A.col(i) *= f;
        A.row(i) /= f;
        converged = false;
      }
    }
    if (converged) break;
  }
}

}  // namespace detail

inline CandidateSet companion_eigen(const PencilB& p) {
  using Mat7 = Eigen::Matrix<double, 7, 7>;
  const int D = p.degree;
  const int n = 7 * D;

  std::vector<Mat7> B = p.B;
  detail::equilibrate_pencil(B);

  const Mat7 B0 = B[0];
  Eigen::JacobiSVD<Mat7> svd(B0);
  const auto& sv = svd.singularValues();
  if (!(sv(6) > 0.0) || sv(0) / sv(6) > 1e12)
    throw IllConditionedError("pencil constant-term matrix is ill conditioned");

  Eigen::PartialPivLU<Mat7> lu(B0);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(n, n);
  for (int m = 0; m + 1 < D; ++m) G.block<7, 7>(7 * m, 7 * (m + 1)).setIdentity();
  for (int k = 1; k <= D; ++k) G.block<7, 7>(7 * (D - 1), 7 * (D - k)) = -lu.solve(B[k]);

  std::vector<bool> alive(n, true);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int j = 0; j < n; ++j) {
      if (!alive[j]) continue;
      double colmax = 0.0;
      for (int i = 0; i < n; ++i)
        if (alive[i]) colmax = std::max(colmax, std::abs(G(i, j)));
      if (colmax < 1e-12) {
        alive[j] = false;
        changed = true;
      }
    }
  }
  std::vector<int> keep;
  for (int j = 0; j < n; ++j)
    if (alive[j]) keep.push_back(j);

  const int expected = p.mode == SolveMode::full ? 88 : 40;
  if (static_cast<int>(keep.size()) != expected)
    throw StructuralError("companion deflated to " + std::to_string(keep.size()) +
                          " rows, expected " + std::to_string(expected));

  Eigen::MatrixXd Gd(expected, expected);
  for (int i = 0; i < expected; ++i)
    for (int j = 0; j < expected; ++j) Gd(i, j) = G(keep[i], keep[j]);
  detail::balance_similarity(Gd);

  Eigen::RealSchur<Eigen::MatrixXd> schur(Gd, false);
  if (schur.info() != Eigen::Success) throw SolverError("schur iteration did not converge");
  const Eigen::MatrixXd& T = schur.matrixT();

  CandidateSet out;
  out.companion_size = expected;
  auto push_real = [&](double z) {
    if (std::abs(z) >= 1e-10) out.s.push_back(1.0 / z);
  };
  int i = 0;
  while (i < expected) {
    if (i == expected - 1 || T(i + 1, i) == 0.0) {
      push_real(T(i, i));
      ++i;
    } else {
      const double mean = (T(i, i) + T(i + 1, i + 1)) / 2.0;
      const double pdif = (T(i, i) - T(i + 1, i + 1)) / 2.0;
      const double disc = pdif * pdif + T(i + 1, i) * T(i, i + 1);
      if (disc >= 0.0) {
        push_real(mean + std::sqrt(disc));
        push_real(mean - std::sqrt(disc));
      } else {
        const double im = std::sqrt(-disc);
        if (im <= 1e-6 * (1.0 + std::abs(mean))) push_real(mean);
      }
      i += 2;
    }
  }
  out.s.push_back(0.0);

  std::sort(out.s.begin(), out.s.end());
  out.s.erase(std::unique(out.s.begin(), out.s.end(),
                          [](double a, double b) {
                            return std::abs(a - b) <= 1e-12 * (1.0 + std::abs(a));
                          }),
              out.s.end());
  return out;
}

struct ScoredCandidate {
  double s = 0.0;
  double lambda_min = 0.0;
};

struct Selection {
  double u = 0.0;
  double lambda_min = std::numeric_limits<double>::infinity();
  Vec4 t_hat = Vec4::Zero();
  bool degenerate_translation = false;
  std::vector<ScoredCandidate> scored;
};

namespace detail {

struct MinEig {
  double lambda = 0.0;
  Vec4 v = Vec4::UnitW();
};

inline MinEig min_eig(const CostPoly& cp, double u) {
  Eigen::SelfAdjointEigenSolver<Mat4> es(eval_cost(cp, u));
  return {es.eigenvalues()(0), es.eigenvectors().col(0)};
}

// Newton refinement of a stationary point of lambda_min(u). The eigenvalue
// slope v^T C'(u) v is accurate to second order in the eigenvector error, so
// it localizes the minimizer far below the noise floor of lambda itself;
// steps are rejected unless they stay local and do not increase lambda.
inline void polish_minimum(const CostPoly& cp, double& u, double& lambda, Vec4& v) {
  const double lam_tol = 1e-12 * (1.0 + eval_cost(cp, u).cwiseAbs().maxCoeff());
  auto slope = [&](double x, const Vec4& w) { return w.dot(eval_cost_deriv(cp, x) * w); };
  for (int it = 0; it < 3; ++it) {
    const double h = 1e-5 * (1.0 + std::abs(u));
    const MinEig ep = min_eig(cp, u + h);
    const MinEig em = min_eig(cp, u - h);
    const double f = slope(u, v);
    const double fp = (slope(u + h, ep.v) - slope(u - h, em.v)) / (2.0 * h);
    if (!std::isfinite(fp) || fp <= 0.0) break;
    const double du = -f / fp;
    if (!std::isfinite(du) || std::abs(du) > h) break;
    const MinEig next = min_eig(cp, u + du);
    if (next.lambda > lambda + lam_tol) break;
    u += du;
    lambda = next.lambda;
    v = next.v;
    if (std::abs(du) <= 1e-14 * (1.0 + std::abs(u))) break;
  }
}

}  // namespace detail

// Scores every candidate on the true (unscaled) cost and keeps the global
// minimum; exact lambda ties go to the smaller |u|. The winner is polished by
// Newton on the eigenvalue slope and rescored. t_hat is the minimizing
// eigenvector rescaled to unit fourth component; if that component is below
// 1e-9 the translation scale is unobservable and the unit eigenvector is kept.
inline Selection select_solution(const CandidateSet& cands, const CostPoly& cp) {
  if (cands.s.empty()) throw SolverError("empty candidate set");
  Selection sel;
  Vec4 best_v = Vec4::UnitW();
  int best_idx = -1;
  for (double u : cands.s) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(eval_cost(cp, u));
    const double lam = es.eigenvalues()(0);
    sel.scored.push_back({u, lam});
    if (lam < sel.lambda_min ||
        (lam == sel.lambda_min && std::abs(u) < std::abs(sel.u))) {
      sel.u = u;
      sel.lambda_min = lam;
      best_v = es.eigenvectors().col(0);
      best_idx = static_cast<int>(sel.scored.size()) - 1;
    }
  }
  detail::polish_minimum(cp, sel.u, sel.lambda_min, best_v);
  sel.scored[best_idx] = {sel.u, sel.lambda_min};
  std::sort(sel.scored.begin(), sel.scored.end(), [](const auto& a, const auto& b) {
    return a.lambda_min < b.lambda_min ||
           (a.lambda_min == b.lambda_min && std::abs(a.s) < std::abs(b.s));
  });
  if (std::abs(best_v(3)) < 1e-9) {
    sel.degenerate_translation = true;
    sel.t_hat = best_v;
  } else {
    sel.t_hat = best_v / best_v(3);
  }
  return sel;
}

// Exhaustive reference: minimum eigenvalue of the cost scanned over the full
// yaw range, refined by golden section and iterated parabolic fits. Returns
// (yaw parameter, lambda_min). The refine tolerance is in degrees.
inline std::pair<double, double> grid_oracle(const CostPoly& cp,
                                             double half_range_deg = 179.0,
                                             double coarse_step_deg = 0.01,
                                             double refine_tol_deg = 1e-10) {
  auto param = [&](double theta_deg) {
    const double th = deg2rad(theta_deg);
    return cp.mode == SolveMode::full ? std::tan(th / 2.0) : th;
  };
  auto value = [&](double theta_deg) {
    Eigen::SelfAdjointEigenSolver<Mat4> es(eval_cost(cp, param(theta_deg)),
                                           Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  };

  const long steps = std::lround(2.0 * half_range_deg / coarse_step_deg);
  double best_theta = -half_range_deg;
  double best_val = value(best_theta);
  for (long k = 1; k <= steps; ++k) {
    const double theta = -half_range_deg + static_cast<double>(k) * coarse_step_deg;
    const double v = value(theta);
    if (v < best_val) {
      best_val = v;
      best_theta = theta;
    }
  }

  double a = std::max(-half_range_deg, best_theta - coarse_step_deg);
  double b = std::min(half_range_deg, best_theta + coarse_step_deg);
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = value(c), fd = value(d);
  while (b - a > 1e-5) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = value(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = value(d);
    }
  }

  double center = (a + b) / 2.0, fcenter = value(center);
  double h = b - a;
  for (int it = 0; it < 80 && h > refine_tol_deg; ++it) {
    const double fm = value(center - h), fp = value(center + h);
    if (fm < fcenter) {
      center -= h;
      fcenter = fm;
      continue;
    }
    if (fp < fcenter) {
      center += h;
      fcenter = fp;
      continue;
    }
    const double denom = fm - 2.0 * fcenter + fp;
    if (denom > 0.0) {
      const double delta = std::clamp(0.5 * h * (fm - fp) / denom, -h, h);
      const double cand = center + delta, fcand = value(cand);
      if (fcand <= fcenter) {
        center = cand;
        fcenter = fcand;
      }
    }
    h *= 0.25;
  }
  center = std::clamp(center, -half_range_deg, half_range_deg);
  return {param(center), fcenter};
}

struct SolveReport {
  SolveMode mode = SolveMode::full;
  AlignedPose aligned;
  RelativePose pose;
  double lambda_min = 0.0;
  Vec4 t_hat = Vec4::Zero();
  std::vector<ScoredCandidate> candidates;
  int companion_size = 0;
  bool degenerate_translation = false;
  bool fallback_used = false;
  double wall_time_ms = 0.0;
};

inline SolveReport solve(const std::vector<AffineCorrespondence>& corrs,
                         const RigExtrinsics& rig, const ImuAttitude& att_i,
                         const ImuAttitude& att_j, SolveMode mode = SolveMode::full) {
  const auto t0 = std::chrono::steady_clock::now();
  if (corrs.size() < 2)
    throw std::invalid_argument("need at least 2 affine correspondences");

  std::vector<RowPoly> rows;
  rows.reserve(3 * corrs.size());
  for (const AffineCorrespondence& c : corrs) {
    const auto r3 = constraint_rows(c, rig, att_i, att_j, mode);
    rows.insert(rows.end(), r3.begin(), r3.end());
  }
  const CostPoly cp = stack_cost(rows, mode);
  const CharSystem cs = char_polys(cp);
  const PencilB pb = build_pencil(cs);

  SolveReport rep;
  rep.mode = mode;
  CandidateSet cands;
  try {
    cands = companion_eigen(pb);
  } catch (const IllConditionedError&) {
    cands.s = {grid_oracle(cp).first, 0.0};
    cands.companion_size = 0;
    rep.fallback_used = true;
  }

  const Selection sel = select_solution(cands, cp);
  rep.companion_size = cands.companion_size;
  rep.lambda_min = sel.lambda_min;
  rep.t_hat = sel.t_hat;
  rep.candidates = sel.scored;
  rep.degenerate_translation = sel.degenerate_translation;
  rep.aligned.s = mode == SolveMode::full ? sel.u : std::tan(sel.u / 2.0);
  rep.aligned.t_tilde = sel.t_hat.head<3>();
  rep.pose = unaligned_pose(rep.aligned, att_i, att_j);
  rep.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();
  return rep;
}

}  // namespace genrelpose
