#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace genrelpose {

// Dense univariate polynomial, coefficients in ascending power order.
using Poly = std::vector<double>;

inline double poly_coeff(const Poly& p, std::size_t k) {
  return k < p.size() ? p[k] : 0.0;
}

inline double poly_eval(const Poly& p, double x) {
  double acc = 0.0;
  for (std::size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
  return acc;
}

inline Poly poly_add(const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = poly_coeff(a, i) + poly_coeff(b, i);
  return r;
}

inline Poly poly_sub(const Poly& a, const Poly& b) {
  Poly r(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = poly_coeff(a, i) - poly_coeff(b, i);
  return r;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
  if (a.empty() || b.empty()) return {};
  Poly r(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
  return r;
}

inline Poly poly_scale(const Poly& a, double c) {
  Poly r = a;
  for (double& v : r) v *= c;
  return r;
}

inline Poly poly_deriv(const Poly& a) {
  if (a.size() <= 1) return {};
  Poly r(a.size() - 1);
  for (std::size_t i = 1; i < a.size(); ++i) r[i - 1] = a[i] * static_cast<double>(i);
  return r;
}

// Multiply by the variable (shift coefficients up one power).
inline Poly poly_shift_up(const Poly& a) {
  if (a.empty()) return {};
  Poly r(a.size() + 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) r[i + 1] = a[i];
  return r;
}

inline double poly_max_abs(const Poly& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

// Degree ignoring coefficients below rel_tol * max|coeff|; -1 for the zero polynomial.
inline int poly_degree(const Poly& a, double rel_tol = 0.0) {
  const double floor_abs = rel_tol * poly_max_abs(a);
  for (std::size_t i = a.size(); i-- > 0;)
    if (std::abs(a[i]) > floor_abs && a[i] != 0.0) return static_cast<int>(i);
  return -1;
}

}  // namespace genrelpose
