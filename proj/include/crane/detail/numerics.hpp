#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace crane::detail {

/// Fixed Gauss-Legendre rule on [a, b].
template <unsigned N, class F>
double gauss(const F& f, double a, double b) {
  return boost::math::quadrature::gauss<double, N>::integrate(f, a, b);
}

/// Adaptive Simpson with absolute/relative termination. Deterministic.
template <class F>
double adaptive_simpson_impl(const F& f, double a, double b, double fa, double fm, double fb,
                             double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson_impl(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson_impl(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <class F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol, double abs_tol_floor,
                        int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double fa = f(a), fm = f(0.5 * (a + b)), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  const double tol = std::max(abs_tol_floor, rel_tol * std::abs(whole));
  return adaptive_simpson_impl(f, a, b, fa, fm, fb, whole, tol, max_depth);
}

/// Bisection refined to an absolute x tolerance; requires a sign change.
template <class F>
double bisect_root(const F& f, double lo, double hi, double flo, double fhi, double x_tol) {
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::invalid_argument("bisect_root: no sign change");
  while (hi - lo > x_tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0.0) == (flo > 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// Cubic Hermite value on [t0, t1] from endpoint values and derivatives.
inline double hermite(double t, double t0, double t1, double y0, double y1, double d0, double d1) {
  const double h = t1 - t0;
  const double u = (t - t0) / h;
  const double u2 = u * u, u3 = u2 * u;
  return (2.0 * u3 - 3.0 * u2 + 1.0) * y0 + (u3 - 2.0 * u2 + u) * h * d0 +
         (-2.0 * u3 + 3.0 * u2) * y1 + (u3 - u2) * h * d1;
}

/// Derivative of the cubic Hermite interpolant.
inline double hermite_deriv(double t, double t0, double t1, double y0, double y1, double d0,
                            double d1) {
  const double h = t1 - t0;
  const double u = (t - t0) / h;
  const double u2 = u * u;
  return ((6.0 * u2 - 6.0 * u) * y0 + (3.0 * u2 - 4.0 * u + 1.0) * h * d0 +
          (-6.0 * u2 + 6.0 * u) * y1 + (3.0 * u2 - 2.0 * u) * h * d1) /
         h;
}

/// Merges sorted breakpoint lists, dropping near-duplicates (within eps).
std::vector<double> merge_breakpoints(const std::vector<double>& a, const std::vector<double>& b,
                                      double eps);

}  // namespace crane::detail
