#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "crane/powerflow.hpp"
#include "crane/types.hpp"

namespace crane {

/// Stationarity condition on an unconstrained arc:
///   dP/dv - d/dt (dP/dvdot) + lambda = 0.
/// For a quadratic surrogate this is a linear second-order ODE with a
/// closed-form solution; for a general power model it is integrated
/// numerically.

struct ElClosedForm {
  enum class Branch { Hyperbolic, Trigonometric, Parabolic };
  Branch branch = Branch::Parabolic;
  double v_star = 0.0;  // stationary level -(c10 + lambda)/(2 c20), branches with c20 != 0
  double coef_a = 0.0;  // multiplies cosh/cos
  double coef_b = 0.0;  // multiplies sinh/sin
  double kappa = 0.0;   // sqrt(|c20|/c02)
  double q = 0.0;       // parabolic branch: v = v0 + a0 t + q t^2
  double v0 = 0.0, a0 = 0.0;
};

/// Dense numerical solution: accepted integrator nodes of the augmented
/// state (s, v, a) plus node derivatives for cubic Hermite interpolation.
struct ElDense {
  std::vector<double> t;
  std::vector<double> s, v, a;
  std::vector<double> jerk;  // da/dt at nodes (the ODE right-hand side)
};

struct ElSegmentSolution {
  double lambda = 0.0;
  double duration = 0.0;
  double residual = 0.0;  // verified stationarity residual, scaled
  bool closed_form = false;
  ElClosedForm cf;
  std::shared_ptr<const ElDense> dense;

  double v(double tau) const;
  double a(double tau) const;
  double jerk(double tau) const;
  double s(double tau) const;          // integral of v over [0, tau]
  double integral_v() const;           // s(duration)
  double v_end() const { return v(duration); }
  double a_end() const { return a(duration); }
};

/// Closed-form arc for a quadratic surrogate. Throws SingularElError for
/// c02 <= 0.
ElSegmentSolution el_closed_form(const QuadraticSurrogate& surrogate, double lambda,
                                 double v0, double a0, double duration);

struct ElNumericOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-11;
  double v_char = 1.0;    // velocity scale for finite-difference steps (use v_max)
  double a_char = 1.0;    // acceleration scale (use a_max)
  double v_guard = 0.0;   // divergence guard, 0 means 10 * v_char
  int fixed_steps = 0;    // > 0: fixed-step RK4 with this many steps, no error control
  int min_nodes = 50;     // cap on max step: duration / min_nodes
  bool verify_residual = true;
};

/// Adaptive (or fixed-step) integration of the expanded stationarity ODE
///   vddot = (dP/dv - d2P/dvdot dv * vdot + lambda) / (d2P/dvdot^2)
/// with partial derivatives of P by central differences.
/// Throws SingularElError when d2P/dvdot^2 falls below its floor and
/// ElDivergenceError when |v| exceeds the guard.
ElSegmentSolution el_numeric(const PowerModel& model, double lambda, double v0, double a0,
                             double duration, const ElNumericOptions& opts = {});

/// Stationarity residual of a solution arc, checked independently: the time
/// derivative of dP/dvdot is formed by differencing along the arc rather
/// than from the ODE right-hand side. Returns max over `n_points` interior
/// points, scaled by max(1, |lambda|).
template <class PowerFn>
double el_residual(const PowerFn& P, const ElSegmentSolution& sol, int n_points, double v_char,
                   double a_char) {
  if (!(sol.duration > 0.0)) return 0.0;
  const double hv = 1e-6 * std::max(v_char, 1e-9);
  const double ha = 1e-6 * std::max(a_char, 1e-9);
  const double dt = sol.duration * 1e-4;
  const auto P_v = [&](double v, double a) { return (P(v + hv, a) - P(v - hv, a)) / (2.0 * hv); };
  const auto P_a = [&](double v, double a) { return (P(v, a + ha) - P(v, a - ha)) / (2.0 * ha); };
  double worst = 0.0;
  for (int i = 1; i <= n_points; ++i) {
    const double t = sol.duration * i / (n_points + 1.0);
    const double dPa_dt =
        (P_a(sol.v(t + dt), sol.a(t + dt)) - P_a(sol.v(t - dt), sol.a(t - dt))) / (2.0 * dt);
    const double r = P_v(sol.v(t), sol.a(t)) - dPa_dt + sol.lambda;
    worst = std::max(worst, std::abs(r));
  }
  return worst / std::max(1.0, std::abs(sol.lambda));
}

}  // namespace crane
