#include "crane/el_solver.hpp"

#include <boost/numeric/odeint/stepper/runge_kutta4.hpp>
#include <boost/numeric/odeint/stepper/runge_kutta_cash_karp54.hpp>
#include <algorithm>
#include <array>
#include <cmath>

#include "crane/detail/numerics.hpp"

namespace crane {

namespace {

using State3 = std::array<double, 3>;  // (s, v, vdot)

double cf_v(const ElClosedForm& cf, double t) {
  switch (cf.branch) {
    case ElClosedForm::Branch::Hyperbolic:
      return cf.v_star + cf.coef_a * std::cosh(cf.kappa * t) + cf.coef_b * std::sinh(cf.kappa * t);
    case ElClosedForm::Branch::Trigonometric:
      return cf.v_star + cf.coef_a * std::cos(cf.kappa * t) + cf.coef_b * std::sin(cf.kappa * t);
    case ElClosedForm::Branch::Parabolic:
      return cf.v0 + cf.a0 * t + cf.q * t * t;
  }
  return 0.0;
}

double cf_a(const ElClosedForm& cf, double t) {
  switch (cf.branch) {
    case ElClosedForm::Branch::Hyperbolic:
      return cf.kappa * (cf.coef_a * std::sinh(cf.kappa * t) + cf.coef_b * std::cosh(cf.kappa * t));
    case ElClosedForm::Branch::Trigonometric:
      return cf.kappa * (-cf.coef_a * std::sin(cf.kappa * t) + cf.coef_b * std::cos(cf.kappa * t));
    case ElClosedForm::Branch::Parabolic:
      return cf.a0 + 2.0 * cf.q * t;
  }
  return 0.0;
}

double cf_jerk(const ElClosedForm& cf, double t) {
  const double k2 = cf.kappa * cf.kappa;
  switch (cf.branch) {
    case ElClosedForm::Branch::Hyperbolic:
      return k2 * (cf_v(cf, t) - cf.v_star);
    case ElClosedForm::Branch::Trigonometric:
      return -k2 * (cf_v(cf, t) - cf.v_star);
    case ElClosedForm::Branch::Parabolic:
      return 2.0 * cf.q;
  }
  return 0.0;
}

double cf_s(const ElClosedForm& cf, double t) {
  switch (cf.branch) {
    case ElClosedForm::Branch::Hyperbolic:
      return cf.v_star * t + (cf.coef_a * std::sinh(cf.kappa * t) +
                              cf.coef_b * (std::cosh(cf.kappa * t) - 1.0)) /
                                 cf.kappa;
    case ElClosedForm::Branch::Trigonometric:
      return cf.v_star * t + (cf.coef_a * std::sin(cf.kappa * t) +
                              cf.coef_b * (1.0 - std::cos(cf.kappa * t))) /
                                 cf.kappa;
    case ElClosedForm::Branch::Parabolic:
      return cf.v0 * t + 0.5 * cf.a0 * t * t + cf.q * t * t * t / 3.0;
  }
  return 0.0;
}

}  // namespace

double ElSegmentSolution::v(double tau) const {
  tau = std::clamp(tau, 0.0, duration);
  if (closed_form) return cf_v(cf, tau);
  const ElDense& d = *dense;
  if (d.t.size() < 2) return d.v.empty() ? 0.0 : d.v.front();
  const auto it = std::upper_bound(d.t.begin(), d.t.end(), tau);
  std::size_t i = static_cast<std::size_t>(std::distance(d.t.begin(), it));
  i = std::min(std::max<std::size_t>(i, 1), d.t.size() - 1);
  return detail::hermite(tau, d.t[i - 1], d.t[i], d.v[i - 1], d.v[i], d.a[i - 1], d.a[i]);
}

double ElSegmentSolution::a(double tau) const {
  tau = std::clamp(tau, 0.0, duration);
  if (closed_form) return cf_a(cf, tau);
  const ElDense& d = *dense;
  if (d.t.size() < 2) return d.a.empty() ? 0.0 : d.a.front();
  const auto it = std::upper_bound(d.t.begin(), d.t.end(), tau);
  std::size_t i = static_cast<std::size_t>(std::distance(d.t.begin(), it));
  i = std::min(std::max<std::size_t>(i, 1), d.t.size() - 1);
  return detail::hermite(tau, d.t[i - 1], d.t[i], d.a[i - 1], d.a[i], d.jerk[i - 1], d.jerk[i]);
}

double ElSegmentSolution::jerk(double tau) const {
  tau = std::clamp(tau, 0.0, duration);
  if (closed_form) return cf_jerk(cf, tau);
  const ElDense& d = *dense;
  if (d.t.size() < 2) return d.jerk.empty() ? 0.0 : d.jerk.front();
  const auto it = std::upper_bound(d.t.begin(), d.t.end(), tau);
  std::size_t i = static_cast<std::size_t>(std::distance(d.t.begin(), it));
  i = std::min(std::max<std::size_t>(i, 1), d.t.size() - 1);
  // Linear in the jerk between nodes; adequate for plotting and checks.
  const double u = (tau - d.t[i - 1]) / (d.t[i] - d.t[i - 1]);
  return (1.0 - u) * d.jerk[i - 1] + u * d.jerk[i];
}

double ElSegmentSolution::s(double tau) const {
  tau = std::clamp(tau, 0.0, duration);
  if (closed_form) return cf_s(cf, tau);
  const ElDense& d = *dense;
  if (d.t.size() < 2) return 0.0;
  const auto it = std::upper_bound(d.t.begin(), d.t.end(), tau);
  std::size_t i = static_cast<std::size_t>(std::distance(d.t.begin(), it));
  i = std::min(std::max<std::size_t>(i, 1), d.t.size() - 1);
  return detail::hermite(tau, d.t[i - 1], d.t[i], d.s[i - 1], d.s[i], d.v[i - 1], d.v[i]);
}

double ElSegmentSolution::integral_v() const {
  if (closed_form) return cf_s(cf, duration);
  return dense && !dense->s.empty() ? dense->s.back() : 0.0;
}

ElSegmentSolution el_closed_form(const QuadraticSurrogate& surrogate, double lambda, double v0,
                                 double a0, double duration) {
  if (!(surrogate.c02 > 0.0))
    throw SingularElError("el_closed_form: surrogate not convex in the acceleration");
  if (duration < 0.0) throw std::domain_error("el_closed_form: negative duration");

  ElSegmentSolution sol;
  sol.lambda = lambda;
  sol.duration = duration;
  sol.closed_form = true;

  ElClosedForm& cf = sol.cf;
  cf.v0 = v0;
  cf.a0 = a0;
  const double c20 = surrogate.c20, c02 = surrogate.c02, c10 = surrogate.c10;

  // Near c20 = 0 the hyperbolic/trigonometric forms cancel catastrophically;
  // the explicit parabola is exact there.
  const double curvature_scale = std::abs(c20) * duration * duration / c02;
  if (curvature_scale < 1e-12) {
    cf.branch = ElClosedForm::Branch::Parabolic;
    cf.q = (c10 + lambda) / (4.0 * c02);
  } else if (c20 > 0.0) {
    cf.branch = ElClosedForm::Branch::Hyperbolic;
    cf.kappa = std::sqrt(c20 / c02);
    cf.v_star = -(c10 + lambda) / (2.0 * c20);
    cf.coef_a = v0 - cf.v_star;
    cf.coef_b = a0 / cf.kappa;
  } else {
    cf.branch = ElClosedForm::Branch::Trigonometric;
    cf.kappa = std::sqrt(-c20 / c02);
    cf.v_star = -(c10 + lambda) / (2.0 * c20);
    cf.coef_a = v0 - cf.v_star;
    cf.coef_b = a0 / cf.kappa;
  }

  if (duration > 0.0) {
    const auto P = [&surrogate](double v, double a) { return surrogate.eval(v, a); };
    sol.residual = el_residual(P, sol, 32, std::max(1.0, std::abs(v0)), 1.0);
  }
  return sol;
}

namespace {

struct ElRhs {
  const PowerModel* model;
  double lambda;
  double h_v, h_a;
  double pww_floor;

  double vddot(double v, double w) const {
    const PowerModel& m = *model;
    const double p_vp = m.power(v + h_v, w), p_vm = m.power(v - h_v, w);
    const double p_ap = m.power(v, w + h_a), p_am = m.power(v, w - h_a);
    const double p_0 = m.power(v, w);
    const double P_v = (p_vp - p_vm) / (2.0 * h_v);
    const double P_ww = (p_ap - 2.0 * p_0 + p_am) / (h_a * h_a);
    const double P_wv = (m.power(v + h_v, w + h_a) - m.power(v + h_v, w - h_a) -
                         m.power(v - h_v, w + h_a) + m.power(v - h_v, w - h_a)) /
                        (4.0 * h_v * h_a);
    if (std::abs(P_ww) < pww_floor)
      throw SingularElError("el_numeric: d2P/dvdot2 vanishes along the arc");
    return (P_v - P_wv * w + lambda) / P_ww;
  }

  void operator()(const State3& y, State3& dydt, double /*t*/) const {
    dydt[0] = y[1];
    dydt[1] = y[2];
    dydt[2] = vddot(y[1], y[2]);
  }
};

}  // namespace

ElSegmentSolution el_numeric(const PowerModel& model, double lambda, double v0, double a0,
                             double duration, const ElNumericOptions& opts) {
  model.validate();
  if (duration < 0.0) throw std::domain_error("el_numeric: negative duration");

  ElSegmentSolution sol;
  sol.lambda = lambda;
  sol.duration = duration;
  sol.closed_form = false;

  auto dense = std::make_shared<ElDense>();
  sol.dense = dense;

  const double v_char = std::max(opts.v_char, 1e-9);
  const double a_char = std::max(opts.a_char, 1e-9);
  const double v_guard = opts.v_guard > 0.0 ? opts.v_guard : 10.0 * v_char;
  const double p_char =
      std::max({1.0, std::abs(model.power(v_char, a_char)), std::abs(model.power(v_char, -a_char))});

  ElRhs rhs;
  rhs.model = &model;
  rhs.lambda = lambda;
  rhs.h_v = 1e-6 * v_char;
  rhs.h_a = 1e-6 * a_char;
  rhs.pww_floor = 1e-9 * p_char / (a_char * a_char);

  State3 y{0.0, v0, a0};
  auto push_node = [&](double t, const State3& st) {
    dense->t.push_back(t);
    dense->s.push_back(st[0]);
    dense->v.push_back(st[1]);
    dense->a.push_back(st[2]);
    dense->jerk.push_back(rhs.vddot(st[1], st[2]));
  };

  if (duration == 0.0) {
    push_node(0.0, y);
    return sol;
  }

  auto check_guard = [&](const State3& st) {
    if (!std::isfinite(st[1]) || std::abs(st[1]) > v_guard)
      throw ElDivergenceError("el_numeric: arc diverges beyond the velocity guard");
  };

  if (opts.fixed_steps > 0) {
    boost::numeric::odeint::runge_kutta4<State3> stepper;
    const int n = opts.fixed_steps;
    const double h = duration / n;
    push_node(0.0, y);
    for (int i = 0; i < n; ++i) {
      stepper.do_step(rhs, y, i * h, h);
      check_guard(y);
      push_node((i + 1) * h, y);
    }
  } else {
    boost::numeric::odeint::runge_kutta_cash_karp54<State3> stepper;
    const double h_max = duration / std::max(opts.min_nodes, 2);
    double t = 0.0;
    double h = std::min(h_max, duration / 16.0);
    push_node(0.0, y);
    int rejected_in_row = 0;
    while (t < duration) {
      h = std::min(h, duration - t);
      State3 y_try = y, y_err{};
      stepper.do_step(rhs, y_try, t, h, y_err);
      double ratio = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double tol = opts.abs_tol + opts.rel_tol * std::abs(y_try[c]);
        ratio = std::max(ratio, std::abs(y_err[c]) / tol);
      }
      if (ratio <= 1.0) {
        t += h;
        y = y_try;
        check_guard(y);
        push_node(t, y);
        rejected_in_row = 0;
      } else if (++rejected_in_row > 60) {
        throw ElDivergenceError("el_numeric: step control failed to converge");
      }
      const double factor =
          ratio > 0.0 ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0) : 5.0;
      h = std::min(h * factor, h_max);
      if (dense->t.size() > 2'000'000)
        throw ElDivergenceError("el_numeric: step count exploded");
    }
  }

  if (opts.verify_residual && duration > 0.0) {
    const auto P = [&model](double v, double a) { return model.power(v, a); };
    sol.residual = el_residual(P, sol, 64, v_char, a_char);
  }
  return sol;
}

}  // namespace crane
