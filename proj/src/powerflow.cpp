#include "crane/powerflow.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "crane/detail/numerics.hpp"

namespace crane {

bool PowerModel::valid() const {
  const bool eff_ok = drivetrain_efficiency_motor > 0.0 && drivetrain_efficiency_motor <= 1.0 &&
                      drivetrain_efficiency_regen > 0.0 && drivetrain_efficiency_regen <= 1.0;
  return eff_ok && effective_mass >= 0.0 && standby_loss >= 0.0 && copper_loss_coeff >= 0.0 &&
         friction_coulomb >= 0.0 && friction_viscous >= 0.0 && std::isfinite(gravity_term);
}

void PowerModel::validate() const {
  if (!valid()) throw std::domain_error("power model parameters out of range");
}

double PowerModel::tractive_force(double v, double a) const {
  return effective_mass * a + gravity_term + friction_coulomb * std::tanh(v / kSgnSmoothingVel) +
         friction_viscous * v;
}

double PowerModel::power(double v, double a) const {
  const double force = tractive_force(v, a);
  const double p_mech = force * v;
  const double losses = copper_loss_coeff * force * force + standby_loss;
  if (p_mech >= 0.0) return p_mech / drivetrain_efficiency_motor + losses;
  return p_mech * drivetrain_efficiency_regen + losses;
}

double power(const PowerModel& model, double v, double a) {
  model.validate();
  return model.power(v, a);
}

PowerModel configure_for_travel(PowerModel base, double load_mass, int gravity_sign) {
  base.validate();
  if (!(load_mass >= 0.0)) throw std::domain_error("load mass must be nonnegative");
  base.effective_mass += load_mass;
  if (gravity_sign == 0) {
    base.gravity_term = 0.0;
  } else {
    base.gravity_term = (gravity_sign > 0 ? 1.0 : -1.0) * (base.gravity_term + load_mass * kGravity);
  }
  return base;
}

PowerModel default_running_gear() {
  PowerModel m;
  m.name = "running_gear";
  m.effective_mass = 6500.0;
  m.gravity_term = 0.0;
  m.friction_coulomb = 320.0;
  m.friction_viscous = 95.0;
  m.drivetrain_efficiency_motor = 0.88;
  m.drivetrain_efficiency_regen = 0.82;
  m.standby_loss = 220.0;
  m.copper_loss_coeff = 8.635e-5;
  return m;
}

PowerModel default_lifting_gear() {
  PowerModel m;
  m.name = "lifting_gear";
  m.effective_mass = 1600.0;
  m.gravity_term = 0.0;
  m.friction_coulomb = 260.0;
  m.friction_viscous = 130.0;
  m.drivetrain_efficiency_motor = 0.86;
  m.drivetrain_efficiency_regen = 0.80;
  m.standby_loss = 180.0;
  m.copper_loss_coeff = 5.356e-6;
  return m;
}

QuadraticSurrogate fit_quadratic(const PowerModel& model, double v_lo, double v_hi, double a_lo,
                                 double a_hi) {
  model.validate();
  if (!(v_hi > v_lo) || !(a_hi > a_lo))
    throw std::domain_error("fit_quadratic: degenerate fit domain");

  constexpr int kGrid = 21;
  const int rows = kGrid * kGrid;
  Eigen::MatrixXd design(rows, 6);
  Eigen::VectorXd rhs(rows);
  int r = 0;
  for (int i = 0; i < kGrid; ++i) {
    const double v = v_lo + (v_hi - v_lo) * i / (kGrid - 1);
    for (int k = 0; k < kGrid; ++k, ++r) {
      const double a = a_lo + (a_hi - a_lo) * k / (kGrid - 1);
      design.row(r) << 1.0, v, a, v * v, a * a, v * a;
      rhs(r) = model.power(v, a);
    }
  }
  const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(rhs);

  QuadraticSurrogate fit;
  fit.c00 = coef(0);
  fit.c10 = coef(1);
  fit.c01 = coef(2);
  fit.c20 = coef(3);
  fit.c02 = coef(4);
  fit.c11 = coef(5);
  fit.v_lo = v_lo;
  fit.v_hi = v_hi;
  fit.a_lo = a_lo;
  fit.a_hi = a_hi;

  const double p_range = std::max(rhs.maxCoeff() - rhs.minCoeff(), 1.0);
  const double a_range = a_hi - a_lo;
  const double c02_floor = 1e-6 * p_range / (a_range * a_range);
  if (fit.c02 <= c02_floor) {
    fit.c02 = c02_floor;
    fit.c02_clamped = true;
  }

  double ss = 0.0;
  r = 0;
  for (int i = 0; i < kGrid; ++i) {
    const double v = v_lo + (v_hi - v_lo) * i / (kGrid - 1);
    for (int k = 0; k < kGrid; ++k, ++r) {
      const double a = a_lo + (a_hi - a_lo) * k / (kGrid - 1);
      const double err = fit.eval(v, a) - rhs(r);
      ss += err * err;
    }
  }
  fit.rms_residual = std::sqrt(ss / rows);
  return fit;
}

// Samples are stored per piece with knot samples duplicated, so the
// interpolant can carry different slopes on either side of a joint.
void SlowPowerProfile::finalize() {
  const std::size_t n_pieces = knots_.size() - 1;
  const std::size_t per_piece = t_.size() / n_pieces;
  slope_.assign(t_.size(), 0.0);
  for (std::size_t p = 0; p < n_pieces; ++p) {
    const std::size_t lo = p * per_piece, hi = lo + per_piece - 1;
    for (std::size_t s = lo; s <= hi; ++s) {
      if (s == lo)
        slope_[s] = (p_[s + 1] - p_[s]) / (t_[s + 1] - t_[s]);
      else if (s == hi)
        slope_[s] = (p_[s] - p_[s - 1]) / (t_[s] - t_[s - 1]);
      else
        slope_[s] = (p_[s + 1] - p_[s - 1]) / (t_[s + 1] - t_[s - 1]);
    }
  }
  samples_per_piece_ = per_piece;
}

SlowPowerProfile SlowPowerProfile::from_trajectory(const Trajectory& traj, const PowerModel& model,
                                                   int samples_per_segment) {
  model.validate();
  SlowPowerProfile prof;
  const double T = traj.duration();
  if (T <= 0.0 || traj.empty()) return prof;

  prof.knots_ = traj.grid();
  const int per = std::max(samples_per_segment, 50);
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const double t0 = prof.knots_[k], t1 = prof.knots_[k + 1];
    for (int i = 0; i <= per; ++i) {
      const double t = t0 + (t1 - t0) * i / per;
      const State st = traj.eval(t);
      prof.t_.push_back(t);
      prof.p_.push_back(model.power(st.v, st.a));
    }
  }
  prof.finalize();
  return prof;
}

SlowPowerProfile SlowPowerProfile::constant(double value, double T) {
  SlowPowerProfile prof;
  if (T <= 0.0) return prof;
  prof.knots_ = {0.0, T};
  prof.t_ = {0.0, 0.5 * T, T};
  prof.p_ = {value, value, value};
  prof.finalize();
  return prof;
}

SlowPowerProfile SlowPowerProfile::from_function(const std::vector<double>& knots,
                                                 double (*fn)(double, const void*), const void* ctx,
                                                 int samples_per_piece) {
  SlowPowerProfile prof;
  if (knots.size() < 2) return prof;
  prof.knots_ = knots;
  const int per = std::max(samples_per_piece, 4);
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    for (int i = 0; i <= per; ++i) {
      const double t = knots[k] + (knots[k + 1] - knots[k]) * i / per;
      prof.t_.push_back(t);
      prof.p_.push_back(fn(t, ctx));
    }
  }
  prof.finalize();
  return prof;
}

double SlowPowerProfile::eval(double t) const {
  if (t_.empty()) return 0.0;
  t = std::clamp(t, knots_.front(), knots_.back());

  // Piece, then sample interval within it.
  const auto kit = std::upper_bound(knots_.begin(), knots_.end(), t);
  std::size_t piece = static_cast<std::size_t>(std::distance(knots_.begin(), kit));
  piece = std::min(piece > 0 ? piece - 1 : 0, knots_.size() - 2);
  const std::size_t lo = piece * samples_per_piece_;
  const std::size_t hi = lo + samples_per_piece_ - 1;

  const auto it = std::upper_bound(t_.begin() + lo, t_.begin() + hi + 1, t);
  std::size_t i = static_cast<std::size_t>(std::distance(t_.begin(), it));
  i = std::min(std::max(i, lo + 1), hi);
  const std::size_t k = i - 1;
  if (t_[i] - t_[k] <= 0.0) return p_[k];
  return detail::hermite(t, t_[k], t_[i], p_[k], p_[i], slope_[k], slope_[i]);
}

}  // namespace crane
