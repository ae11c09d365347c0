#pragma once

#include <string>
#include <vector>

#include "crane/trajectory.hpp"
#include "crane/types.hpp"

namespace crane {

inline constexpr double kGravity = 9.81;           // [m/s^2]
inline constexpr double kSgnSmoothingVel = 1e-3;   // [m/s] tanh width replacing sgn(v)

/// Parameterized power-flow model of one drive: electrical power drawn from
/// the intermediate circuit as a function of velocity and acceleration.
/// Negative values mean the drive feeds power back.
struct PowerModel {
  std::string name;
  double effective_mass = 0.0;                 // [kg] moving mass incl. payload
  double gravity_term = 0.0;                   // [N] signed; < 0 for down-travel
  double friction_coulomb = 0.0;               // [N]
  double friction_viscous = 0.0;               // [N s/m]
  double drivetrain_efficiency_motor = 1.0;    // (0, 1]
  double drivetrain_efficiency_regen = 1.0;    // (0, 1]
  double standby_loss = 0.0;                   // [W]
  double copper_loss_coeff = 0.0;              // [W/N^2]

  bool valid() const;
  void validate() const;

  double tractive_force(double v, double a) const;
  double power(double v, double a) const;
};

double power(const PowerModel& model, double v, double a);

/// Adapts a zero-load base model to a concrete travel. `gravity_sign` is
/// +1 for up, -1 for down, 0 for a horizontal drive.
PowerModel configure_for_travel(PowerModel base, double load_mass, int gravity_sign);

/// Shipped defaults (same values as data/running_gear.json, lifting_gear.json).
PowerModel default_running_gear();
PowerModel default_lifting_gear();

/// Least-squares quadratic fit
///   P~(v, a) = c00 + c10 v + c01 a + c20 v^2 + c02 a^2 + c11 v a
/// over a rectangle in (v, a) space.
struct QuadraticSurrogate {
  double c00 = 0, c10 = 0, c01 = 0, c20 = 0, c02 = 0, c11 = 0;
  double v_lo = 0, v_hi = 0, a_lo = 0, a_hi = 0;  // fit domain
  double rms_residual = 0.0;                      // [W]
  bool c02_clamped = false;

  double eval(double v, double a) const {
    return c00 + c10 * v + c01 * a + c20 * v * v + c02 * a * a + c11 * v * a;
  }
};

/// Fits the surrogate on a 21x21 uniform grid. c02 is clamped to a small
/// positive floor if the fit is not convex in a (flag set).
/// Throws std::domain_error on a degenerate domain.
QuadraticSurrogate fit_quadratic(const PowerModel& model, double v_lo, double v_hi,
                                 double a_lo, double a_hi);

/// Fixed power profile of the time-minimally moving drive, sampled along its
/// trajectory and interpolated piecewise-cubically between samples. Piece
/// boundaries (the trajectory grid) are kept for exact quadrature splitting.
class SlowPowerProfile {
 public:
  SlowPowerProfile() = default;

  static SlowPowerProfile from_trajectory(const Trajectory& traj, const PowerModel& model,
                                          int samples_per_segment = 64);
  static SlowPowerProfile constant(double value, double T);
  /// Builds a profile from an arbitrary function (test hook and resampling).
  static SlowPowerProfile from_function(const std::vector<double>& knots,
                                        double (*fn)(double, const void*), const void* ctx,
                                        int samples_per_piece = 64);
  template <class F>
  static SlowPowerProfile sample(const std::vector<double>& knots, F&& fn,
                                 int samples_per_piece = 64) {
    struct Ctx {
      const F* f;
    } c{&fn};
    return from_function(
        knots, [](double t, const void* p) { return (*static_cast<const Ctx*>(p)->f)(t); }, &c,
        samples_per_piece);
  }

  double eval(double t) const;  // clamped to [0, T]
  double duration() const { return knots_.empty() ? 0.0 : knots_.back(); }
  bool empty() const { return t_.empty(); }
  /// Piece boundaries: segment joints of the underlying trajectory.
  const std::vector<double>& knots() const { return knots_; }

 private:
  std::vector<double> knots_;
  std::vector<double> t_;      // per-piece sample times (knot samples duplicated)
  std::vector<double> p_;      // power samples [W]
  std::vector<double> slope_;  // dP/dt at samples, for cubic Hermite interpolation
  std::size_t samples_per_piece_ = 0;
  void finalize();
};

}  // namespace crane
