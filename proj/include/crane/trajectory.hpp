#pragma once

#include <memory>
#include <string>
#include <vector>

#include "crane/types.hpp"

namespace crane {

struct PowerModel;
class SlowPowerProfile;
struct ElSegmentSolution;

enum class SegmentKind { CD_v, CD_a, CD_j, EL };

const char* to_string(SegmentKind kind);

/// One interval of a piecewise velocity profile. The internal convention is
/// one-sided: v(t) is a nonnegative magnitude, the physical sign lives in
/// Trajectory::direction_sign().
struct Segment {
  SegmentKind kind = SegmentKind::CD_v;
  double duration = 0.0;  // [s] > 0
  double v0 = 0.0;        // velocity at segment start [m/s]
  double a0 = 0.0;        // acceleration at segment start [m/s^2]

  // kind-specific parameters
  double accel = 0.0;   // CD_a: constant dv/dt, = +/- a_max
  double jerk = 0.0;    // CD_j: constant d2v/dt2, = +/- j_max
  double lambda = 0.0;  // EL: multiplier of the distance constraint
  std::shared_ptr<const ElSegmentSolution> el;

  double velocity(double tau) const;
  double acceleration(double tau) const;
  double jerk_at(double tau) const;
  double distance(double tau) const;  // integral of v over [0, tau]
  double velocity_end() const { return velocity(duration); }
  double accel_end() const { return acceleration(duration); }
};

struct State {
  double pos;  // [m]
  double v;    // [m/s]
  double a;    // [m/s^2]
  double j;    // [m/s^3]
};

/// Piecewise-C2 velocity profile on a non-equidistant grid with rest
/// boundary conditions. Immutable after construction.
class Trajectory {
 public:
  Trajectory() = default;

  /// Builds a trajectory from forward-propagated segments. Throws
  /// std::domain_error on structural violations (non-positive durations,
  /// CD_v with a0 != 0).
  static Trajectory from_segments(std::vector<Segment> segments, int direction_sign = 1);

  /// Zero-motion trajectory: one dwell over [0, T], or an empty profile for T <= 0.
  static Trajectory idle(double T);

  double duration() const { return grid_.empty() ? 0.0 : grid_.back(); }
  std::size_t size() const { return segments_.size(); }
  bool empty() const { return segments_.empty(); }
  const Segment& segment(std::size_t i) const { return segments_.at(i); }
  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<double>& grid() const { return grid_; }
  int direction_sign() const { return direction_sign_; }

  State eval(double t) const;  // throws std::domain_error outside [0, duration()]
  double distance() const;     // integral of v over [0, T]

  /// Largest |v| / |a| jump at interior grid points. Zero for trajectories
  /// built by forward propagation; meaningful for deserialized ones.
  double max_velocity_defect() const;
  double max_accel_defect() const;

  /// Index of the segment containing t (last segment at t == T).
  std::size_t segment_index(double t) const;

 private:
  std::vector<Segment> segments_;
  std::vector<double> grid_;   // cumulative times, size() + 1 entries
  std::vector<double> s_cum_;  // cumulative distance at grid points
  int direction_sign_ = 1;
};

struct EnergyReport {
  double e_rec = 0.0;  // [J] integral of |P_slow + P|
  double e_con = 0.0;  // [J] integral of (P_slow + P)
  double T = 0.0;      // [s]
  int n_segments = 0;
  std::string classification = "unclassified";
};

/// Exact energy integrals along a trajectory against a fixed partner-drive
/// power profile. Zero crossings of the integrand are bracketed and refined
/// before integration so the absolute value is handled exactly.
EnergyReport energies(const Trajectory& traj, const PowerModel& model,
                      const SlowPowerProfile& p_slow);

}  // namespace crane
