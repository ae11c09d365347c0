#pragma once

#include "crane/trajectory.hpp"
#include "crane/types.hpp"

namespace crane {

/// Phase durations of the jerk-limited minimum-time profile:
/// (t_j, t_a, t_j, t_v, t_j, t_a, t_j). Degenerate phases are zero.
struct SCurvePhases {
  double t_jerk = 0.0;
  double t_accel = 0.0;
  double t_cruise = 0.0;
  double total() const { return 4.0 * t_jerk + 2.0 * t_accel + t_cruise; }
};

SCurvePhases time_minimal_phases(double distance, const KinematicLimits& limits);

/// Duration of the fastest bound-respecting rest-to-rest motion over
/// `distance`. Throws std::domain_error for non-positive distance or
/// invalid limits.
double time_minimal_duration(double distance, const KinematicLimits& limits);

/// The fastest rest-to-rest profile itself, as at most 7 CD segments.
/// Distances below kIdleDistance yield an empty (idle) trajectory.
Trajectory time_minimal_profile(double distance, const KinematicLimits& limits);

/// Distance covered by a time-minimal movement of exactly duration T
/// (inverse of time_minimal_duration; 0 for T below the shortest motion).
double time_minimal_distance(double T, const KinematicLimits& limits);

struct Horizon {
  double T = 0.0;  // max(T_x, T_y)
  Axis slow_axis = Axis::X;
  double T_x = 0.0;
  double T_y = 0.0;
};

/// Shared time horizon of a travel: the slower drive moves time-minimally
/// and fixes T, the other one is free to be optimized.
/// Ties (|T_x - T_y| <= 1e-9 s) resolve to X.
Horizon horizon(const TravelSpec& spec, const KinematicLimits& limits_x,
                const KinematicLimits& limits_y);

}  // namespace crane
