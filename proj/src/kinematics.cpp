#include "crane/kinematics.hpp"

#include <algorithm>
#include <cmath>

namespace crane {

SCurvePhases time_minimal_phases(double distance, const KinematicLimits& limits) {
  limits.validate();
  if (!(distance > 0.0) || !std::isfinite(distance))
    throw std::domain_error("time_minimal_phases: distance must be positive and finite");

  const double v = limits.v_max, a = limits.a_max, j = limits.j_max;
  SCurvePhases ph;
  if (v * j >= a * a) {
    // The acceleration bound can be reached before the velocity bound.
    const double d_cruise = v * (v / a + a / j);
    const double d_full_accel = 2.0 * a * a * a / (j * j);
    if (distance >= d_cruise) {
      ph.t_jerk = a / j;
      ph.t_accel = v / a - a / j;
      ph.t_cruise = (distance - d_cruise) / v;
    } else if (distance >= d_full_accel) {
      // Peak velocity from v_p^2 / a + v_p a / j = d.
      const double r = a * a / j;
      const double v_peak = 0.5 * (-r + std::sqrt(r * r + 4.0 * distance * a));
      ph.t_jerk = a / j;
      ph.t_accel = v_peak / a - a / j;
      ph.t_cruise = 0.0;
    } else {
      ph.t_jerk = std::cbrt(distance / (2.0 * j));
      ph.t_accel = 0.0;
      ph.t_cruise = 0.0;
    }
  } else {
    // v_max is hit while still ramping jerk; the acceleration bound is inactive.
    const double t_ramp = std::sqrt(v / j);
    const double d_cruise = 2.0 * v * t_ramp;
    if (distance >= d_cruise) {
      ph.t_jerk = t_ramp;
      ph.t_accel = 0.0;
      ph.t_cruise = distance / v - 2.0 * t_ramp;
    } else {
      ph.t_jerk = std::cbrt(distance / (2.0 * j));
      ph.t_accel = 0.0;
      ph.t_cruise = 0.0;
    }
  }
  ph.t_accel = std::max(ph.t_accel, 0.0);
  ph.t_cruise = std::max(ph.t_cruise, 0.0);
  return ph;
}

double time_minimal_duration(double distance, const KinematicLimits& limits) {
  return time_minimal_phases(distance, limits).total();
}

Trajectory time_minimal_profile(double distance, const KinematicLimits& limits) {
  limits.validate();
  if (!(distance > 0.0) || !std::isfinite(distance))
    throw std::domain_error("time_minimal_profile: distance must be positive and finite");
  if (distance < kIdleDistance) return Trajectory::idle(0.0);

  const SCurvePhases ph = time_minimal_phases(distance, limits);
  const double j = limits.j_max;
  const double a_peak = j * ph.t_jerk;

  struct Phase {
    SegmentKind kind;
    double duration;
    double rate;  // jerk for CD_j, slope for CD_a
  };
  const Phase phases[7] = {
      {SegmentKind::CD_j, ph.t_jerk, +j},    {SegmentKind::CD_a, ph.t_accel, +a_peak},
      {SegmentKind::CD_j, ph.t_jerk, -j},    {SegmentKind::CD_v, ph.t_cruise, 0.0},
      {SegmentKind::CD_j, ph.t_jerk, -j},    {SegmentKind::CD_a, ph.t_accel, -a_peak},
      {SegmentKind::CD_j, ph.t_jerk, +j},
  };

  std::vector<Segment> segments;
  double v = 0.0, acc = 0.0;
  for (const Phase& p : phases) {
    if (p.duration <= 0.0) continue;
    Segment seg;
    seg.kind = p.kind;
    seg.duration = p.duration;
    seg.v0 = v;
    seg.a0 = acc;
    switch (p.kind) {
      case SegmentKind::CD_j:
        seg.jerk = p.rate;
        v += acc * p.duration + 0.5 * p.rate * p.duration * p.duration;
        acc += p.rate * p.duration;
        break;
      case SegmentKind::CD_a:
        seg.a0 = seg.accel = p.rate;
        acc = p.rate;
        v += p.rate * p.duration;
        break;
      case SegmentKind::CD_v:
        seg.a0 = 0.0;
        acc = 0.0;
        break;
      case SegmentKind::EL:
        break;
    }
    // Merge with an identical-rate predecessor (the two jerk-down ramps
    // become one segment when the cruise phase vanishes).
    if (!segments.empty()) {
      Segment& prev = segments.back();
      if (prev.kind == seg.kind && prev.kind == SegmentKind::CD_j && prev.jerk == seg.jerk) {
        prev.duration += seg.duration;
        continue;
      }
    }
    segments.push_back(seg);
  }
  return Trajectory::from_segments(std::move(segments));
}

double time_minimal_distance(double T, const KinematicLimits& limits) {
  limits.validate();
  if (!(T > 0.0)) return 0.0;
  // Monotone in distance, so invert by bisection over d with an expanding
  // upper bracket.
  double lo = kIdleDistance;
  if (time_minimal_duration(lo, limits) >= T) return 0.0;
  double hi = std::max(1.0, limits.v_max * T);
  while (time_minimal_duration(hi, limits) < T) hi *= 2.0;
  for (int i = 0; i < 200 && hi - lo > 1e-13 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (time_minimal_duration(mid, limits) < T ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

Horizon horizon(const TravelSpec& spec, const KinematicLimits& limits_x,
                const KinematicLimits& limits_y) {
  spec.validate();
  limits_x.validate();
  limits_y.validate();
  Horizon h;
  h.T_x = spec.s_x < kIdleDistance ? 0.0 : time_minimal_duration(spec.s_x, limits_x);
  h.T_y = spec.s_y < kIdleDistance ? 0.0 : time_minimal_duration(spec.s_y, limits_y);
  h.T = std::max(h.T_x, h.T_y);
  h.slow_axis = (h.T_x >= h.T_y - 1e-9) ? Axis::X : Axis::Y;
  return h;
}

}  // namespace crane
