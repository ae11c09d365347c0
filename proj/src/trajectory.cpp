#include "crane/trajectory.hpp"

#include <algorithm>
#include <cmath>

#include "crane/detail/numerics.hpp"
#include "crane/el_solver.hpp"
#include "crane/powerflow.hpp"

namespace crane {

const char* to_string(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::CD_v: return "CD_v";
    case SegmentKind::CD_a: return "CD_a";
    case SegmentKind::CD_j: return "CD_j";
    case SegmentKind::EL: return "EL";
  }
  return "?";
}

double Segment::velocity(double tau) const {
  switch (kind) {
    case SegmentKind::CD_v: return v0;
    case SegmentKind::CD_a: return v0 + accel * tau;
    case SegmentKind::CD_j: return v0 + a0 * tau + 0.5 * jerk * tau * tau;
    case SegmentKind::EL: return el->v(tau);
  }
  return 0.0;
}

double Segment::acceleration(double tau) const {
  switch (kind) {
    case SegmentKind::CD_v: return 0.0;
    case SegmentKind::CD_a: return accel;
    case SegmentKind::CD_j: return a0 + jerk * tau;
    case SegmentKind::EL: return el->a(tau);
  }
  return 0.0;
}

double Segment::jerk_at(double tau) const {
  switch (kind) {
    case SegmentKind::CD_v:
    case SegmentKind::CD_a: return 0.0;
    case SegmentKind::CD_j: return jerk;
    case SegmentKind::EL: return el->jerk(tau);
  }
  return 0.0;
}

double Segment::distance(double tau) const {
  switch (kind) {
    case SegmentKind::CD_v: return v0 * tau;
    case SegmentKind::CD_a: return v0 * tau + 0.5 * accel * tau * tau;
    case SegmentKind::CD_j:
      return v0 * tau + 0.5 * a0 * tau * tau + jerk * tau * tau * tau / 6.0;
    case SegmentKind::EL: return el->s(tau);
  }
  return 0.0;
}

Trajectory Trajectory::from_segments(std::vector<Segment> segments, int direction_sign) {
  Trajectory traj;
  traj.direction_sign_ = direction_sign >= 0 ? 1 : -1;
  traj.grid_.push_back(0.0);
  traj.s_cum_.push_back(0.0);
  for (const Segment& seg : segments) {
    if (!(seg.duration > 1e-9))
      throw std::domain_error("trajectory segment duration must exceed 1e-9 s");
    if (seg.kind == SegmentKind::CD_v && std::abs(seg.a0) > 1e-9)
      throw std::domain_error("constant-velocity segment must start with zero acceleration");
    if (seg.kind == SegmentKind::EL && !seg.el)
      throw std::domain_error("EL segment carries no solution");
    traj.grid_.push_back(traj.grid_.back() + seg.duration);
    traj.s_cum_.push_back(traj.s_cum_.back() + seg.distance(seg.duration));
  }
  traj.segments_ = std::move(segments);
  return traj;
}

Trajectory Trajectory::idle(double T) {
  if (T <= 1e-9) {
    Trajectory traj;
    traj.grid_.push_back(0.0);
    traj.s_cum_.push_back(0.0);
    return traj;
  }
  Segment dwell;
  dwell.kind = SegmentKind::CD_v;
  dwell.duration = T;
  return from_segments({dwell});
}

std::size_t Trajectory::segment_index(double t) const {
  if (segments_.empty()) throw std::domain_error("empty trajectory");
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  const std::size_t idx = static_cast<std::size_t>(std::distance(grid_.begin(), it));
  return std::min(idx > 0 ? idx - 1 : 0, segments_.size() - 1);
}

State Trajectory::eval(double t) const {
  const double T = duration();
  if (!(t >= -1e-12) || !(t <= T + 1e-12))
    throw std::domain_error("trajectory evaluated outside [0, T]");
  t = std::clamp(t, 0.0, T);
  if (segments_.empty()) return {0.0, 0.0, 0.0, 0.0};
  const std::size_t k = segment_index(t);
  const Segment& seg = segments_[k];
  const double tau = t - grid_[k];
  return {s_cum_[k] + seg.distance(tau), seg.velocity(tau), seg.acceleration(tau),
          seg.jerk_at(tau)};
}

double Trajectory::distance() const { return s_cum_.back(); }

double Trajectory::max_velocity_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < segments_.size(); ++i)
    worst = std::max(worst, std::abs(segments_[i].velocity_end() - segments_[i + 1].v0));
  return worst;
}

double Trajectory::max_accel_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < segments_.size(); ++i)
    worst = std::max(worst, std::abs(segments_[i].accel_end() - segments_[i + 1].a0));
  return worst;
}

namespace {

// Breakpoints where the energy integrand may lose smoothness: segment joints
// of both profiles and the interior nodes of dense EL arcs.
std::vector<double> energy_breakpoints(const Trajectory& traj, const SlowPowerProfile& p_slow) {
  std::vector<double> pts = traj.grid();
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Segment& seg = traj.segment(k);
    if (seg.kind == SegmentKind::EL && seg.el && seg.el->dense) {
      for (double tn : seg.el->dense->t) pts.push_back(traj.grid()[k] + tn);
    }
  }
  std::sort(pts.begin(), pts.end());
  return detail::merge_breakpoints(pts, p_slow.knots(), 1e-12);
}

}  // namespace

EnergyReport energies(const Trajectory& traj, const PowerModel& model,
                      const SlowPowerProfile& p_slow) {
  const double T = traj.duration();
  if (std::abs(T - p_slow.duration()) > 1e-9 * std::max(1.0, T))
    throw std::domain_error("energies: trajectory and slow profile horizons differ");

  EnergyReport report;
  report.T = T;
  report.n_segments = static_cast<int>(traj.size());
  if (T <= 0.0) return report;

  const auto integrand = [&](double t) {
    const State st = traj.eval(t);
    return p_slow.eval(t) + model.power(st.v, st.a);
  };

  const std::vector<double> pts = energy_breakpoints(traj, p_slow);
  double e_con = 0.0, e_rec = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double lo = pts[i], hi = pts[i + 1];
    if (hi - lo < 1e-12) continue;

    // Locate sign changes of the integrand, then integrate piecewise so the
    // absolute value is exact.
    constexpr int kScan = 64;
    std::vector<double> cuts{lo};
    double t_prev = lo, f_prev = integrand(lo);
    for (int s = 1; s <= kScan; ++s) {
      const double t_cur = lo + (hi - lo) * s / kScan;
      const double f_cur = integrand(t_cur);
      if (f_prev != 0.0 && f_cur != 0.0 && (f_prev > 0.0) != (f_cur > 0.0))
        cuts.push_back(detail::bisect_root(integrand, t_prev, t_cur, f_prev, f_cur, 1e-9));
      t_prev = t_cur;
      f_prev = f_cur;
    }
    cuts.push_back(hi);
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
      if (cuts[c + 1] - cuts[c] < 1e-12) continue;
      const double part =
          detail::adaptive_simpson(integrand, cuts[c], cuts[c + 1], 1e-10, 1e-9);
      e_con += part;
      e_rec += std::abs(part);
    }
  }
  report.e_con = e_con;
  report.e_rec = e_rec;
  return report;
}

}  // namespace crane
