#include "crane/energymap.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace crane {

InstanceSetup make_instance(const TravelSpec& travel, Objective objective,
                            const KinematicLimits& limits_x, const KinematicLimits& limits_y,
                            const PowerModel& base_model_x, const PowerModel& base_model_y) {
  travel.validate();
  InstanceSetup setup;
  setup.hor = horizon(travel, limits_x, limits_y);
  setup.optimized_axis = setup.hor.slow_axis == Axis::X ? Axis::Y : Axis::X;

  const int y_gravity_sign = travel.vertical_direction == VerticalDirection::Up ? +1 : -1;
  const int x_dir_sign = travel.horizontal_direction == HorizontalDirection::Right ? +1 : -1;

  const bool slow_is_x = setup.hor.slow_axis == Axis::X;
  const double slow_distance = slow_is_x ? travel.s_x : travel.s_y;
  const KinematicLimits& slow_limits = slow_is_x ? limits_x : limits_y;
  setup.slow_model = configure_for_travel(slow_is_x ? base_model_x : base_model_y,
                                          travel.load_mass, slow_is_x ? 0 : y_gravity_sign);
  setup.slow_trajectory = slow_distance < kIdleDistance
                              ? Trajectory::idle(setup.hor.T)
                              : time_minimal_profile(slow_distance, slow_limits);

  setup.fast_model = configure_for_travel(slow_is_x ? base_model_y : base_model_x,
                                          travel.load_mass, slow_is_x ? y_gravity_sign : 0);

  ProblemSpec& prob = setup.problem;
  prob.objective = objective;
  prob.s0 = slow_is_x ? travel.s_y : travel.s_x;
  prob.T = setup.hor.T;
  prob.limits = slow_is_x ? limits_y : limits_x;
  prob.model = setup.fast_model;
  prob.direction_sign = slow_is_x ? y_gravity_sign : x_dir_sign;
  prob.p_slow = setup.slow_trajectory.empty()
                    ? SlowPowerProfile::constant(setup.slow_model.standby_loss, setup.hor.T)
                    : SlowPowerProfile::from_trajectory(setup.slow_trajectory, setup.slow_model);
  return setup;
}

double min_constant_velocity(double s0, double T, const KinematicLimits& limits) {
  limits.validate();
  if (s0 < kIdleDistance || !(T > 0.0)) return 0.0;

  const auto ramp_time = [&](double vc) {
    return vc * limits.j_max >= limits.a_max * limits.a_max
               ? vc / limits.a_max + limits.a_max / limits.j_max
               : 2.0 * std::sqrt(vc / limits.j_max);
  };
  // Distance of ramp-cruise-ramp at level vc filling the whole horizon.
  const auto coverage = [&](double vc) { return vc * (T - ramp_time(vc)); };

  const double v_hi = limits.v_max;
  if (2.0 * ramp_time(v_hi) > T || coverage(v_hi) < s0) return 0.0;

  double lo = 0.0, hi = v_hi;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * v_hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (2.0 * ramp_time(mid) > T || coverage(mid) < s0)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

std::string classify(const SolveResult& result, const ProblemSpec& spec,
                     const ClassifyOptions& opts) {
  if (!result.converged) return "unknown";
  const Trajectory& traj = result.trajectory;
  const double T = traj.duration();
  const double v_max = spec.limits.v_max;
  if (T <= 0.0) return "time_minimal_both";

  const double v_still = 1e-3 * v_max;

  // Standstill intervals from the segment structure.
  struct Still {
    double t0, t1;
  };
  std::vector<Still> stills;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    const Segment& seg = traj.segment(k);
    double v_peak = 0.0;
    for (int s = 0; s <= 16; ++s)
      v_peak = std::max(v_peak, std::abs(seg.velocity(seg.duration * s / 16.0)));
    if (v_peak <= v_still) {
      const double t0 = traj.grid()[k], t1 = traj.grid()[k + 1];
      if (!stills.empty() && std::abs(stills.back().t1 - t0) < 1e-12)
        stills.back().t1 = t1;
      else
        stills.push_back({t0, t1});
    }
  }
  double dwell_total = 0.0;
  int interior_dwells = 0;
  for (const Still& st : stills) {
    const double len = st.t1 - st.t0;
    dwell_total += len;
    const bool interior = st.t0 > 1e-9 && st.t1 < T - 1e-9;
    if (interior && len >= opts.dwell_min) ++interior_dwells;
  }
  if (interior_dwells >= 1)
    return "multi_start(" + std::to_string(interior_dwells + 1) + ")";

  // Compare against the drive's own time-minimal movement plus rest.
  {
    Trajectory base = spec.s0 < kIdleDistance
                          ? Trajectory::idle(T)
                          : time_minimal_profile(spec.s0, spec.limits);
    const double t_move = base.duration();
    if (t_move <= T + 1e-9) {
      double worst = 0.0;
      for (int s = 0; s <= opts.samples; ++s) {
        const double t = T * s / opts.samples;
        const double vb = t <= t_move ? base.eval(t).v : 0.0;
        worst = std::max(worst, std::abs(traj.eval(t).v - vb));
      }
      if (worst <= opts.tm_band * v_max) return "time_minimal_both";
    }
  }

  const double v_c = min_constant_velocity(spec.s0, T, spec.limits);
  if (v_c > 0.0) {
    double held = 0.0;
    const double dt = T / opts.samples;
    for (int s = 0; s < opts.samples; ++s) {
      const double v = traj.eval((s + 0.5) * dt).v;
      if (std::abs(v - v_c) <= opts.const_v_band * v_c) held += dt;
    }
    if (held >= opts.const_v_frac * T) return "const_min_velocity";
  }

  if (dwell_total >= opts.dwell_max_frac * T) return "dwell_max";

  for (const Segment& seg : traj.segments())
    if (seg.kind == SegmentKind::EL) return "CD_EL_CD";
  return "all_CD";
}

std::vector<std::pair<double, double>> dominance_boundary(const KinematicLimits& limits_x,
                                                          const KinematicLimits& limits_y,
                                                          const std::vector<double>& s_y_values) {
  limits_x.validate();
  limits_y.validate();
  std::vector<std::pair<double, double>> curve;
  curve.reserve(s_y_values.size());
  for (double s_y : s_y_values) {
    if (s_y < kIdleDistance) {
      curve.emplace_back(s_y, 0.0);
      continue;
    }
    const double T_y = time_minimal_duration(s_y, limits_y);
    double lo = kIdleDistance;
    double hi = std::max(1.0, limits_x.v_max * T_y);
    while (time_minimal_duration(hi, limits_x) < T_y) hi *= 2.0;
    while (hi - lo > 1e-6) {
      const double mid = 0.5 * (lo + hi);
      (time_minimal_duration(mid, limits_x) < T_y ? lo : hi) = mid;
    }
    curve.emplace_back(s_y, 0.5 * (lo + hi));
  }
  return curve;
}

std::vector<double> SweepSpec::sx_values() const {
  std::vector<double> v;
  for (double x = sx_lo; x <= sx_hi + 1e-9; x += sx_step) v.push_back(x);
  return v;
}

std::vector<double> SweepSpec::sy_values() const {
  std::vector<double> v;
  for (double y = sy_lo; y <= sy_hi + 1e-9; y += sy_step) v.push_back(y);
  return v;
}

namespace {

std::string cell_key(double sx, double sy) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g_%.9g", sx, sy);
  return buf;
}

MapCell solve_cell(const SweepSpec& spec, const SolverOptions& solver_opts, double sx, double sy) {
  MapCell cell;
  cell.s_x = sx;
  cell.s_y = sy;
  try {
    TravelSpec travel;
    travel.s_x = sx;
    travel.s_y = sy;
    travel.vertical_direction = spec.direction;
    travel.load_mass = spec.load_mass;

    InstanceSetup setup = make_instance(travel, spec.objective, spec.limits_x, spec.limits_y,
                                        spec.model_x, spec.model_y);
    cell.dominant_axis = setup.hor.slow_axis;
    cell.T = setup.hor.T;

    SolveResult opt = optimize(setup.problem, solver_opts);
    SolveResult base = baseline(setup.problem, solver_opts);

    cell.e_opt = opt.objective_value;
    cell.e_base = base.objective_value;
    cell.e_con = opt.report.e_con;
    cell.e_rec = opt.report.e_rec;
    cell.n_segments = opt.n_intervals;
    cell.converged = opt.converged;
    cell.classification = classify(opt, setup.problem);
    const double denom = std::abs(cell.e_base);
    cell.saving_rate = denom > 0.0 ? (cell.e_base - cell.e_opt) / denom : 0.0;
  } catch (const std::exception& ex) {
    cell.converged = false;
    cell.classification = "unknown";
    cell.error = ex.what();
  }
  return cell;
}

}  // namespace

SweepResult sweep(const SweepSpec& spec, const SolverOptions& solver_opts,
                  const std::vector<MapCell>* resume_cells) {
  spec.limits_x.validate();
  spec.limits_y.validate();
  spec.model_x.validate();
  spec.model_y.validate();

  const std::vector<double> xs = spec.sx_values();
  const std::vector<double> ys = spec.sy_values();

  std::map<std::string, const MapCell*> done;
  if (resume_cells != nullptr)
    for (const MapCell& cell : *resume_cells) done.emplace(cell_key(cell.s_x, cell.s_y), &cell);

  struct Task {
    double sx, sy;
    bool reuse;
    const MapCell* previous;
  };
  std::vector<Task> tasks;
  tasks.reserve(xs.size() * ys.size());
  for (double sx : xs) {
    for (double sy : ys) {
      const auto it = done.find(cell_key(sx, sy));
      tasks.push_back({sx, sy, it != done.end(), it != done.end() ? it->second : nullptr});
    }
  }

  std::vector<MapCell> cells(tasks.size());
  std::atomic<std::size_t> next{0};
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_workers =
      spec.workers > 0 ? static_cast<unsigned>(spec.workers) : std::min<unsigned>(hw, 16);

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& task = tasks[i];
      cells[i] = task.reuse ? *task.previous : solve_cell(spec, solver_opts, task.sx, task.sy);
    }
  };
  if (n_workers <= 1 || tasks.size() <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  SweepResult result;
  result.cells = std::move(cells);
  std::stable_sort(result.cells.begin(), result.cells.end(),
                   [](const MapCell& a, const MapCell& b) {
                     if (a.s_x != b.s_x) return a.s_x < b.s_x;
                     return a.s_y < b.s_y;
                   });

  double sum_rec = 0.0, sum_rate = 0.0;
  for (const MapCell& cell : result.cells) {
    if (!cell.converged) {
      ++result.n_failed;
      continue;
    }
    ++result.n_converged;
    sum_rec += cell.e_rec;
    sum_rate += cell.saving_rate;
    ++result.classification_counts[cell.classification];
  }
  if (result.n_converged > 0) {
    result.mean_e_rec = sum_rec / result.n_converged;
    result.mean_saving_rate = sum_rate / result.n_converged;
  }

  result.dominance_curve = dominance_boundary(spec.limits_x, spec.limits_y, ys);

  // E_con sign change along each column, linearly interpolated.
  for (double sx : xs) {
    const MapCell* prev = nullptr;
    for (const MapCell& cell : result.cells) {
      if (cell.s_x != sx || !cell.converged) continue;
      if (prev != nullptr && prev->e_con != 0.0 && cell.e_con != 0.0 &&
          (prev->e_con > 0.0) != (cell.e_con > 0.0)) {
        const double frac = prev->e_con / (prev->e_con - cell.e_con);
        result.econ_sign_curve.emplace_back(sx, prev->s_y + frac * (cell.s_y - prev->s_y));
      }
      prev = &cell;
    }
  }
  return result;
}

}  // namespace crane
