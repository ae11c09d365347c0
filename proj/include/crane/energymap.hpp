#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "crane/optimizer.hpp"

namespace crane {

/// Everything the per-cell solve needs, wired from a travel specification:
/// the horizon, the time-minimal movement of the slower drive, and the
/// optimization instance of the other one.
struct InstanceSetup {
  Horizon hor;
  Axis optimized_axis = Axis::Y;
  ProblemSpec problem;       // instance for the optimized drive
  Trajectory slow_trajectory;
  PowerModel slow_model;     // travel-configured model of the time-minimal drive
  PowerModel fast_model;     // travel-configured model of the optimized drive
};

InstanceSetup make_instance(const TravelSpec& travel, Objective objective,
                            const KinematicLimits& limits_x, const KinematicLimits& limits_y,
                            const PowerModel& base_model_x, const PowerModel& base_model_y);

struct ClassifyOptions {
  double dwell_min = 1e-2;       // [s] minimum standstill counted as a dwell
  double tm_band = 1e-3;         // sup-norm band, relative to v_max
  double const_v_band = 0.01;    // relative band around the minimal constant velocity
  double const_v_frac = 0.5;     // fraction of T the band must be held
  double dwell_max_frac = 0.5;   // total dwell fraction for the dwell_max label
  int samples = 2048;
};

/// Trajectory family labels: time_minimal_both, all_CD, CD_EL_CD,
/// const_min_velocity, multi_start(k), dwell_max, unknown.
std::string classify(const SolveResult& result, const ProblemSpec& spec,
                     const ClassifyOptions& opts = {});

/// Slowest constant cruise velocity that still covers s0 within T when the
/// ramps to and from it are time-minimal. Returns 0 for s0 below the idle
/// threshold.
double min_constant_velocity(double s0, double T, const KinematicLimits& limits);

/// Kinematic dominance curve: for each vertical distance the horizontal one
/// with equal time-minimal duration, by bisection to 1e-6 m. Independent of
/// the power models.
std::vector<std::pair<double, double>> dominance_boundary(const KinematicLimits& limits_x,
                                                          const KinematicLimits& limits_y,
                                                          const std::vector<double>& s_y_values);

struct SweepSpec {
  double sx_lo = 0.5, sx_hi = 30.0, sx_step = 0.5;
  double sy_lo = 0.5, sy_hi = 20.0, sy_step = 0.5;
  VerticalDirection direction = VerticalDirection::Up;
  Objective objective = Objective::Consumption;
  double load_mass = 1000.0;
  KinematicLimits limits_x, limits_y;
  PowerModel model_x, model_y;  // zero-load base models
  int workers = 0;              // 0 = hardware concurrency
  unsigned seed = 1;

  std::vector<double> sx_values() const;
  std::vector<double> sy_values() const;
};

struct MapCell {
  double s_x = 0.0, s_y = 0.0;
  Axis dominant_axis = Axis::X;
  double T = 0.0;
  double e_opt = 0.0;   // objective of the optimal movement [J]
  double e_base = 0.0;  // objective of the fully time-minimal movement [J]
  double saving_rate = 0.0;
  std::string classification = "unknown";
  int n_segments = 0;
  bool converged = false;
  double e_con = 0.0;  // net consumption of the optimal movement [J]
  double e_rec = 0.0;
  std::string error;
};

struct SweepResult {
  std::vector<MapCell> cells;  // ordered by (s_x, s_y)
  int n_converged = 0;
  int n_failed = 0;
  double mean_e_rec = 0.0;        // over converged cells
  double mean_saving_rate = 0.0;  // over converged cells
  std::map<std::string, int> classification_counts;
  std::vector<std::pair<double, double>> dominance_curve;  // (s_y, s_x)
  std::vector<std::pair<double, double>> econ_sign_curve;  // (s_x, s_y) of E_con = 0
};

/// Batch solve over the distance grid. Cells run concurrently; failures are
/// recorded per cell and never abort the sweep. `skip` cells (resume) are
/// copied through unsolved.
SweepResult sweep(const SweepSpec& spec, const SolverOptions& solver_opts = {},
                  const std::vector<MapCell>* resume_cells = nullptr);

}  // namespace crane
