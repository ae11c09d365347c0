#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "crane/el_solver.hpp"
#include "crane/kinematics.hpp"
#include "crane/powerflow.hpp"
#include "crane/trajectory.hpp"

namespace crane {

enum class Objective { Recuperation, Consumption };

const char* to_string(Objective objective);

/// One single-drive optimization instance: minimize the chosen energy
/// objective for a drive covering s0 within the fixed horizon T while the
/// partner drive's power profile is given.
struct ProblemSpec {
  Objective objective = Objective::Consumption;
  double s0 = 0.0;  // [m]
  double T = 0.0;   // [s]
  KinematicLimits limits;
  PowerModel model;
  SlowPowerProfile p_slow;
  int direction_sign = 1;

  void validate() const;
};

/// Planned dynamics type of one interval. For CD_v, `level` selects the
/// cruise band edge: 1 = v_max, 0 = standstill dwell.
struct PlanItem {
  SegmentKind kind = SegmentKind::CD_j;
  int sign = 1;  // CD_a / CD_j: +/-1; CD_v: level; EL: unused
};

struct SegmentPlan {
  std::vector<PlanItem> items;
  std::string label;

  int size() const { return static_cast<int>(items.size()); }
  bool has_el() const;
  int el_count() const;
  /// Decision dimension: one duration per segment plus lambda if EL is present.
  int dim() const { return size() + (has_el() ? 1 : 0); }
};

/// Candidate dynamics sequences for a grid of n intervals: boundary-condition
/// compatible chains of jerk ramps, held-bound intervals, band-edge cruises,
/// dwells, and at most one stationarity arc for small n; repeated
/// move-dwell motifs for larger n.
std::vector<SegmentPlan> enumerate_plans(int n, const ProblemSpec& spec);

struct SolverOptions {
  double d_min = 1e-3;          // [s] minimum segment duration
  int max_iterations = 500;     // NLP inner-iteration budget per plan solve
  double kkt_tol = 1e-6;
  double step_tol = 1e-9;
  double fd_step = 1e-7;
  double improve_tol = 1e-4;    // relative improvement threshold of the outer loop
  int n_max = 40;               // grid growth bound
  int refine_top_k = 3;         // surrogate candidates refined with the full model
  double abs_smooth_eps = 1.0;  // [W] epsilon of sqrt(x^2 + eps^2) inside the NLP
  int el_fixed_steps = 64;      // RK4 steps per EL arc inside the full-model NLP
  int n_seeds = 3;              // deterministic duration-split seeds per plan
  int quad_points = 5;          // Gauss-Legendre points per smooth piece
  bool polish = true;           // Gauss-Newton re-projection with the adaptive integrator
};

struct SolveResult {
  Trajectory trajectory;
  EnergyReport report;
  int n_intervals = 0;
  bool converged = false;
  double objective_value = 0.0;  // exact (unsmoothed) objective of `trajectory`
  int iterations = 0;
  SegmentPlan plan;
  std::string message;
};

/// Solves the low-dimensional NLP for a fixed dynamics sequence. Throws
/// InfeasiblePlanError when no feasible point exists for the plan.
SolveResult solve_fixed_plan(const SegmentPlan& plan, const ProblemSpec& spec,
                             bool surrogate_only,
                             const std::optional<Eigen::VectorXd>& warm_start = std::nullopt,
                             const SolverOptions& opts = {},
                             const QuadraticSurrogate* surrogate = nullptr);

/// Grid-growth outer loop: enumerate plans per interval count, solve all in
/// surrogate mode, refine the best few with the full model, stop when adding
/// intervals no longer improves the objective.
SolveResult optimize(const ProblemSpec& spec, const SolverOptions& opts = {});

/// Comparison movement: the drive runs time-minimally and then rests until T.
SolveResult baseline(const ProblemSpec& spec, const SolverOptions& opts = {});

/// Counters behind the --profile throughput figure.
struct ThroughputStats {
  long surrogate_solves = 0;
  double surrogate_seconds = 0.0;
  double solves_per_second() const {
    return surrogate_seconds > 0.0 ? surrogate_solves / surrogate_seconds : 0.0;
  }
};

ThroughputStats& throughput_stats();
void reset_throughput_stats();

/// Wall-clock surrogate-step benchmark: worker threads repeatedly solve a
/// small catalog of feasible plans for `spec` until `min_seconds` elapse.
/// Returns completed solves per second. workers <= 0 uses all cores.
double profile_surrogate_throughput(const ProblemSpec& spec, const SolverOptions& opts,
                                    int workers = 0, double min_seconds = 2.0);

}  // namespace crane
