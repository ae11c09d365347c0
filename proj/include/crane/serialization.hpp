#pragma once

#include <optional>
#include <string>
#include <vector>

#include "crane/energymap.hpp"
#include "crane/optimizer.hpp"
#include "crane/powerflow.hpp"

namespace crane {

inline constexpr const char* kVersion = "0.1.0";

// --- power model files -----------------------------------------------------

PowerModel load_power_model(const std::string& path);
PowerModel parse_power_model(const std::string& json_text);
std::string power_model_to_json(const PowerModel& model);

// --- trajectories and reports ----------------------------------------------

/// Trajectory document: grid, per-segment kind and parameters, and an
/// optional dense sample table at step `sample_dt` for external plotting.
std::string trajectory_to_json(const Trajectory& traj, double sample_dt = 0.0);
std::string energy_report_to_json(const EnergyReport& report, const std::string& config_hash);

// --- sweep outputs -----------------------------------------------------------

inline constexpr const char* kMapCsvHeader =
    "s_x,s_y,direction,objective,dominant_axis,T,E_opt_J,E_base_J,saving_rate,"
    "classification,n_segments,converged";

std::string map_cell_to_csv(const MapCell& cell, VerticalDirection direction,
                            Objective objective);
std::string sweep_to_csv(const SweepResult& result, const SweepSpec& spec);
/// Parses a (possibly partial) map CSV back into cells; unknown lines throw.
std::vector<MapCell> parse_map_csv(const std::string& csv_text);
std::string sweep_summary_to_json(const SweepResult& result, const SweepSpec& spec,
                                  const std::string& config_hash);

// --- run configuration -------------------------------------------------------

struct RunConfig {
  KinematicLimits limits_running{3.0, 0.5, 1.0};
  KinematicLimits limits_lifting{0.9, 0.6, 0.6};
  std::string running_model_path;  // empty = shipped default
  std::string lifting_model_path;
  SolverOptions solver;
  ClassifyOptions classify;
  double sweep_sx[3] = {0.5, 30.0, 0.5};  // lo, hi, step
  double sweep_sy[3] = {0.5, 20.0, 0.5};
  std::string direction = "up";
  std::string objective = "consumption";
  double load_mass = 1000.0;
  std::string out_dir = "out";
  int workers = 0;
  unsigned seed = 1;

  PowerModel running_model() const;
  PowerModel lifting_model() const;
};

RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);
std::string run_config_to_json(const RunConfig& config);

/// FNV-1a hash of the canonical config document, embedded in outputs.
std::string config_hash(const RunConfig& config);

}  // namespace crane
