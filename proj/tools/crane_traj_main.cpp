#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "crane/energymap.hpp"
#include "crane/kinematics.hpp"
#include "crane/optimizer.hpp"
#include "crane/serialization.hpp"

namespace fs = std::filesystem;
using namespace crane;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;

void write_file(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

RunConfig load_config_with_env(const std::string& explicit_path) {
  if (!explicit_path.empty()) return load_run_config(explicit_path);
  if (const char* env = std::getenv("CRANE_TRAJ_CONFIG"); env != nullptr && *env != '\0')
    return load_run_config(env);
  return RunConfig{};
}

SweepSpec sweep_spec_from_config(const RunConfig& cfg) {
  SweepSpec spec;
  spec.sx_lo = cfg.sweep_sx[0];
  spec.sx_hi = cfg.sweep_sx[1];
  spec.sx_step = cfg.sweep_sx[2];
  spec.sy_lo = cfg.sweep_sy[0];
  spec.sy_hi = cfg.sweep_sy[1];
  spec.sy_step = cfg.sweep_sy[2];
  spec.direction = cfg.direction == "down" ? VerticalDirection::Down : VerticalDirection::Up;
  spec.objective =
      cfg.objective == "recuperation" ? Objective::Recuperation : Objective::Consumption;
  spec.load_mass = cfg.load_mass;
  spec.limits_x = cfg.limits_running;
  spec.limits_y = cfg.limits_lifting;
  spec.model_x = cfg.running_model();
  spec.model_y = cfg.lifting_model();
  spec.workers = cfg.workers;
  spec.seed = cfg.seed;
  return spec;
}

int cmd_timemin(const RunConfig& cfg, const std::string& drive, double distance,
                double sample_dt) {
  const KinematicLimits& lim = drive == "lifting" ? cfg.limits_lifting : cfg.limits_running;
  const Trajectory traj = time_minimal_profile(distance, lim);
  std::printf("drive: %s\ndistance: %.6f m\nT: %.9f s\nsegments: %zu\n", drive.c_str(), distance,
              traj.duration(), traj.size());
  write_file(fs::path(cfg.out_dir) / ("timemin_" + drive + ".json"),
             trajectory_to_json(traj, sample_dt));
  return kExitOk;
}

int cmd_optimize(const RunConfig& cfg, double sx, double sy, const std::string& direction,
                 const std::string& objective, double load_mass, double sample_dt, bool profile) {
  TravelSpec travel;
  travel.s_x = sx;
  travel.s_y = sy;
  travel.vertical_direction =
      direction == "down" ? VerticalDirection::Down : VerticalDirection::Up;
  travel.load_mass = load_mass;
  const Objective obj =
      objective == "recuperation" ? Objective::Recuperation : Objective::Consumption;

  InstanceSetup setup = make_instance(travel, obj, cfg.limits_running, cfg.limits_lifting,
                                      cfg.running_model(), cfg.lifting_model());

  SolveResult opt = optimize(setup.problem, cfg.solver);
  SolveResult base = baseline(setup.problem, cfg.solver);
  opt.report.classification = classify(opt, setup.problem, cfg.classify);

  const double denom = std::abs(base.objective_value);
  const double saving = denom > 0.0 ? (base.objective_value - opt.objective_value) / denom : 0.0;
  const std::string hash = config_hash(cfg);

  const fs::path out(cfg.out_dir);
  write_file(out / "trajectory.json", trajectory_to_json(opt.trajectory, sample_dt));
  write_file(out / "report.json", energy_report_to_json(opt.report, hash));

  std::ostringstream summary;
  summary << "{\n"
          << "  \"version\": \"" << kVersion << "\",\n"
          << "  \"config_hash\": \"" << hash << "\",\n"
          << "  \"T_s\": " << setup.hor.T << ",\n"
          << "  \"slow_axis\": \"" << (setup.hor.slow_axis == Axis::X ? "x" : "y") << "\",\n"
          << "  \"n_segments\": " << opt.n_intervals << ",\n"
          << "  \"E_rec_J\": " << opt.report.e_rec << ",\n"
          << "  \"E_con_J\": " << opt.report.e_con << ",\n"
          << "  \"E_baseline_J\": " << base.objective_value << ",\n"
          << "  \"saving_rate\": " << saving << ",\n"
          << "  \"classification\": \"" << opt.report.classification << "\",\n"
          << "  \"converged\": " << (opt.converged ? "true" : "false") << "\n"
          << "}\n";
  write_file(out / "summary.json", summary.str());

  std::printf("T: %.6f s (slow axis %s)\n", setup.hor.T,
              setup.hor.slow_axis == Axis::X ? "x" : "y");
  std::printf("segments: %d, classification: %s\n", opt.n_intervals,
              opt.report.classification.c_str());
  std::printf("E_rec: %.1f J, E_con: %.1f J, baseline: %.1f J, saving: %.4f\n", opt.report.e_rec,
              opt.report.e_con, base.objective_value, saving);

  if (profile) {
    const double rate = profile_surrogate_throughput(setup.problem, cfg.solver,
                                                     cfg.workers > 0 ? cfg.workers : 0, 2.0);
    std::printf("surrogate throughput: %.1f trajectories/s\n", rate);
  }
  if (!opt.converged) {
    std::fprintf(stderr, "solver did not converge; artifacts flagged converged=false\n");
    return kExitSolver;
  }
  return kExitOk;
}

int cmd_sweep(const RunConfig& cfg, bool resume, bool profile) {
  SweepSpec spec = sweep_spec_from_config(cfg);
  const std::string tag = std::string(spec.direction == VerticalDirection::Up ? "up" : "down") +
                          "_" + to_string(spec.objective);
  const fs::path csv_path = fs::path(cfg.out_dir) / ("map_" + tag + ".csv");
  const fs::path summary_path = fs::path(cfg.out_dir) / ("summary_" + tag + ".json");

  std::vector<MapCell> previous;
  if (resume && fs::exists(csv_path)) {
    std::ifstream in(csv_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    previous = parse_map_csv(ss.str());
    std::printf("resuming: %zu cells already present\n", previous.size());
  }

  SweepResult result = sweep(spec, cfg.solver, previous.empty() ? nullptr : &previous);
  write_file(csv_path, sweep_to_csv(result, spec));
  write_file(summary_path, sweep_summary_to_json(result, spec, config_hash(cfg)));

  std::printf("cells: %zu (converged %d, failed %d)\n", result.cells.size(), result.n_converged,
              result.n_failed);
  std::printf("mean E_rec: %.1f J, mean saving rate: %.4f\n", result.mean_e_rec,
              result.mean_saving_rate);
  for (const auto& [name, count] : result.classification_counts)
    std::printf("  %-24s %d\n", name.c_str(), count);

  if (profile) {
    TravelSpec travel;
    travel.s_x = 0.5 * (spec.sx_lo + spec.sx_hi);
    travel.s_y = 0.5 * (spec.sy_lo + spec.sy_hi);
    travel.vertical_direction = spec.direction;
    travel.load_mass = spec.load_mass;
    InstanceSetup setup = make_instance(travel, spec.objective, spec.limits_x, spec.limits_y,
                                        spec.model_x, spec.model_y);
    const double rate =
        profile_surrogate_throughput(setup.problem, cfg.solver, spec.workers, 2.0);
    std::printf("surrogate throughput: %.1f trajectories/s\n", rate);
  }
  return kExitOk;
}

int cmd_validate_model(const std::string& path) {
  const PowerModel model = load_power_model(path);
  std::printf("model: %s\n", model.name.c_str());
  std::printf("%10s %10s %14s\n", "v [m/s]", "a [m/s2]", "P [W]");
  const double v_hi = 3.0, a_hi = 0.6;
  for (int i = 0; i <= 4; ++i) {
    for (int k = 0; k <= 4; ++k) {
      const double v = v_hi * i / 4.0;
      const double a = -a_hi + 2.0 * a_hi * k / 4.0;
      std::printf("%10.3f %10.3f %14.2f\n", v, a, model.power(v, a));
    }
  }
  const QuadraticSurrogate fit = fit_quadratic(model, 0.0, v_hi, -a_hi, a_hi);
  std::printf("quadratic fit rms residual: %.3f W%s\n", fit.rms_residual,
              fit.c02_clamped ? " (c02 clamped)" : "");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-optimal trajectory planning for dual-drive stacker cranes"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  bool profile = false;
  app.add_option("--config", config_path, "JSON run configuration (or CRANE_TRAJ_CONFIG)");
  app.add_option("--out", out_dir, "output directory (overrides config)");
  app.add_flag("--profile", profile, "print surrogate-step throughput");

  auto* timemin = app.add_subcommand("timemin", "time-minimal profile of one drive");
  std::string drive = "running";
  double distance = 0.0;
  double sample_dt = 0.0;
  timemin->add_option("--drive", drive, "running | lifting")
      ->check(CLI::IsMember({"running", "lifting"}));
  timemin->add_option("--distance", distance, "travel distance [m]")->required();
  timemin->add_option("--sample-dt", sample_dt, "dense sample step in the JSON dump [s]");

  auto* opt_cmd = app.add_subcommand("optimize", "energy-optimal movement for one travel");
  double sx = 0.0, sy = 0.0, load_mass = 1000.0;
  std::string direction = "up", objective = "consumption";
  opt_cmd->add_option("--sx", sx, "horizontal distance [m]")->required();
  opt_cmd->add_option("--sy", sy, "vertical distance [m]")->required();
  opt_cmd->add_option("--direction", direction, "up | down")
      ->check(CLI::IsMember({"up", "down"}));
  opt_cmd->add_option("--objective", objective, "recuperation | consumption")
      ->check(CLI::IsMember({"recuperation", "consumption"}));
  opt_cmd->add_option("--load", load_mass, "payload mass [kg]");
  opt_cmd->add_option("--sample-dt", sample_dt, "dense sample step in the JSON dump [s]");

  auto* sweep_cmd = app.add_subcommand("sweep", "batch energy map over the distance grid");
  bool resume = false;
  double sweep_flags[6] = {-1, -1, -1, -1, -1, -1};
  sweep_cmd->add_flag("--resume", resume, "reuse completed cells from an existing CSV");
  sweep_cmd->add_option("--sx-lo", sweep_flags[0]);
  sweep_cmd->add_option("--sx-hi", sweep_flags[1]);
  sweep_cmd->add_option("--sx-step", sweep_flags[2]);
  sweep_cmd->add_option("--sy-lo", sweep_flags[3]);
  sweep_cmd->add_option("--sy-hi", sweep_flags[4]);
  sweep_cmd->add_option("--sy-step", sweep_flags[5]);
  std::string sweep_direction, sweep_objective;
  double sweep_load = -1.0;
  int workers = -1;
  sweep_cmd->add_option("--direction", sweep_direction, "up | down")
      ->check(CLI::IsMember({"up", "down"}));
  sweep_cmd->add_option("--objective", sweep_objective, "recuperation | consumption")
      ->check(CLI::IsMember({"recuperation", "consumption"}));
  sweep_cmd->add_option("--load", sweep_load, "payload mass [kg]");
  sweep_cmd->add_option("--workers", workers, "worker thread count (0 = hardware)");

  auto* validate = app.add_subcommand("validate-model", "sample a power-model file");
  std::string model_path;
  validate->add_option("--model", model_path, "power model JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg = load_config_with_env(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;

    if (timemin->parsed()) {
      if (!(distance > 0.0)) {
        std::fprintf(stderr, "error: distance must be positive\n");
        return kExitUsage;
      }
      return cmd_timemin(cfg, drive, distance, sample_dt);
    }
    if (opt_cmd->parsed())
      return cmd_optimize(cfg, sx, sy, direction, objective, load_mass, sample_dt, profile);
    if (sweep_cmd->parsed()) {
      if (sweep_flags[0] >= 0) cfg.sweep_sx[0] = sweep_flags[0];
      if (sweep_flags[1] >= 0) cfg.sweep_sx[1] = sweep_flags[1];
      if (sweep_flags[2] >= 0) cfg.sweep_sx[2] = sweep_flags[2];
      if (sweep_flags[3] >= 0) cfg.sweep_sy[0] = sweep_flags[3];
      if (sweep_flags[4] >= 0) cfg.sweep_sy[1] = sweep_flags[4];
      if (sweep_flags[5] >= 0) cfg.sweep_sy[2] = sweep_flags[5];
      if (!sweep_direction.empty()) cfg.direction = sweep_direction;
      if (!sweep_objective.empty()) cfg.objective = sweep_objective;
      if (sweep_load >= 0.0) cfg.load_mass = sweep_load;
      if (workers >= 0) cfg.workers = workers;
      return cmd_sweep(cfg, resume, profile);
    }
    if (validate->parsed()) return cmd_validate_model(model_path);
    return kExitUsage;
  } catch (const InfeasiblePlanError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
}
