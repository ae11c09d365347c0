#include "crane/serialization.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace crane {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

}  // namespace

PowerModel parse_power_model(const std::string& json_text) {
  const json doc = json::parse(json_text);
  PowerModel m;
  m.name = doc.value("name", "");
  m.effective_mass = doc.at("effective_mass").get<double>();
  m.gravity_term = doc.at("gravity_term").get<double>();
  m.friction_coulomb = doc.at("friction_coulomb").get<double>();
  m.friction_viscous = doc.at("friction_viscous").get<double>();
  m.drivetrain_efficiency_motor = doc.at("drivetrain_efficiency_motor").get<double>();
  m.drivetrain_efficiency_regen = doc.at("drivetrain_efficiency_regen").get<double>();
  m.standby_loss = doc.at("standby_loss").get<double>();
  m.copper_loss_coeff = doc.at("copper_loss_coeff").get<double>();
  m.validate();
  return m;
}

PowerModel load_power_model(const std::string& path) {
  return parse_power_model(read_file(path));
}

std::string power_model_to_json(const PowerModel& model) {
  json doc;
  doc["name"] = model.name;
  doc["effective_mass"] = model.effective_mass;
  doc["gravity_term"] = model.gravity_term;
  doc["friction_coulomb"] = model.friction_coulomb;
  doc["friction_viscous"] = model.friction_viscous;
  doc["drivetrain_efficiency_motor"] = model.drivetrain_efficiency_motor;
  doc["drivetrain_efficiency_regen"] = model.drivetrain_efficiency_regen;
  doc["standby_loss"] = model.standby_loss;
  doc["copper_loss_coeff"] = model.copper_loss_coeff;
  return doc.dump(2) + "\n";
}

std::string trajectory_to_json(const Trajectory& traj, double sample_dt) {
  json doc;
  doc["version"] = kVersion;
  doc["duration"] = traj.duration();
  doc["direction_sign"] = traj.direction_sign();
  doc["grid"] = traj.grid();
  json segs = json::array();
  for (const Segment& seg : traj.segments()) {
    json s;
    s["kind"] = to_string(seg.kind);
    s["duration"] = seg.duration;
    s["v0"] = seg.v0;
    s["a0"] = seg.a0;
    switch (seg.kind) {
      case SegmentKind::CD_a: s["accel"] = seg.accel; break;
      case SegmentKind::CD_j: s["jerk"] = seg.jerk; break;
      case SegmentKind::EL:
        s["lambda_G"] = seg.lambda;
        s["closed_form"] = seg.el && seg.el->closed_form;
        break;
      default: break;
    }
    segs.push_back(std::move(s));
  }
  doc["segments"] = std::move(segs);

  if (sample_dt > 0.0 && traj.duration() > 0.0) {
    json t = json::array(), x = json::array(), v = json::array(), a = json::array(),
         jj = json::array();
    for (double tt = 0.0;; tt += sample_dt) {
      const double tc = std::min(tt, traj.duration());
      const State st = traj.eval(tc);
      t.push_back(tc);
      x.push_back(st.pos);
      v.push_back(st.v);
      a.push_back(st.a);
      jj.push_back(st.j);
      if (tc >= traj.duration()) break;
    }
    doc["samples"] = {{"dt", sample_dt}, {"t", t}, {"x", x}, {"v", v}, {"a", a}, {"j", jj}};
  }
  return doc.dump(2) + "\n";
}

std::string energy_report_to_json(const EnergyReport& report, const std::string& hash) {
  json doc;
  doc["version"] = kVersion;
  doc["config_hash"] = hash;
  doc["E_rec_J"] = report.e_rec;
  doc["E_con_J"] = report.e_con;
  doc["T_s"] = report.T;
  doc["n_segments"] = report.n_segments;
  doc["classification"] = report.classification;
  return doc.dump(2) + "\n";
}

std::string map_cell_to_csv(const MapCell& cell, VerticalDirection direction,
                            Objective objective) {
  std::ostringstream line;
  line << format_double(cell.s_x) << ',' << format_double(cell.s_y) << ','
       << (direction == VerticalDirection::Up ? "up" : "down") << ',' << to_string(objective)
       << ',' << (cell.dominant_axis == Axis::X ? 'x' : 'y') << ',' << format_double(cell.T)
       << ',' << format_double(cell.e_opt) << ',' << format_double(cell.e_base) << ','
       << format_double(cell.saving_rate) << ',' << cell.classification << ','
       << cell.n_segments << ',' << (cell.converged ? 1 : 0);
  return line.str();
}

std::string sweep_to_csv(const SweepResult& result, const SweepSpec& spec) {
  std::ostringstream out;
  out << kMapCsvHeader << '\n';
  for (const MapCell& cell : result.cells)
    out << map_cell_to_csv(cell, spec.direction, spec.objective) << '\n';
  return out.str();
}

std::vector<MapCell> parse_map_csv(const std::string& csv_text) {
  std::vector<MapCell> cells;
  std::istringstream in(csv_text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line == kMapCsvHeader) continue;  // header row
    }
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 12) throw std::runtime_error("map CSV: malformed row: " + line);
    MapCell cell;
    cell.s_x = std::stod(fields[0]);
    cell.s_y = std::stod(fields[1]);
    cell.dominant_axis = fields[4] == "x" ? Axis::X : Axis::Y;
    cell.T = std::stod(fields[5]);
    cell.e_opt = std::stod(fields[6]);
    cell.e_base = std::stod(fields[7]);
    cell.saving_rate = std::stod(fields[8]);
    cell.classification = fields[9];
    cell.n_segments = std::stoi(fields[10]);
    cell.converged = fields[11] == "1";
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::string sweep_summary_to_json(const SweepResult& result, const SweepSpec& spec,
                                  const std::string& hash) {
  json doc;
  doc["version"] = kVersion;
  doc["config_hash"] = hash;
  doc["direction"] = spec.direction == VerticalDirection::Up ? "up" : "down";
  doc["objective"] = to_string(spec.objective);
  doc["n_cells"] = result.cells.size();
  doc["n_converged"] = result.n_converged;
  doc["n_failed"] = result.n_failed;
  doc["mean_E_rec_J"] = result.mean_e_rec;
  doc["mean_saving_rate"] = result.mean_saving_rate;
  doc["classification_counts"] = result.classification_counts;
  json dom = json::array();
  for (const auto& [sy, sx] : result.dominance_curve) dom.push_back({{"s_y", sy}, {"s_x", sx}});
  doc["dominance_curve"] = std::move(dom);
  json econ = json::array();
  for (const auto& [sx, sy] : result.econ_sign_curve) econ.push_back({{"s_x", sx}, {"s_y", sy}});
  doc["econ_sign_curve"] = std::move(econ);
  return doc.dump(2) + "\n";
}

PowerModel RunConfig::running_model() const {
  return running_model_path.empty() ? default_running_gear() : load_power_model(running_model_path);
}

PowerModel RunConfig::lifting_model() const {
  return lifting_model_path.empty() ? default_lifting_gear() : load_power_model(lifting_model_path);
}

namespace {

void limits_from_json(const json& doc, KinematicLimits& lim) {
  lim.v_max = doc.at("v_max").get<double>();
  lim.a_max = doc.at("a_max").get<double>();
  lim.j_max = doc.at("j_max").get<double>();
}

json limits_to_json(const KinematicLimits& lim) {
  return {{"v_max", lim.v_max}, {"a_max", lim.a_max}, {"j_max", lim.j_max}};
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  const json doc = json::parse(json_text);
  RunConfig cfg;
  if (doc.contains("limits")) {
    if (doc["limits"].contains("running")) limits_from_json(doc["limits"]["running"], cfg.limits_running);
    if (doc["limits"].contains("lifting")) limits_from_json(doc["limits"]["lifting"], cfg.limits_lifting);
  }
  if (doc.contains("models")) {
    cfg.running_model_path = doc["models"].value("running", "");
    cfg.lifting_model_path = doc["models"].value("lifting", "");
  }
  if (doc.contains("solver")) {
    const json& s = doc["solver"];
    cfg.solver.d_min = s.value("d_min", cfg.solver.d_min);
    cfg.solver.max_iterations = s.value("max_iterations", cfg.solver.max_iterations);
    cfg.solver.kkt_tol = s.value("kkt_tol", cfg.solver.kkt_tol);
    cfg.solver.step_tol = s.value("step_tol", cfg.solver.step_tol);
    cfg.solver.improve_tol = s.value("improve_tol", cfg.solver.improve_tol);
    cfg.solver.n_max = s.value("n_max", cfg.solver.n_max);
    cfg.solver.refine_top_k = s.value("refine_top_k", cfg.solver.refine_top_k);
    cfg.solver.abs_smooth_eps = s.value("abs_smooth_eps", cfg.solver.abs_smooth_eps);
    cfg.solver.el_fixed_steps = s.value("el_fixed_steps", cfg.solver.el_fixed_steps);
    cfg.solver.n_seeds = s.value("n_seeds", cfg.solver.n_seeds);
  }
  if (doc.contains("classify")) {
    const json& c = doc["classify"];
    cfg.classify.dwell_min = c.value("dwell_min", cfg.classify.dwell_min);
    cfg.classify.tm_band = c.value("tm_band", cfg.classify.tm_band);
    cfg.classify.const_v_band = c.value("const_v_band", cfg.classify.const_v_band);
    cfg.classify.const_v_frac = c.value("const_v_frac", cfg.classify.const_v_frac);
  }
  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    if (s.contains("sx")) {
      cfg.sweep_sx[0] = s["sx"].at(0).get<double>();
      cfg.sweep_sx[1] = s["sx"].at(1).get<double>();
      cfg.sweep_sx[2] = s["sx"].at(2).get<double>();
    }
    if (s.contains("sy")) {
      cfg.sweep_sy[0] = s["sy"].at(0).get<double>();
      cfg.sweep_sy[1] = s["sy"].at(1).get<double>();
      cfg.sweep_sy[2] = s["sy"].at(2).get<double>();
    }
    cfg.direction = s.value("direction", cfg.direction);
    cfg.objective = s.value("objective", cfg.objective);
    cfg.load_mass = s.value("load_mass", cfg.load_mass);
  }
  cfg.out_dir = doc.value("out_dir", cfg.out_dir);
  cfg.workers = doc.value("workers", cfg.workers);
  cfg.seed = doc.value("seed", cfg.seed);
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  return parse_run_config(read_file(path));
}

std::string run_config_to_json(const RunConfig& cfg) {
  json doc;
  doc["limits"] = {{"running", limits_to_json(cfg.limits_running)},
                   {"lifting", limits_to_json(cfg.limits_lifting)}};
  doc["models"] = {{"running", cfg.running_model_path}, {"lifting", cfg.lifting_model_path}};
  doc["solver"] = {{"d_min", cfg.solver.d_min},
                   {"max_iterations", cfg.solver.max_iterations},
                   {"kkt_tol", cfg.solver.kkt_tol},
                   {"step_tol", cfg.solver.step_tol},
                   {"improve_tol", cfg.solver.improve_tol},
                   {"n_max", cfg.solver.n_max},
                   {"refine_top_k", cfg.solver.refine_top_k},
                   {"abs_smooth_eps", cfg.solver.abs_smooth_eps},
                   {"el_fixed_steps", cfg.solver.el_fixed_steps},
                   {"n_seeds", cfg.solver.n_seeds}};
  doc["classify"] = {{"dwell_min", cfg.classify.dwell_min},
                     {"tm_band", cfg.classify.tm_band},
                     {"const_v_band", cfg.classify.const_v_band},
                     {"const_v_frac", cfg.classify.const_v_frac}};
  doc["sweep"] = {{"sx", {cfg.sweep_sx[0], cfg.sweep_sx[1], cfg.sweep_sx[2]}},
                  {"sy", {cfg.sweep_sy[0], cfg.sweep_sy[1], cfg.sweep_sy[2]}},
                  {"direction", cfg.direction},
                  {"objective", cfg.objective},
                  {"load_mass", cfg.load_mass}};
  doc["out_dir"] = cfg.out_dir;
  doc["workers"] = cfg.workers;
  doc["seed"] = cfg.seed;
  return doc.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  const std::string canonical = run_config_to_json(cfg);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char c : canonical) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016" PRIx64, h);
  return buf;
}

}  // namespace crane
