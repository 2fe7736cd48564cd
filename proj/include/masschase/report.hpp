#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "masschase/density_io.hpp"
#include "masschase/game.hpp"
#include "masschase/isaacs.hpp"

namespace masschase {

/// One row of the invariant checklist: a named quantity, its bound, the
/// measured value and the verdict. `upper` says which direction passes.
struct CheckItem {
  std::string name;
  double bound = 0;
  double measured = 0;
  bool pass = false;

  static CheckItem leq(std::string name, double measured, double bound) {
    return {std::move(name), bound, measured, measured <= bound};
  }
  static CheckItem geq(std::string name, double measured, double bound) {
    return {std::move(name), bound, measured, measured >= bound};
  }
  static CheckItem flag(std::string name, bool ok) {
    return {std::move(name), 1, ok ? 1.0 : 0.0, ok};
  }
};

struct Report {
  std::string command;
  std::string scenario_digest;
  nlohmann::ordered_json results = nlohmann::ordered_json::object();
  std::vector<CheckItem> checks;
  std::vector<std::string> notes;
  double elapsed_seconds = 0;

  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["scenario_digest"] = scenario_digest;
    j["results"] = results;
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json cj;
      cj["name"] = c.name;
      cj["bound"] = c.bound;
      cj["measured"] = c.measured;
      cj["pass"] = c.pass;
      j["checks"].push_back(cj);
    }
    j["all_pass"] = all_pass();
    j["notes"] = notes;
    j["timing"] = {{"elapsed_seconds", elapsed_seconds}};
    return j;
  }
};

inline void emit_report(const Report& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/report.json");
  if (!out) throw ConfigError("emit_report: cannot write to " + out_dir);
  out << report.to_json().dump(2) << "\n";
}

/// trajectory.csv: one row per step (k, t_k, y_k, a_k, b_k-id, stage cost).
inline void write_trajectory_csv(const Trajectory& traj, std::ostream& out) {
  out << "k,t,y,a,b_id,stage_cost\n";
  const std::size_t N = traj.times.size() - 1;
  for (std::size_t k = 0; k <= N; ++k) {
    out << k << "," << detail::full_precision(traj.times[k]) << ","
        << detail::full_precision(traj.positions[k]);
    if (k < N) {
      out << "," << detail::full_precision(traj.controls_a[k]) << "," << traj.field_labels[k]
          << "," << detail::full_precision(traj.stage_costs[k]);
    } else {
      out << ",,,";
    }
    out << "\n";
  }
}

inline void save_trajectory(const Trajectory& traj, const std::string& out_dir,
                            bool with_densities = false) {
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir + "/trajectory.csv");
  if (!out) throw ConfigError("save_trajectory: cannot write to " + out_dir);
  write_trajectory_csv(traj, out);
  if (with_densities) {
    for (std::size_t k = 0; k < traj.densities.size(); ++k)
      save_density(traj.densities[k], out_dir + "/density_" + std::to_string(k));
  }
}

struct ResidualSample {
  double x = 0;
  double t = 0;
  ResidualReport report;
};

/// residuals.csv: state, residual, breakdown.
inline void write_residual_csv(const std::vector<ResidualSample>& samples, std::ostream& out) {
  out << "x,t,residual,time_term,player_term,mass_term\n";
  for (const auto& s : samples) {
    out << detail::full_precision(s.x) << "," << detail::full_precision(s.t) << ","
        << detail::full_precision(s.report.residual) << ","
        << detail::full_precision(s.report.time_term) << ","
        << detail::full_precision(s.report.player_term) << ","
        << detail::full_precision(s.report.mass_term) << "\n";
  }
}

inline nlohmann::ordered_json residual_report_json(const ResidualReport& r) {
  nlohmann::ordered_json j;
  j["state"] = r.state;
  j["residual"] = r.residual;
  j["time_term"] = r.time_term;
  j["player_term"] = r.player_term;
  j["mass_term"] = r.mass_term;
  return j;
}

inline nlohmann::ordered_json h_schedule_json(const HSchedule& h) {
  nlohmann::ordered_json j;
  j["times"] = h.times;
  j["h_left"] = h.h_left;
  j["h_right"] = h.h_right;
  return j;
}

inline nlohmann::ordered_json value_result_json(const Scenario& sc, const ValueResult& v) {
  nlohmann::ordered_json j;
  j["V0"] = v.value;
  j["argmax_b_path"] = nlohmann::ordered_json::array();
  for (int b : v.field_path) j["argmax_b_path"].push_back(sc.mass_fields[std::size_t(b)].label);
  j["argmin_a_path"] = nlohmann::ordered_json::array();
  for (int a : v.control_path)
    j["argmin_a_path"].push_back(sc.controls.dictionary[std::size_t(a)][0]);
  j["node_count"] = v.node_count;
  return j;
}

}  // namespace masschase
