// Command-line driver: loads a scenario file, runs one verification or
// simulation command, prints one line per check and emits report.json plus
// CSV artifacts when --out is given.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "masschase/density_io.hpp"
#include "masschase/game.hpp"
#include "masschase/isaacs.hpp"
#include "masschase/report.hpp"
#include "masschase/scenario_io.hpp"

namespace {

using namespace masschase;

struct CommonOpts {
  std::string scenario_path;
  std::string out_dir;
  int steps = 0;       // 0 = scenario value
  int grid_cells = 0;  // 0 = scenario value
  double substep = 0;  // 0 = scenario value
  long budget = 10'000'000;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--scenario", o.scenario_path, "scenario file")->required();
  cmd->add_option("--out", o.out_dir, "output directory for report.json and CSV artifacts");
  cmd->add_option("--steps", o.steps, "override [horizon].steps");
  cmd->add_option("--grid-cells", o.grid_cells, "override the grid resolution");
  cmd->add_option("--substep", o.substep, "override [integrator].substep");
  cmd->add_option("--budget", o.budget, "node budget for the value recursion");
}

Scenario make_instance(const LoadedScenario& ls, const CommonOpts& o) {
  return ls.instance(o.steps > 0 ? std::optional<int>(o.steps) : std::nullopt,
                     o.grid_cells > 0 ? std::optional<int>(o.grid_cells) : std::nullopt,
                     o.substep > 0 ? std::optional<double>(o.substep) : std::nullopt);
}

// A constant field whose plateau covers the whole grid, used for the named
// "idle" and "custom-constant" mass strategies.
FieldSpec<1> grid_wide_constant(double v, const GridDensity<1>& m, const std::string& label) {
  return FieldSpec<1>::constant({v}, m.grid_box(), 1.0, label);
}

std::vector<double> round_trip_seeds(const Scenario& sc, int count) {
  const auto& box = sc.m0.support_box();
  const double lo = box.lo[0] - 0.5;
  const double hi = box.hi[0] + 0.5;
  std::vector<double> seeds(count);
  for (int i = 0; i < count; ++i) seeds[i] = lo + (hi - lo) * (i + 0.5) / count;
  return seeds;
}

void run_flow_check(const LoadedScenario& ls, const CommonOpts& o, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  const double T = sc.horizon;
  const auto seeds = round_trip_seeds(sc, 256);
  const double det_lo = std::exp(-sc.admissibility_bound * T) - 1e-9;
  const double det_hi = std::exp(sc.admissibility_bound * T) + 1e-9;
  for (const auto& field : sc.mass_fields) {
    const auto sched = Schedule<1>::single(field);
    double rt = 0, semi_pos = 0, semi_div = 0, det_min = 1e300, det_max = -1e300, at_t = 0;
    for (double x : seeds) {
      const auto fwd = integrate_flow(Vec<1>{x}, 0, T, sched, sc.integrator);
      const auto back = inverse_flow(fwd.position, 0, T, sched, sc.integrator);
      rt = std::max(rt, std::abs(back.position[0] - x));
      const double det = std::exp(fwd.div_integral);
      det_min = std::min(det_min, det);
      det_max = std::max(det_max, det);
      at_t = std::max(at_t, std::abs(jacobian_det(Vec<1>{x}, 0.25 * T, 0.25 * T, sched, sc.integrator) - 1.0));
    }
    for (int i = 0; i < 32; ++i) {
      const double x = seeds[std::size_t(i) * seeds.size() / 32];
      const double s1 = 0.4 * T;
      const auto leg1 = integrate_flow(Vec<1>{x}, 0, s1, sched, sc.integrator);
      const auto leg2 = integrate_flow(leg1.position, s1, T, sched, sc.integrator);
      const auto direct = integrate_flow(Vec<1>{x}, 0, T, sched, sc.integrator);
      semi_pos = std::max(semi_pos, std::abs(leg2.position[0] - direct.position[0]));
      semi_div = std::max(semi_div,
                          std::abs(leg1.div_integral + leg2.div_integral - direct.div_integral));
    }
    const std::string tag = field.label;
    rep.checks.push_back(CheckItem::leq("round_trip_max[" + tag + "]", rt, 1e-6));
    rep.checks.push_back(CheckItem::leq("semigroup_pos[" + tag + "]", semi_pos, 1e-6));
    rep.checks.push_back(CheckItem::leq("semigroup_div[" + tag + "]", semi_div, 1e-6));
    rep.checks.push_back(CheckItem::geq("det_min[" + tag + "]", det_min, det_lo));
    rep.checks.push_back(CheckItem::leq("det_max[" + tag + "]", det_max, det_hi));
    rep.checks.push_back(CheckItem::leq("det_at_equal_times[" + tag + "]", at_t, 0.0));
  }
}

void run_transport(const LoadedScenario& ls, const CommonOpts& o, int field_index, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  const double T = sc.horizon;
  const double m0_mass = mass(sc.m0);
  for (std::size_t i = 0; i < sc.mass_fields.size(); ++i) {
    const auto& field = sc.mass_fields[i];
    const auto moved =
        transport_density(sc.m0, 0, T, Schedule<1>::single(field), sc.integrator);
    const double drift = std::abs(mass(moved) - m0_mass) / m0_mass;
    double min_value = 0;
    for (double v : moved.values()) min_value = std::min(min_value, v);
    const auto env = support_envelope(sc.m0.support_box(), field_bounds(field).sup_b, T);
    const double h = sc.m0.spacing()[0];
    const bool contained = moved.support_box().lo[0] >= env.lo[0] - h &&
                           moved.support_box().hi[0] <= env.hi[0] + h;
    const std::string tag = field.label;
    rep.checks.push_back(CheckItem::leq("mass_drift_rel[" + tag + "]", drift, 1e-4));
    rep.checks.push_back(CheckItem::geq("min_value[" + tag + "]", min_value, 0.0));
    rep.checks.push_back(CheckItem::flag("support_in_envelope_plus_cell[" + tag + "]", contained));
    if (int(i) == field_index) {
      rep.results["transported_field"] = tag;
      rep.results["mass_initial"] = m0_mass;
      rep.results["mass_final"] = mass(moved);
      if (!o.out_dir.empty()) {
        std::filesystem::create_directories(o.out_dir);
        save_density(moved, o.out_dir + "/density_final");
      }
    }
  }
}

PlayerStrategy parse_player_strategy(const std::string& name, const Scenario& sc) {
  const double c = sc.dynamics.control_radius;
  if (name == "max-right") return constant_strategy(c);
  if (name == "max-left") return constant_strategy(-c);
  if (name.rfind("constant=", 0) == 0) {
    const double a = std::strtod(name.c_str() + 9, nullptr);
    if (std::abs(a) > c) throw ConfigError("player strategy: control outside [-c, c]");
    return constant_strategy(a);
  }
  throw ConfigError("unknown player strategy '" + name +
                    "' (max-right | max-left | constant=<a>)");
}

std::vector<double> player_path(const Scenario& sc, const PlayerStrategy& strategy) {
  // Positions under a state-free strategy (all named strategies are).
  std::vector<double> ys{sc.x0};
  double y = sc.x0;
  for (int k = 0; k < sc.steps; ++k) {
    const double a = strategy(k, y, sc.m0, sc.mass_fields.front());
    y = step_player(y, a, sc.dynamics, sc.dt());
    ys.push_back(y);
  }
  return ys;
}

Schedule<1> parse_mass_schedule(const std::string& name, const Scenario& sc,
                                const PlayerStrategy& strategy) {
  if (name == "idle") return Schedule<1>::single(grid_wide_constant(0.0, sc.m0, "idle"));
  if (name.rfind("constant=", 0) == 0) {
    const double v = std::strtod(name.c_str() + 9, nullptr);
    return Schedule<1>::single(grid_wide_constant(v, sc.m0, name));
  }
  if (name.rfind("field=", 0) == 0) {
    const std::size_t i = std::size_t(std::strtol(name.c_str() + 6, nullptr, 10));
    if (i >= sc.mass_fields.size()) throw ConfigError("mass strategy: field index out of range");
    return Schedule<1>::single(sc.mass_fields[i]);
  }
  if (name == "track-window") {
    if (sc.cost.terminal.kind != TerminalCost::Kind::WindowMass)
      throw ConfigError("track-window needs a window_mass terminal cost");
    const double r = sc.cost.terminal.radius;
    const double c = sc.dynamics.control_radius;
    const auto h = solve_h_ode(sc.m0, sc.x0, r, c, sc.horizon, sc.steps);
    std::vector<double> times(std::size_t(sc.steps) + 1);
    for (int k = 0; k <= sc.steps; ++k) times[std::size_t(k)] = sc.time_at(k);
    const auto ys = player_path(sc, strategy);
    return track_window_schedule(h, times, ys, r, c, 0.0);
  }
  throw ConfigError("unknown mass strategy '" + name +
                    "' (idle | constant=<v> | field=<i> | track-window)");
}

void run_rollout(const LoadedScenario& ls, const CommonOpts& o, const std::string& player,
                 const std::string& mass_name, bool densities, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  const auto strategy = parse_player_strategy(player, sc);
  const auto sched = parse_mass_schedule(mass_name, sc, strategy);
  const auto traj = rollout(sc, strategy, sched);
  rep.results["player_strategy"] = player;
  rep.results["mass_strategy"] = mass_name;
  rep.results["J"] = traj.total_cost;
  rep.results["final_position"] = traj.positions.back();
  rep.results["final_mass"] = mass(traj.densities.back());
  rep.checks.push_back(CheckItem::geq("cost_nonnegative", traj.total_cost, 0.0));
  if (!o.out_dir.empty()) save_trajectory(traj, o.out_dir, densities);
}

void run_lower_value(const LoadedScenario& ls, const CommonOpts& o, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  const auto res = lower_value_with_policy(sc, o.budget);
  rep.results = value_result_json(sc, res);
  const auto traj = rollout_policy(sc, res);
  rep.checks.push_back(
      CheckItem::leq("policy_rollout_matches_value", std::abs(traj.total_cost - res.value), 0.0));
}

void run_dpp_check(const LoadedScenario& ls, const CommonOpts& o, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  double worst = 0;
  for (int k = 1; k < sc.steps; ++k)
    worst = std::max(worst, dpp_split_check(sc, k, o.budget));
  rep.results["interior_splits"] = sc.steps - 1;
  rep.checks.push_back(CheckItem::leq("dpp_split_max_discrepancy", worst, 1e-12));
}

std::vector<FieldSpec<1>> residual_dictionary(const Scenario& sc, double x, double t, double r) {
  const double c = sc.dynamics.control_radius;
  const double T = sc.horizon;
  std::vector<FieldSpec<1>> dict;
  dict.push_back(optimal_mass_field(x, r, 0.0, 2 * c * (T - t), c, 0.0));
  dict.push_back(grid_wide_constant(c, sc.m0, "const+c"));
  dict.push_back(grid_wide_constant(-c, sc.m0, "const-c"));
  dict.push_back(grid_wide_constant(0.0, sc.m0, "const0"));
  return dict;
}

std::vector<ResidualSample> sweep_residuals(const Scenario& sc, const GridDensity<1>& m,
                                            InfMode mode, int samples) {
  std::vector<ResidualSample> out;
  const double c = sc.dynamics.control_radius;
  const double T = sc.horizon;
  if (sc.cost.terminal.kind == TerminalCost::Kind::SquaredMeanDistance) {
    const CandidateValue v{MeanSquareValue{}};
    const double mean = mean_position(m);
    for (int i = 0; i < samples; ++i) {
      const double offset = (0.2 + 1.6 * i / std::max(1, samples - 1));
      const double x = mean + (i % 2 == 0 ? offset : -offset);
      const double t = T * (i % 5) / 5.0;
      ResidualSample s{x, t, hji_residual(v, x, m, t, c, mode, sc.mass_fields)};
      out.push_back(std::move(s));
    }
    return out;
  }
  const double r = sc.cost.terminal.radius;
  const CandidateValue v{MonotoneWindowValue{r, c, T}};
  // Keep the swept windows inside the grid: the widest is at t = 0.
  const double x_max = m.grid_box().hi[0] - 2 * m.spacing()[0] - (r + 2 * c * T);
  if (x_max < sc.x0)
    throw DomainOverflowError("residual sweep: window around x0 exits the grid");
  const double x_step = std::min(0.15, (x_max - sc.x0) / 2);
  for (int i = 0; i < samples; ++i) {
    const double x = sc.x0 + x_step * (i % 3);
    const double t = T * (i % 4) / 4.0;
    const auto dict = residual_dictionary(sc, x, t, r);
    ResidualSample s{x, t, hji_residual(v, x, m, t, c, mode, dict)};
    out.push_back(std::move(s));
  }
  return out;
}

void run_residual(const LoadedScenario& ls, const CommonOpts& o, const std::string& mode_name,
                  int samples, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  const InfMode mode = mode_name == "dictionary" ? InfMode::Dictionary : InfMode::Analytic;
  const auto sweep = sweep_residuals(sc, sc.m0, mode, samples);
  double worst = 0;
  const ResidualSample* worst_sample = nullptr;
  for (const auto& s : sweep) {
    if (std::abs(s.report.residual) >= worst) worst_sample = &s;
    worst = std::max(worst, std::abs(s.report.residual));
  }
  rep.results["mode"] = mode_name;
  rep.results["samples"] = int(sweep.size());
  rep.results["max_abs_residual"] = worst;
  if (worst_sample) rep.results["worst_state"] = residual_report_json(worst_sample->report);
  const bool mean_square = sc.cost.terminal.kind == TerminalCost::Kind::SquaredMeanDistance;
  const double bound =
      (mode == InfMode::Analytic && mean_square) ? 1e-12 : 0.02 * norms(sc.m0).w1inf;
  rep.checks.push_back(CheckItem::leq("max_abs_residual", worst, bound));
  if (!o.out_dir.empty()) {
    std::filesystem::create_directories(o.out_dir);
    std::ofstream out(o.out_dir + "/residuals.csv");
    write_residual_csv(sweep, out);
  }
}

void run_verify_example1(const LoadedScenario& ls, const CommonOpts& o, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  if (sc.cost.terminal.kind != TerminalCost::Kind::WindowMass)
    throw ConfigError("verify-example1 needs a window_mass terminal cost");
  const double r = sc.cost.terminal.radius;
  const double c = sc.dynamics.control_radius;
  const double T = sc.horizon;
  const int N = sc.steps;

  // Window-extension ODE: monotone density forces h_l = 0, h_r = 2c(T - t).
  const auto h = solve_h_ode(sc.m0, sc.x0, r, c, T, N);
  double hl_max = 0, hr_err = 0, affine_err = 0;
  for (int k = 0; k <= N; ++k) {
    const std::size_t ku = std::size_t(k);
    hl_max = std::max(hl_max, std::abs(h.h_left[ku]));
    hr_err = std::max(hr_err, std::abs(h.h_right[ku] - 2 * c * (T - h.times[ku])));
    affine_err = std::max(affine_err,
                          std::abs(h.h_left[ku] + h.h_right[ku] - 2 * c * (T - h.times[ku])));
  }
  rep.checks.push_back(CheckItem::leq("h_left_identically_zero", hl_max, 0.0));
  rep.checks.push_back(CheckItem::leq("h_right_matches_2c(T-t)", hr_err, 0.0));
  rep.checks.push_back(CheckItem::leq("h_affine_constraint", affine_err, 0.0));
  rep.results["h_schedule"] = h_schedule_json(h);

  // Closed-form value at t = 0 against direct quadrature.
  const CandidateValue monotone{MonotoneWindowValue{r, c, T}};
  const double v_closed = candidate_value(monotone, sc.x0, sc.m0, 0.0);
  const double v_direct = window_integral(sc.m0, sc.x0 - r, sc.x0 + r + 2 * c * T);
  const double v_solved =
      value_window(WindowValue{r, h}, sc.x0, sc.m0, 0.0);
  rep.results["value_closed_form"] = v_closed;
  rep.checks.push_back(
      CheckItem::leq("value_matches_direct_quadrature", std::abs(v_closed - v_direct), 1e-12));
  rep.checks.push_back(
      CheckItem::leq("value_matches_solved_h_ode", std::abs(v_closed - v_solved), 1e-12));

  // Residual in dictionary mode at the native grid, then refined twice.
  const double w1inf = norms(sc.m0).w1inf;
  std::vector<double> maxres;
  std::vector<double> hs;
  for (int level = 0; level < 3; ++level) {
    const int cells = ls.grid_spec.cells << level;
    const GridDensity<1> m = ls.density_at(ls.grid_spec.with_cells(cells));
    const auto sweep = sweep_residuals(sc, m, InfMode::Dictionary, 12);
    double worst = 0;
    for (const auto& s : sweep) worst = std::max(worst, std::abs(s.report.residual));
    maxres.push_back(worst);
    hs.push_back(m.spacing()[0]);
  }
  rep.results["residual_levels"] = maxres;
  rep.checks.push_back(CheckItem::leq("residual_at_native_grid", maxres[0], 0.02 * w1inf));
  // Least-squares slope of log(residual) against log(h).
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < hs.size(); ++i) {
    const double lx = std::log(hs[i]), ly = std::log(maxres[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double n = double(hs.size());
  const double order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  rep.results["residual_order"] = order;
  rep.checks.push_back(CheckItem::geq("residual_convergence_order", order, 0.9));

  // Rollout cross-check: player at +c, mass tracking the window.
  const auto strategy = constant_strategy(c);
  const auto sched = parse_mass_schedule("track-window", sc, strategy);
  const auto traj = rollout(sc, strategy, sched);
  rep.results["rollout_J"] = traj.total_cost;
  rep.checks.push_back(CheckItem::leq("rollout_matches_value_rel",
                                      std::abs(traj.total_cost - v_closed) / v_closed, 0.02));
  if (!o.out_dir.empty()) save_trajectory(traj, o.out_dir);
}

void run_verify_example2(const LoadedScenario& ls, const CommonOpts& o, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  if (sc.cost.terminal.kind != TerminalCost::Kind::SquaredMeanDistance)
    throw ConfigError("verify-example2 needs a squared_mean_distance terminal cost");
  const double c = sc.dynamics.control_radius;
  const double psi0 = sc.cost.terminal_at(sc.x0, sc.m0);
  rep.results["psi0"] = psi0;

  const auto sweep = sweep_residuals(sc, sc.m0, InfMode::Analytic, 20);
  double worst = 0;
  bool both_signs_pos = false, both_signs_neg = false;
  for (const auto& s : sweep) {
    worst = std::max(worst, std::abs(s.report.residual));
    const double z = 2 * (s.x - mean_position(sc.m0));
    (z > 0 ? both_signs_pos : both_signs_neg) = true;
  }
  rep.checks.push_back(CheckItem::leq("mean_square_residual_max", worst, 1e-12));
  rep.checks.push_back(CheckItem::flag("residual_states_cover_both_signs",
                                       both_signs_pos && both_signs_neg));

  // Paired max-speed moves keep the gap frozen.
  const auto strategy = constant_strategy(-c);
  const auto sched = Schedule<1>::single(grid_wide_constant(-c, sc.m0, "constant=-c"));
  const auto traj = rollout(sc, strategy, sched);
  rep.results["rollout_J"] = traj.total_cost;
  rep.checks.push_back(
      CheckItem::leq("rollout_matches_psi0", std::abs(traj.total_cost - psi0), 1e-4));

  // Coarse minimax instance: N=3, 3x3 dictionaries, 256 cells.
  const Scenario coarse = ls.instance(3, 256);
  const auto value = lower_value_with_policy(coarse, o.budget);
  rep.results["value"] = value_result_json(coarse, value);
  rep.checks.push_back(CheckItem::leq("value_matches_psi0_rel",
                                      std::abs(value.value - psi0) / psi0, 0.05));
  const auto lo_traj = rollout(coarse, constant_strategy(-c),
                               Schedule<1>::single(grid_wide_constant(0.0, coarse.m0, "idle")));
  const auto hi_traj = rollout(coarse, constant_strategy(c),
                               Schedule<1>::single(grid_wide_constant(-c, coarse.m0, "constant=-c")));
  rep.results["J_mass_idle"] = lo_traj.total_cost;
  rep.results["J_player_reversed"] = hi_traj.total_cost;
  rep.checks.push_back(
      CheckItem::leq("sandwich_lower", lo_traj.total_cost, value.value));
  rep.checks.push_back(CheckItem::leq("sandwich_upper", value.value, hi_traj.total_cost));
  if (!o.out_dir.empty()) save_trajectory(traj, o.out_dir);
}

void run_invariants(const LoadedScenario& ls, const CommonOpts& o, Report& rep) {
  const Scenario sc = make_instance(ls, o);
  const double T = sc.horizon;

  // Field bounds hold on a dense sample; analytic divergence matches a
  // central finite difference away from profile kinks.
  for (const auto& field : sc.mass_fields) {
    const auto b = field_bounds(field);
    const auto verdict = check_admissible(field, sc.admissibility_bound);
    double sup_seen = 0, div_err = 0;
    const double lo = sc.m0.grid_box().lo[0], hi = sc.m0.grid_box().hi[0];
    for (int i = 0; i < 10000; ++i) {
      const double x = lo + (hi - lo) * (i + 0.5) / 10000;
      sup_seen = std::max(sup_seen, std::abs(field_eval(field, Vec<1>{x})[0]));
      const double fd = (field_eval(field, Vec<1>{x + 1e-4})[0] -
                         field_eval(field, Vec<1>{x - 1e-4})[0]) / 2e-4;
      if (b.lip_div < 1e300)
        div_err = std::max(div_err, std::abs(fd - field_div(field, Vec<1>{x})));
    }
    rep.checks.push_back(
        CheckItem::leq("sup_sample_within_bound[" + field.label + "]", sup_seen, b.sup_b + 1e-12));
    if (b.lip_div < 1e300)
      rep.checks.push_back(
          CheckItem::leq("fd_divergence_matches[" + field.label + "]", div_err, 1e-6 * std::max(1.0, b.lip_div)));
    rep.checks.push_back(CheckItem::flag("admissible[" + field.label + "]", verdict.admissible()));
  }

  // Flow invariants.
  run_flow_check(ls, o, rep);

  // Transport invariants: conservation, positivity, support; linearity of
  // the scheme in the initial values.
  run_transport(ls, o, -1, rep);
  {
    const auto& field = sc.mass_fields.front();
    const auto sched = Schedule<1>::single(field);
    std::vector<double> blend(sc.m0.values().size());
    const auto shifted = transport_density(sc.m0, 0, 0.25 * T, sched, sc.integrator);
    for (std::size_t i = 0; i < blend.size(); ++i)
      blend[i] = 0.5 * sc.m0.values()[i] + shifted.values()[i];
    const GridDensity<1> mixed(sc.m0.origin(), sc.m0.spacing(), sc.m0.extents(), blend);
    const auto lhs = transport_density(mixed, 0, T, sched, sc.integrator);
    const auto t1 = transport_density(sc.m0, 0, T, sched, sc.integrator);
    const auto t2 = transport_density(shifted, 0, T, sched, sc.integrator);
    double lin_err = 0;
    for (std::size_t i = 0; i < blend.size(); ++i)
      lin_err = std::max(lin_err,
                         std::abs(lhs.values()[i] - (0.5 * t1.values()[i] + t2.values()[i])));
    rep.checks.push_back(CheckItem::leq("transport_linearity", lin_err, 1e-12));
  }

  // Norm ordering and envelope nesting.
  const auto nr = norms(sc.m0);
  rep.checks.push_back(CheckItem::geq("h1_ge_l2", nr.h1, nr.l2));
  const auto env_once = support_envelope(sc.m0.support_box(), 1.0, 0.3);
  const auto env_twice = support_envelope(env_once, 1.0, 0.2);
  const auto env_direct = support_envelope(sc.m0.support_box(), 1.0, 0.5);
  rep.checks.push_back(CheckItem::leq(
      "envelope_semigroup",
      std::max(std::abs(env_twice.lo[0] - env_direct.lo[0]),
               std::abs(env_twice.hi[0] - env_direct.hi[0])),
      1e-15));

  // Stability of transport in the initial density (measured constants) and
  // the sup-norm growth bound.
  {
    const double M = sc.admissibility_bound;
    const auto& field = sc.mass_fields.front();
    const auto sched = Schedule<1>::single(field);
    const auto fc = measure_flow_constants(sched, sc.m0.support_box().dilated(0.5), 0.0, T,
                                           sc.integrator, 17);
    const double factor =
        3 * std::exp(2 * M * T) *
        std::max(1 + fc.m_tilde * fc.m_tilde, fc.l_phi_inv * fc.l_phi_inv);
    std::vector<double> mod(sc.m0.values().size());
    for (std::size_t i = 0; i < mod.size(); ++i)
      mod[i] = sc.m0.values()[i] * (0.6 + 0.4 * double(i) / double(mod.size()));
    const GridDensity<1> m2(sc.m0.origin(), sc.m0.spacing(), sc.m0.extents(), mod);
    const auto t1 = transport_density(sc.m0, 0, T, sched, sc.integrator);
    const auto t2 = transport_density(m2, 0, T, sched, sc.integrator);
    const double lhs = std::pow(difference_norms(t1, t2).h1, 2);
    const double rhs_base = std::pow(difference_norms(sc.m0, m2).h1, 2);
    rep.checks.push_back(CheckItem::leq("h1_stability_bound", lhs, 1.05 * factor * rhs_base));
    const double w_bound =
        std::max(1 + fc.m_tilde, fc.l_phi_inv) * norms(sc.m0).w1inf * std::exp(M * T);
    rep.checks.push_back(CheckItem::leq("w1inf_growth_bound", norms(t1).w1inf, w_bound));
  }

  // Window-extension machinery: affine constraint of the solved schedule and
  // the edge-tracking values of the optimal ramp.
  {
    const double c = sc.dynamics.control_radius;
    const double r = sc.cost.terminal.kind == TerminalCost::Kind::WindowMass
                         ? sc.cost.terminal.radius
                         : 0.25;
    const auto& sup = sc.m0.support_box();
    const double x_probe = 0.5 * (sup.lo[0] + sup.hi[0]);
    const auto h = solve_h_ode(sc.m0, x_probe, r, c, T, sc.steps);
    double affine_err = 0;
    for (std::size_t k = 0; k < h.times.size(); ++k)
      affine_err = std::max(affine_err, std::abs(h.h_left[k] + h.h_right[k] -
                                                 2 * c * (T - h.times[k])));
    rep.checks.push_back(CheckItem::leq("h_ode_affine_constraint", affine_err, 1e-12));
    const auto he = h.at(0.0);
    const auto ramp = optimal_mass_field(x_probe, r, he.h_left, he.h_right, c, 0.0);
    const double at_left = field_eval(ramp, Vec<1>{ramp.ramp_left})[0];
    const double at_right = field_eval(ramp, Vec<1>{ramp.ramp_right})[0];
    rep.checks.push_back(CheckItem::leq("ramp_left_edge_speed", std::abs(at_left - c), 0.0));
    rep.checks.push_back(CheckItem::leq("ramp_right_edge_speed", std::abs(at_right + c), 0.0));
  }

  // Candidate-value residuals: exact cancellation for the mean-square
  // candidate; dictionary inf dominates the analytic inf either way.
  if (sc.cost.terminal.kind == TerminalCost::Kind::SquaredMeanDistance) {
    const auto sweep = sweep_residuals(sc, sc.m0, InfMode::Analytic, 12);
    double worst = 0;
    for (const auto& s : sweep) worst = std::max(worst, std::abs(s.report.residual));
    rep.checks.push_back(CheckItem::leq("hji_residual_max", worst, 1e-12));
    const CandidateValue v{MeanSquareValue{}};
    double dominance = 0;
    for (const auto& s : sweep) {
      const auto dict = hji_residual(v, s.x, sc.m0, s.t, sc.dynamics.control_radius,
                                     InfMode::Dictionary, sc.mass_fields);
      dominance = std::min(dominance, dict.residual - s.report.residual);
    }
    rep.checks.push_back(CheckItem::geq("dictionary_dominates_analytic", dominance, -1e-12));
  }
}

int dispatch(const std::string& command, const CommonOpts& o,
             const std::function<void(const LoadedScenario&, Report&)>& body) {
  const auto start = std::chrono::steady_clock::now();
  Report rep;
  rep.command = command;
  try {
    const LoadedScenario ls = load_scenario(o.scenario_path);
    rep.scenario_digest = ls.digest;
    rep.notes = ls.notes;
    body(ls, rep);
    rep.elapsed_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (const auto& c : rep.checks)
      std::printf("[%s] %s: measured=%.6g bound=%.6g\n", c.pass ? "PASS" : "FAIL",
                  c.name.c_str(), c.measured, c.bound);
    if (!o.out_dir.empty()) emit_report(rep, o.out_dir);
    if (!rep.all_pass()) {
      std::printf("%s: %zu check(s) failed\n", command.c_str(), [&] {
        std::size_t n = 0;
        for (const auto& c : rep.checks)
          if (!c.pass) ++n;
        return n;
      }());
      return 1;
    }
    std::printf("%s: all checks passed\n", command.c_str());
    return 0;
  } catch (const BudgetError& e) {
    std::fprintf(stderr, "budget error: %s\n", e.what());
    return 3;
  } catch (const DomainOverflowError& e) {
    std::fprintf(stderr, "domain error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zero-sum game between a single player and a controlled mass density"};
  app.require_subcommand(1);

  CommonOpts o;
  int field_index = 0;
  std::string player = "max-right";
  std::string mass_name = "idle";
  std::string mode_name = "analytic";
  int samples = 20;
  bool densities = false;

  auto* flow_cmd = app.add_subcommand("flow-check", "characteristics round trip, semigroup, determinant bracket");
  add_common(flow_cmd, o);
  auto* transport_cmd = app.add_subcommand("transport", "density evolution and conservation report");
  add_common(transport_cmd, o);
  transport_cmd->add_option("--field", field_index, "dictB index whose final density is written");
  auto* rollout_cmd = app.add_subcommand("rollout", "one realized play");
  add_common(rollout_cmd, o);
  rollout_cmd->add_option("--player", player, "max-right | max-left | constant=<a>");
  rollout_cmd->add_option("--mass", mass_name, "idle | constant=<v> | field=<i> | track-window");
  rollout_cmd->add_flag("--densities", densities, "also write density snapshots");
  auto* value_cmd = app.add_subcommand("lower-value", "discrete lower value with policy");
  add_common(value_cmd, o);
  auto* dpp_cmd = app.add_subcommand("dpp-check", "dynamic programming split identity");
  add_common(dpp_cmd, o);
  auto* residual_cmd = app.add_subcommand("residual", "Isaacs residual sweep");
  add_common(residual_cmd, o);
  residual_cmd->add_option("--mode", mode_name, "analytic | dictionary");
  residual_cmd->add_option("--samples", samples, "number of sampled states");
  auto* ex1_cmd = app.add_subcommand("verify-example1", "monotone window pipeline");
  add_common(ex1_cmd, o);
  auto* ex2_cmd = app.add_subcommand("verify-example2", "mean-square pipeline");
  add_common(ex2_cmd, o);
  auto* inv_cmd = app.add_subcommand("invariants", "cross-module property battery");
  add_common(inv_cmd, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  if (flow_cmd->parsed())
    return dispatch("flow-check", o, [&](const LoadedScenario& ls, Report& r) { run_flow_check(ls, o, r); });
  if (transport_cmd->parsed())
    return dispatch("transport", o, [&](const LoadedScenario& ls, Report& r) { run_transport(ls, o, field_index, r); });
  if (rollout_cmd->parsed())
    return dispatch("rollout", o, [&](const LoadedScenario& ls, Report& r) {
      run_rollout(ls, o, player, mass_name, densities, r);
    });
  if (value_cmd->parsed())
    return dispatch("lower-value", o, [&](const LoadedScenario& ls, Report& r) { run_lower_value(ls, o, r); });
  if (dpp_cmd->parsed())
    return dispatch("dpp-check", o, [&](const LoadedScenario& ls, Report& r) { run_dpp_check(ls, o, r); });
  if (residual_cmd->parsed())
    return dispatch("residual", o, [&](const LoadedScenario& ls, Report& r) {
      run_residual(ls, o, mode_name, samples, r);
    });
  if (ex1_cmd->parsed())
    return dispatch("verify-example1", o, [&](const LoadedScenario& ls, Report& r) { run_verify_example1(ls, o, r); });
  if (ex2_cmd->parsed())
    return dispatch("verify-example2", o, [&](const LoadedScenario& ls, Report& r) { run_verify_example2(ls, o, r); });
  if (inv_cmd->parsed())
    return dispatch("invariants", o, [&](const LoadedScenario& ls, Report& r) { run_invariants(ls, o, r); });
  return 2;
}
