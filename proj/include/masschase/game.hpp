#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "masschase/core.hpp"
#include "masschase/density.hpp"
#include "masschase/fields.hpp"
#include "masschase/flow.hpp"

namespace masschase {

/// Single-player dynamics y' = g(y) + a with a in the box [-c, c].
struct PlayerDynamics {
  double control_radius = 0;
  std::optional<FieldSpec<1>> drift;

  double speed_bound() const {
    const double sup_g = drift ? field_bounds(*drift).sup_b : 0.0;
    return sup_g + control_radius;
  }
};

/// Fourth-order step of y' = g(y) + a with the control frozen over the step.
inline double step_player(double y, double a, const PlayerDynamics& dyn, double dt) {
  if (!(dt > 0)) throw ConfigError("step_player: dt must be > 0");
  if (std::abs(a) > dyn.control_radius)
    throw ConfigError("step_player: control outside [-c, c]");
  if (!dyn.drift) return y + a * dt;
  const auto& g = *dyn.drift;
  auto rhs = [&](double z) { return field_eval(g, Vec<1>{z})[0] + a; };
  const double k1 = rhs(y);
  const double k2 = rhs(y + dt / 2 * k1);
  const double k3 = rhs(y + dt / 2 * k2);
  const double k4 = rhs(y + dt * k3);
  return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
}

struct RunningCost {
  enum class Kind { Zero, WindowOccupancy };
  Kind kind = Kind::Zero;
  double radius = 0;
};

struct TerminalCost {
  enum class Kind { WindowMass, SquaredMeanDistance };
  Kind kind = Kind::WindowMass;
  double radius = 0;
};

struct CostSpec {
  RunningCost running;
  TerminalCost terminal;

  double running_at(double x, const GridDensity<1>& m, double /*t*/) const {
    switch (running.kind) {
      case RunningCost::Kind::Zero:
        return 0;
      case RunningCost::Kind::WindowOccupancy:
        return window_integral(m, x - running.radius, x + running.radius);
    }
    return 0;
  }

  double terminal_at(double x, const GridDensity<1>& m) const {
    switch (terminal.kind) {
      case TerminalCost::Kind::WindowMass:
        return window_integral(m, x - terminal.radius, x + terminal.radius);
      case TerminalCost::Kind::SquaredMeanDistance: {
        const double gap = x - mean_position(m);
        return gap * gap;
      }
    }
    return 0;
  }
};

/// A full game instance. Aggregate; build with designated initializers and
/// run validate_scenario before use.
struct Scenario {
  double horizon = 1;
  int steps = 1;
  double x0 = 0;
  GridDensity<1> m0;
  PlayerDynamics dynamics;
  CostSpec cost;
  ControlSetA<1> controls;               // dictA
  std::vector<FieldSpec<1>> mass_fields; // dictB
  IntegratorConfig integrator{1e-3};
  double admissibility_bound = 1;        // M of the admissible set
  double ramp_slope_bound = std::numeric_limits<double>::infinity(); // c1

  double dt() const { return horizon / steps; }
  double time_at(int k) const { return k * dt(); }
};

inline void validate_scenario(const Scenario& sc) {
  if (!(sc.horizon > 0)) throw ConfigError("scenario: horizon must be > 0");
  if (sc.steps < 1) throw ConfigError("scenario: steps must be >= 1");
  if (sc.mass_fields.empty()) throw ConfigError("scenario: dictB must be non-empty");
  if (sc.m0.empty_support()) throw ConfigError("scenario: initial density is identically zero");
  if (!sc.m0.grid_box().contains(Vec<1>{sc.x0}))
    throw ConfigError("scenario: player start x0 lies outside the grid domain");
  for (std::size_t i = 0; i < sc.mass_fields.size(); ++i) {
    const auto verdict = check_admissible(sc.mass_fields[i], sc.admissibility_bound);
    if (!verdict.admissible()) {
      std::string msg = "scenario: dictB[" + std::to_string(i) + "] (" + sc.mass_fields[i].label +
                        ") violates";
      for (const auto& v : verdict.violations) msg += " [" + v + "]";
      throw ConfigError(msg);
    }
    if (!ramp_fits_swing(sc.mass_fields[i], sc.ramp_slope_bound))
      throw ConfigError("scenario: dictB[" + std::to_string(i) +
                        "] ramp slope exceeds c1 (needs R - L >= 2c/c1)");
  }
  if (sc.cost.terminal.kind == TerminalCost::Kind::SquaredMeanDistance) {
    const double total = mass(sc.m0);
    if (std::abs(total - 1.0) > 1e-9)
      throw ConfigError("scenario: squared-mean-distance cost requires unit mass");
  }
}

/// One realized play. Density snapshots are kept at every knot unless
/// thinned, in which case only the initial and final ones remain.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> positions;
  std::vector<GridDensity<1>> densities;
  bool thinned = false;
  std::vector<double> controls_a;
  std::vector<std::string> field_labels;
  std::vector<double> stage_costs;
  double total_cost = 0;
};

/// Non-anticipating step map: sees the mass's current-step field before
/// committing the control.
using PlayerStrategy =
    std::function<double(int k, double y, const GridDensity<1>& m, const FieldSpec<1>& b)>;

inline PlayerStrategy constant_strategy(double a) {
  return [a](int, double, const GridDensity<1>&, const FieldSpec<1>&) { return a; };
}

namespace detail {
// Right fold of the stage costs, matching the recursion's arithmetic:
// J = dt*l_0 + (dt*l_1 + (... + psi)).
inline double fold_cost(const std::vector<double>& times, const std::vector<double>& stages,
                        double terminal) {
  double acc = terminal;
  for (std::size_t k = stages.size(); k-- > 0;)
    acc = (times[k + 1] - times[k]) * stages[k] + acc;
  return acc;
}
}  // namespace detail

inline Trajectory rollout(const Scenario& sc, const PlayerStrategy& strategy,
                          const Schedule<1>& mass_schedule, bool keep_densities = true) {
  Trajectory traj;
  traj.thinned = !keep_densities;
  const int N = sc.steps;
  double y = sc.x0;
  GridDensity<1> m = sc.m0;
  traj.times.push_back(sc.time_at(0));
  traj.positions.push_back(y);
  traj.densities.push_back(m);
  for (int k = 0; k < N; ++k) {
    const double tk = sc.time_at(k);
    const double tk1 = sc.time_at(k + 1);
    const FieldSpec<1>& b = mass_schedule.field_at(tk);
    const double a = strategy(k, y, m, b);
    traj.stage_costs.push_back(sc.cost.running_at(y, m, tk));
    traj.controls_a.push_back(a);
    traj.field_labels.push_back(b.label);
    m = transport_density(m, tk, tk1, Schedule<1>::single(b, tk), sc.integrator);
    y = step_player(y, a, sc.dynamics, tk1 - tk);
    traj.times.push_back(tk1);
    traj.positions.push_back(y);
    if (keep_densities || k == N - 1) traj.densities.push_back(m);
  }
  traj.total_cost = detail::fold_cost(traj.times, traj.stage_costs, sc.cost.terminal_at(y, m));
  return traj;
}

/// Recomputes J from the trajectory's snapshots (left-endpoint rule for the
/// running cost, terminal cost at the final knot).
inline double evaluate_cost(const Trajectory& traj, const CostSpec& cost) {
  if (traj.times.empty()) throw ConfigError("evaluate_cost: empty trajectory");
  const std::size_t N = traj.times.size() - 1;
  if (cost.running.kind != RunningCost::Kind::Zero && traj.thinned && N > 1)
    throw ConfigError("evaluate_cost: running cost needs per-step density snapshots");
  std::vector<double> stages(N, 0.0);
  if (cost.running.kind != RunningCost::Kind::Zero)
    for (std::size_t k = 0; k < N; ++k)
      stages[k] = cost.running_at(traj.positions[k], traj.densities[k], traj.times[k]);
  const double terminal = cost.terminal_at(traj.positions[N], traj.densities.back());
  return detail::fold_cost(traj.times, stages, terminal);
}

struct ValueResult {
  double value = 0;
  std::vector<int> field_path;    // argmax indices into dictB along the principal line
  std::vector<int> control_path;  // argmin indices into dictA along the principal line
  long node_count = 0;
};

namespace detail {

inline void check_value_budget(const Scenario& sc, int k, long budget) {
  const double branches = double(sc.controls.dictionary.size()) * double(sc.mass_fields.size());
  const double nodes = std::pow(branches, double(sc.steps - k));
  if (nodes > double(budget))
    throw BudgetError("lower value: (|dictA|*|dictB|)^(N-k) exceeds the recursion budget");
}

// Exhaustive max-min backward recursion. The mass commits its step field
// first; the player responds. Ties break on the first dictionary index.
inline double lower_value_rec(const Scenario& sc, int k, double y, const GridDensity<1>& m,
                              long& nodes, int frontier,
                              const std::function<double(int, double, const GridDensity<1>&)>& at_frontier,
                              int* best_b = nullptr, int* best_a = nullptr) {
  ++nodes;
  if (k == frontier && at_frontier) return at_frontier(k, y, m);
  if (k == sc.steps) return sc.cost.terminal_at(y, m);
  const double tk = sc.time_at(k);
  const double tk1 = sc.time_at(k + 1);
  const double dt = tk1 - tk;
  const double stage = sc.cost.running_at(y, m, tk);
  double outer = -std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < sc.mass_fields.size(); ++bi) {
    const GridDensity<1> m1 = transport_density(
        m, tk, tk1, Schedule<1>::single(sc.mass_fields[bi], tk), sc.integrator);
    double inner = std::numeric_limits<double>::infinity();
    int inner_arg = -1;
    for (std::size_t ai = 0; ai < sc.controls.dictionary.size(); ++ai) {
      const double y1 = step_player(y, sc.controls.dictionary[ai][0], sc.dynamics, dt);
      const double val =
          dt * stage + lower_value_rec(sc, k + 1, y1, m1, nodes, frontier, at_frontier);
      if (val < inner) {
        inner = val;
        inner_arg = int(ai);
      }
    }
    if (inner > outer) {
      outer = inner;
      if (best_b) *best_b = int(bi);
      if (best_a) *best_a = inner_arg;
    }
  }
  return outer;
}

}  // namespace detail

/// V_k(y, m) by exhaustive recursion; guarded so the tree stays explicit.
inline double discrete_lower_value(const Scenario& sc, int k, double y, const GridDensity<1>& m,
                                   long budget = 10'000'000) {
  if (k < 0 || k > sc.steps) throw ConfigError("lower value: step index out of range");
  detail::check_value_budget(sc, k, budget);
  long nodes = 0;
  return detail::lower_value_rec(sc, k, y, m, nodes, -1, nullptr);
}

/// V_0 plus the principal max/min line and the explored node count.
inline ValueResult lower_value_with_policy(const Scenario& sc, long budget = 10'000'000) {
  detail::check_value_budget(sc, 0, budget);
  ValueResult out;
  double y = sc.x0;
  GridDensity<1> m = sc.m0;
  for (int k = 0; k < sc.steps; ++k) {
    int bb = -1, aa = -1;
    const double val = detail::lower_value_rec(sc, k, y, m, out.node_count, -1, nullptr, &bb, &aa);
    if (k == 0) out.value = val;
    out.field_path.push_back(bb);
    out.control_path.push_back(aa);
    m = transport_density(m, sc.time_at(k), sc.time_at(k + 1),
                          Schedule<1>::single(sc.mass_fields[std::size_t(bb)], sc.time_at(k)),
                          sc.integrator);
    y = step_player(y, sc.controls.dictionary[std::size_t(aa)][0], sc.dynamics, sc.dt());
  }
  if (sc.steps == 0) out.value = sc.cost.terminal_at(y, m);
  return out;
}

/// Replays a principal line as a rollout (same arithmetic path as the
/// recursion's optimal branch).
inline Trajectory rollout_policy(const Scenario& sc, const ValueResult& policy) {
  auto strategy = [&](int step, double, const GridDensity<1>&, const FieldSpec<1>&) {
    return sc.controls.dictionary[std::size_t(policy.control_path[std::size_t(step)])][0];
  };
  std::vector<typename Schedule<1>::Entry> entries;
  for (int k = 0; k < sc.steps; ++k)
    entries.push_back({sc.time_at(k), sc.mass_fields[std::size_t(policy.field_path[std::size_t(k)])]});
  return rollout(sc, strategy, Schedule<1>::piecewise(std::move(entries)));
}

/// |V_0 computed directly - V_0 recomputed with the recursion cut at k*| —
/// zero in exact arithmetic by the dynamic programming principle.
inline double dpp_split_check(const Scenario& sc, int k_star, long budget = 10'000'000) {
  if (k_star < 0 || k_star > sc.steps) throw ConfigError("dpp split: index out of range");
  detail::check_value_budget(sc, 0, budget);
  long nodes = 0;
  const double direct = detail::lower_value_rec(sc, 0, sc.x0, sc.m0, nodes, -1, nullptr);
  auto frontier_value = [&](int k, double y, const GridDensity<1>& m) {
    return discrete_lower_value(sc, k, y, m, budget);
  };
  const double split =
      detail::lower_value_rec(sc, 0, sc.x0, sc.m0, nodes, k_star, frontier_value);
  return std::abs(direct - split);
}

}  // namespace masschase
