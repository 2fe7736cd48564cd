#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "masschase/core.hpp"
#include "masschase/density.hpp"
#include "masschase/fields.hpp"
#include "masschase/game.hpp"

namespace masschase {

/// Knot values of the window extension functions. Piecewise linear between
/// uniform knots; h(T) = 0, non-negative, non-increasing.
struct HSchedule {
  std::vector<double> times;
  std::vector<double> h_left;
  std::vector<double> h_right;

  struct Eval {
    double h_left, h_right;
    double dh_left, dh_right;
  };

  static HSchedule make(std::vector<double> times, std::vector<double> h_left,
                        std::vector<double> h_right) {
    if (times.size() < 2 || times.size() != h_left.size() || times.size() != h_right.size())
      throw ConfigError("h-schedule: needs matching knot/value lists with >= 2 knots");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (!(times[k - 1] < times[k])) throw ConfigError("h-schedule: knots must increase");
    if (h_left.back() != 0 || h_right.back() != 0)
      throw ConfigError("h-schedule: final condition h(T) = 0 violated");
    for (std::size_t k = 0; k < times.size(); ++k)
      if (h_left[k] < 0 || h_right[k] < 0) throw ConfigError("h-schedule: h must be >= 0");
    for (std::size_t k = 1; k < times.size(); ++k)
      if (h_left[k] > h_left[k - 1] || h_right[k] > h_right[k - 1])
        throw ConfigError("h-schedule: h must be non-increasing in t");
    HSchedule h;
    h.times = std::move(times);
    h.h_left = std::move(h_left);
    h.h_right = std::move(h_right);
    return h;
  }

  Eval at(double t) const {
    const double eps = 1e-12 * (times.back() - times.front());
    if (t < times.front() - eps || t > times.back() + eps)
      throw ConfigError("h-schedule: time outside knot range");
    std::size_t k = 0;
    while (k + 2 < times.size() && times[k + 1] <= t) ++k;
    const double dt = times[k + 1] - times[k];
    const double u = std::clamp((t - times[k]) / dt, 0.0, 1.0);
    const double dl = (h_left[k + 1] - h_left[k]) / dt;
    const double dr = (h_right[k + 1] - h_right[k]) / dt;
    return {h_left[k] + u * (h_left[k + 1] - h_left[k]),
            h_right[k] + u * (h_right[k + 1] - h_right[k]), dl, dr};
  }
};

/// V(x,m,t) = integral of m over [x - r - h_l(t), x + r + h_r(t)].
struct WindowValue {
  double radius = 0;
  HSchedule schedule;
};

/// The non-increasing-density closed form: h_l = 0, h_r(t) = 2c(T - t).
struct MonotoneWindowValue {
  double radius = 0;
  double speed = 0;
  double horizon = 0;
};

/// V(x,m,t) = (x - first moment of m)^2, independent of t.
struct MeanSquareValue {};

using CandidateValue = std::variant<WindowValue, MonotoneWindowValue, MeanSquareValue>;

namespace detail {
inline void require_window_inside(const GridDensity<1>& m, double left, double right) {
  const auto box = m.grid_box();
  if (left < box.lo[0] || right > box.hi[0])
    throw DomainOverflowError("window value: integration window exits the grid");
}
}  // namespace detail

inline double value_window(const WindowValue& v, double x, const GridDensity<1>& m, double t) {
  const auto h = v.schedule.at(t);
  const double left = x - v.radius - h.h_left;
  const double right = x + v.radius + h.h_right;
  detail::require_window_inside(m, left, right);
  return window_integral(m, left, right);
}

inline double value_window(const MonotoneWindowValue& v, double x, const GridDensity<1>& m,
                           double t) {
  const double left = x - v.radius;
  const double right = x + v.radius + 2 * v.speed * (v.horizon - t);
  detail::require_window_inside(m, left, right);
  return window_integral(m, left, right);
}

inline double value_mean_square(double x, const GridDensity<1>& m) {
  const double gap = x - mean_position(m);
  return gap * gap;
}

inline double candidate_value(const CandidateValue& v, double x, const GridDensity<1>& m,
                              double t) {
  return std::visit(
      [&](const auto& vv) -> double {
        using T = std::decay_t<decltype(vv)>;
        if constexpr (std::is_same_v<T, MeanSquareValue>)
          return value_mean_square(x, m);
        else
          return value_window(vv, x, m, t);
      },
      v);
}

/// Exact derivatives of a candidate at a state: V_t, V_x, and D_mV as a grid
/// function (window characteristic or -z*xi).
struct CandidateDerivatives {
  double value = 0;
  double v_t = 0;
  double v_x = 0;
  std::vector<double> d_m;
  bool has_window = false;
  double left_edge = 0;
  double right_edge = 0;
  double z = 0;
};

inline CandidateDerivatives candidate_derivatives(const CandidateValue& v, double x,
                                                  const GridDensity<1>& m, double t) {
  CandidateDerivatives d;
  const double h = m.spacing()[0];
  const std::size_t n = m.values().size();
  if (std::holds_alternative<MeanSquareValue>(v)) {
    d.value = value_mean_square(x, m);
    d.z = 2 * (x - mean_position(m));
    d.v_t = 0;
    d.v_x = d.z;
    d.d_m.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      d.d_m[i] = -d.z * (m.origin()[0] + (double(i) + 0.5) * h);
    return d;
  }
  double left, right, dh_left, dh_right;
  if (const auto* w = std::get_if<WindowValue>(&v)) {
    const auto he = w->schedule.at(t);
    left = x - w->radius - he.h_left;
    right = x + w->radius + he.h_right;
    dh_left = he.dh_left;
    dh_right = he.dh_right;
  } else {
    const auto& w2 = std::get<MonotoneWindowValue>(v);
    left = x - w2.radius;
    right = x + w2.radius + 2 * w2.speed * (w2.horizon - t);
    dh_left = 0;
    dh_right = -2 * w2.speed;
  }
  detail::require_window_inside(m, left, right);
  const double m_left = sample_density(m, Vec<1>{left});
  const double m_right = sample_density(m, Vec<1>{right});
  d.value = window_integral(m, left, right);
  d.v_t = m_right * dh_right + m_left * dh_left;
  d.v_x = m_right - m_left;
  d.has_window = true;
  d.left_edge = left;
  d.right_edge = right;
  d.d_m.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = m.origin()[0] + (double(i) + 0.5) * h;
    if (xi >= left && xi <= right) d.d_m[i] = 1.0;
  }
  return d;
}

/// Discrete L^2 pairing <q, div(b m)> = h * sum q * (b dm + m div b), with
/// central-difference dm (one-sided at the grid edges).
inline double coupling_term(std::span<const double> q, const FieldSpec<1>& field,
                            const GridDensity<1>& m) {
  const std::size_t n = m.values().size();
  if (q.size() != n) throw ConfigError("coupling term: grid mismatch between q and m");
  const double h = m.spacing()[0];
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double dm;
    if (i == 0)
      dm = (m.values()[1] - m.values()[0]) / h;
    else if (i == n - 1)
      dm = (m.values()[n - 1] - m.values()[n - 2]) / h;
    else
      dm = (m.values()[i + 1] - m.values()[i - 1]) / (2 * h);
    const Vec<1> x{m.origin()[0] + (double(i) + 0.5) * h};
    const double b = field_eval(field, x)[0];
    const double db = field_div(field, x);
    acc += q[i] * (b * dm + m.values()[i] * db);
  }
  return acc * h;
}

/// Exact boundary form of the pairing when q is the characteristic function
/// of [left, right]: b(right) m(right) - b(left) m(left).
inline double coupling_term_window(double left, double right, const FieldSpec<1>& field,
                                   const GridDensity<1>& m) {
  const double m_left = sample_density(m, Vec<1>{left});
  const double m_right = sample_density(m, Vec<1>{right});
  const double b_left = field_eval(field, Vec<1>{left})[0];
  const double b_right = field_eval(field, Vec<1>{right})[0];
  return b_right * m_right - b_left * m_left;
}

struct HamiltonianResult {
  double value = 0;
  int argmin_field = -1;
  int argmax_control = -1;
};

/// min over dictB of max over dictA of {-f(x,a) p + <q, div(b m)> - l};
/// first dictionary index wins ties.
inline HamiltonianResult hamiltonian(double x, const GridDensity<1>& m, double t, double p,
                                     std::span<const double> q, const ControlSetA<1>& dictA,
                                     std::span<const FieldSpec<1>> dictB, const CostSpec& cost,
                                     const PlayerDynamics& dyn) {
  if (dictA.dictionary.empty() || dictB.empty())
    throw ConfigError("hamiltonian: dictionaries must be non-empty");
  const double stage = cost.running_at(x, m, t);
  const double g = dyn.drift ? field_eval(*dyn.drift, Vec<1>{x})[0] : 0.0;
  HamiltonianResult out;
  double outer = std::numeric_limits<double>::infinity();
  for (std::size_t bi = 0; bi < dictB.size(); ++bi) {
    const double pairing = coupling_term(q, dictB[bi], m);
    double inner = -std::numeric_limits<double>::infinity();
    int inner_arg = -1;
    for (std::size_t ai = 0; ai < dictA.dictionary.size(); ++ai) {
      const double f = g + dictA.dictionary[ai][0];
      const double val = -f * p + pairing - stage;
      if (val > inner) {
        inner = val;
        inner_arg = int(ai);
      }
    }
    if (inner < outer) {
      outer = inner;
      out.argmin_field = int(bi);
      out.argmax_control = inner_arg;
    }
  }
  out.value = outer;
  return out;
}

struct ResidualReport {
  double residual = 0;
  double time_term = 0;    // -V_t
  double player_term = 0;  // sup_{|a| <= c} {-a V_x}
  double mass_term = 0;    // inf over the mass's fields of the pairing
  std::string state;
};

enum class InfMode { Analytic, Dictionary };

/// Residual of the Isaacs equation for an analytic candidate at one state.
/// Analytic mode evaluates the closed-form inf over the full admissible set
/// (the exact boundary form for window candidates, -c |z| mass for the
/// mean-square candidate); dictionary mode takes the finite inf over dictB,
/// which can only over-estimate the true inf.
inline ResidualReport hji_residual(const CandidateValue& v, double x, const GridDensity<1>& m,
                                   double t, double speed, InfMode mode,
                                   std::span<const FieldSpec<1>> dictB = {}) {
  const CandidateDerivatives d = candidate_derivatives(v, x, m, t);
  ResidualReport r;
  r.time_term = -d.v_t;
  r.player_term = speed * std::abs(d.v_x);
  if (mode == InfMode::Analytic) {
    if (d.has_window) {
      const double m_left = sample_density(m, Vec<1>{d.left_edge});
      const double m_right = sample_density(m, Vec<1>{d.right_edge});
      r.mass_term = -speed * (m_right + m_left);
    } else {
      r.mass_term = -speed * std::abs(d.z) * mass(m);
    }
  } else {
    if (dictB.empty()) throw ConfigError("hji residual: dictionary mode needs a field dictionary");
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : dictB) best = std::min(best, coupling_term(d.d_m, b, m));
    r.mass_term = best;
  }
  r.residual = r.time_term + r.player_term + r.mass_term;
  char buf[96];
  std::snprintf(buf, sizeof buf, "x=%.6g t=%.6g", x, t);
  r.state = buf;
  return r;
}

/// Backward Euler for the window-extension ODE system from h(T) = 0. The
/// Heaviside tie at equal edge densities is frozen to (h_l', h_r') = (0, -2c),
/// so a schedule always comes back; h_l' h_r' = 0 and h_l' + h_r' = -2c hold
/// at every knot by construction.
inline HSchedule solve_h_ode(const GridDensity<1>& m, double x, double r, double c, double T,
                             int steps) {
  if (steps < 1) throw ConfigError("h-ode: steps must be >= 1");
  if (!(T > 0)) throw ConfigError("h-ode: horizon must be > 0");
  const double dt = T / steps;
  std::vector<double> times(std::size_t(steps) + 1);
  for (int k = 0; k <= steps; ++k) times[std::size_t(k)] = k * dt;
  std::vector<double> hl(std::size_t(steps) + 1, 0.0), hr(std::size_t(steps) + 1, 0.0);
  const auto box = m.grid_box();
  for (int k = steps - 1; k >= 0; --k) {
    const std::size_t ku = std::size_t(k);
    const double left = x - r - hl[ku + 1];
    const double right = x + r + hr[ku + 1];
    if (left < box.lo[0] || right > box.hi[0])
      throw DomainOverflowError("h-ode: window exits the grid");
    const double delta = sample_density(m, Vec<1>{right}) - sample_density(m, Vec<1>{left});
    if (delta > 0) {
      hl[ku] = hl[ku + 1] + 2 * c * dt;
      hr[ku] = hr[ku + 1];
    } else {
      hl[ku] = hl[ku + 1];
      hr[ku] = hr[ku + 1] + 2 * c * dt;
    }
  }
  if (x - r - hl[0] < box.lo[0] || x + r + hr[0] > box.hi[0])
    throw DomainOverflowError("h-ode: window exits the grid");
  return HSchedule::make(std::move(times), std::move(hl), std::move(hr));
}

/// The optimal mass field of the static viewpoint: +c left of the window,
/// -c right of it, ramp across.
inline FieldSpec<1> optimal_mass_field(double x, double r, double h_l, double h_r, double c,
                                       double smooth) {
  return FieldSpec<1>::clamp_ramp(x - r - h_l, x + r + h_r, c, smooth, "track_window");
}

/// Per-step ramp fields tracking the player's window along a known path.
/// Each step's frozen ramp is anchored at the step midpoint, which cancels
/// the first-order edge leakage of freezing a moving window.
inline Schedule<1> track_window_schedule(const HSchedule& h, std::span<const double> times,
                                         std::span<const double> player_positions, double r,
                                         double c, double smooth) {
  if (times.size() != player_positions.size() || times.size() < 2)
    throw ConfigError("track-window schedule: path and times must match");
  std::vector<typename Schedule<1>::Entry> entries;
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double t_mid = 0.5 * (times[k] + times[k + 1]);
    const double y_mid = 0.5 * (player_positions[k] + player_positions[k + 1]);
    const auto he = h.at(t_mid);
    entries.push_back({times[k], optimal_mass_field(y_mid, r, he.h_left, he.h_right, c, smooth)});
  }
  return Schedule<1>::piecewise(std::move(entries));
}

}  // namespace masschase
