#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "masschase/core.hpp"
#include "masschase/fields.hpp"

namespace masschase {

/// Arrival point of the characteristics ODE plus the accumulated divergence
/// integral along the trajectory; exp(div_integral) is det J Phi.
template <std::size_t Dim>
struct FlowSample {
  Vec<Dim> position{};
  double div_integral = 0;
};

struct IntegratorConfig {
  double substep = 1e-3;

  static IntegratorConfig for_horizon(double T) { return {1e-3 * T}; }
};

namespace detail {

// One RK4 step of the augmented state (y, I), I' = div b(y). The divergence
// integral shares the position update's quadrature nodes (Simpson weights),
// which keeps the realized det J Phi consistent with the realized flow.
template <std::size_t Dim>
void rk4_step(const FieldSpec<Dim>& field, double h, Vec<Dim>& y, double& integral) {
  const Vec<Dim> k1 = field_eval(field, y);
  const double d1 = field_div(field, y);
  const Vec<Dim> y2 = vaxpy<Dim>(y, h / 2, k1);
  const Vec<Dim> k2 = field_eval(field, y2);
  const double d2 = field_div(field, y2);
  const Vec<Dim> y3 = vaxpy<Dim>(y, h / 2, k2);
  const Vec<Dim> k3 = field_eval(field, y3);
  const double d3 = field_div(field, y3);
  const Vec<Dim> y4 = vaxpy<Dim>(y, h, k3);
  const Vec<Dim> k4 = field_eval(field, y4);
  const double d4 = field_div(field, y4);
  for (std::size_t i = 0; i < Dim; ++i)
    y[i] += h / 6 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  integral += h / 6 * (d1 + 2 * d2 + 2 * d3 + d4);
}

// Integrate over [t, s] (or [s, t] backward when reverse) with substeps that
// never straddle a schedule switch, so the piecewise-constant field stays
// smooth within every RK4 step.
template <std::size_t Dim>
FlowSample<Dim> integrate(const Vec<Dim>& x, double t, double s, const Schedule<Dim>& schedule,
                          const IntegratorConfig& cfg, bool reverse) {
  if (!(t <= s)) throw ConfigError("flow: requires t <= s");
  if (!schedule.covers(t)) throw ConfigError("flow: schedule gap on requested interval");
  if (!(cfg.substep > 0)) throw ConfigError("flow: substep must be > 0");

  std::vector<double> knots;
  knots.push_back(t);
  for (double sw : schedule.switch_times_in(t, s)) knots.push_back(sw);
  knots.push_back(s);

  FlowSample<Dim> out{x, 0};
  if (s == t) return out;

  const int n_seg = int(knots.size()) - 1;
  for (int seg_idx = 0; seg_idx < n_seg; ++seg_idx) {
    const int seg = reverse ? n_seg - 1 - seg_idx : seg_idx;
    const double a = knots[seg];
    const double b = knots[seg + 1];
    const FieldSpec<Dim>& field = schedule.field_at(a);
    const double len = b - a;
    if (len <= 0) continue;
    const int n = std::max(1, int(std::ceil(len / cfg.substep - 1e-12)));
    const double h = (reverse ? -len : len) / n;
    for (int i = 0; i < n; ++i) rk4_step(field, h, out.position, out.div_integral);
  }
  if (reverse) out.div_integral = -out.div_integral;
  return out;
}

}  // namespace detail

/// Phi(x, t, s) with the divergence integral accumulated along the forward
/// trajectory.
template <std::size_t Dim>
FlowSample<Dim> integrate_flow(const Vec<Dim>& x, double t, double s,
                               const Schedule<Dim>& schedule, const IntegratorConfig& cfg) {
  return detail::integrate(x, t, s, schedule, cfg, false);
}

/// Phi^{-1}(x, t, s): the point y with Phi(y, t, s) = x, computed by
/// integrating the time-reversed field from s down to t. The reported
/// div_integral is the forward one along the same path, so that
/// det J Phi(y, t, s) = exp(div_integral).
template <std::size_t Dim>
FlowSample<Dim> inverse_flow(const Vec<Dim>& x, double t, double s,
                             const Schedule<Dim>& schedule, const IntegratorConfig& cfg) {
  return detail::integrate(x, t, s, schedule, cfg, true);
}

template <std::size_t Dim>
double jacobian_det(const Vec<Dim>& x, double t, double s, const Schedule<Dim>& schedule,
                    const IntegratorConfig& cfg) {
  return std::exp(integrate_flow(x, t, s, schedule, cfg).div_integral);
}

template <std::size_t Dim>
std::vector<FlowSample<Dim>> integrate_flow_batch(std::span<const Vec<Dim>> seeds, double t,
                                                  double s, const Schedule<Dim>& schedule,
                                                  const IntegratorConfig& cfg) {
  std::vector<FlowSample<Dim>> out;
  out.reserve(seeds.size());
  for (const auto& x : seeds) out.push_back(integrate_flow(x, t, s, schedule, cfg));
  return out;
}

template <std::size_t Dim>
std::vector<FlowSample<Dim>> inverse_flow_batch(std::span<const Vec<Dim>> seeds, double t,
                                                double s, const Schedule<Dim>& schedule,
                                                const IntegratorConfig& cfg) {
  std::vector<FlowSample<Dim>> out;
  out.reserve(seeds.size());
  for (const auto& x : seeds) out.push_back(inverse_flow(x, t, s, schedule, cfg));
  return out;
}

/// Measured surrogates for the constants the stability estimates need:
/// M_tilde encloses the bounds for the spatial derivative of div b and of the
/// flow maps, L_phi_inv is the Lipschitz constant of Phi^{-1} in x. Measured
/// by finite differences over a sample box; not proof-backed constants.
struct FlowConstants {
  double m_tilde = 0;
  double l_phi_inv = 0;
  double sup_dphi = 0;
  double sup_dphi_inv = 0;
  double lip_div = 0;
};

template <std::size_t Dim>
FlowConstants measure_flow_constants(const Schedule<Dim>& schedule, const Box<Dim>& box,
                                     double t, double s, const IntegratorConfig& cfg,
                                     int samples_per_axis = 33, double fd_step = 1e-5) {
  FlowConstants out;
  for (const auto& entry : schedule.entries) out.lip_div = std::max(out.lip_div, field_bounds(entry.field).lip_div);

  long total = 1;
  for (std::size_t i = 0; i < Dim; ++i) total *= samples_per_axis;
  for (long cell = 0; cell < total; ++cell) {
    long rem = cell;
    Vec<Dim> x;
    for (std::size_t i = 0; i < Dim; ++i) {
      const int idx = int(rem % samples_per_axis);
      rem /= samples_per_axis;
      x[i] = box.lo[i] + (idx + 0.5) * box.extent(i) / samples_per_axis;
    }
    for (std::size_t axis = 0; axis < Dim; ++axis) {
      Vec<Dim> xp = x;
      xp[axis] += fd_step;
      const auto fwd = integrate_flow(x, t, s, schedule, cfg);
      const auto fwd_p = integrate_flow(xp, t, s, schedule, cfg);
      const auto inv = inverse_flow(x, t, s, schedule, cfg);
      const auto inv_p = inverse_flow(xp, t, s, schedule, cfg);
      Vec<Dim> dfwd, dinv;
      for (std::size_t i = 0; i < Dim; ++i) {
        dfwd[i] = (fwd_p.position[i] - fwd.position[i]) / fd_step;
        dinv[i] = (inv_p.position[i] - inv.position[i]) / fd_step;
      }
      out.sup_dphi = std::max(out.sup_dphi, norm<Dim>(dfwd));
      out.sup_dphi_inv = std::max(out.sup_dphi_inv, norm<Dim>(dinv));
    }
  }
  out.l_phi_inv = out.sup_dphi_inv;
  out.m_tilde = std::max({out.lip_div, out.sup_dphi, out.sup_dphi_inv});
  return out;
}

}  // namespace masschase
