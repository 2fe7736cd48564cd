#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include "masschase/core.hpp"
#include "masschase/fields.hpp"
#include "masschase/flow.hpp"

namespace masschase {

/// Uniform cell-centered grid density. Values are mass per unit volume at
/// cell centers, non-negative, with the outermost cell layer identically
/// zero so the represented function has compact support inside the grid.
template <std::size_t Dim>
class GridDensity {
 public:
  GridDensity(Vec<Dim> origin, Vec<Dim> spacing, std::array<int, Dim> extents,
              std::vector<double> values)
      : origin_(origin), spacing_(spacing), extents_(extents), values_(std::move(values)) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < Dim; ++i) {
      if (!(spacing_[i] > 0)) throw ConfigError("grid density: spacing must be > 0");
      if (extents_[i] < 3) throw ConfigError("grid density: needs at least 3 cells per axis");
      total *= std::size_t(extents_[i]);
    }
    if (values_.size() != total) throw ConfigError("grid density: value count does not match extents");
    for (double v : values_)
      if (!(v >= 0)) throw ConfigError("grid density: values must be non-negative");
    compute_support();
    for (std::size_t flat = 0; flat < values_.size(); ++flat) {
      if (values_[flat] == 0) continue;
      const auto idx = unflatten(flat);
      for (std::size_t i = 0; i < Dim; ++i)
        if (idx[i] == 0 || idx[i] == extents_[i] - 1)
          throw ConfigError("grid density: outermost cell layer must vanish");
    }
  }

  static GridDensity from_function(Vec<Dim> origin, Vec<Dim> spacing, std::array<int, Dim> extents,
                                   const std::function<double(const Vec<Dim>&)>& fn) {
    std::size_t total = 1;
    for (std::size_t i = 0; i < Dim; ++i) total *= std::size_t(extents[i]);
    std::vector<double> vals(total);
    for (std::size_t flat = 0; flat < total; ++flat) {
      std::size_t rem = flat;
      Vec<Dim> x;
      for (int i = int(Dim) - 1; i >= 0; --i) {
        const int idx = int(rem % std::size_t(extents[i]));
        rem /= std::size_t(extents[i]);
        x[i] = origin[i] + (idx + 0.5) * spacing[i];
      }
      vals[flat] = fn(x);
    }
    return GridDensity(origin, spacing, extents, std::move(vals));
  }

  const Vec<Dim>& origin() const { return origin_; }
  const Vec<Dim>& spacing() const { return spacing_; }
  const std::array<int, Dim>& extents() const { return extents_; }
  const std::vector<double>& values() const { return values_; }

  std::size_t flatten(const std::array<int, Dim>& idx) const {
    std::size_t flat = 0;
    for (std::size_t i = 0; i < Dim; ++i) flat = flat * std::size_t(extents_[i]) + std::size_t(idx[i]);
    return flat;
  }

  std::array<int, Dim> unflatten(std::size_t flat) const {
    std::array<int, Dim> idx{};
    for (int i = int(Dim) - 1; i >= 0; --i) {
      idx[i] = int(flat % std::size_t(extents_[i]));
      flat /= std::size_t(extents_[i]);
    }
    return idx;
  }

  double value_at(const std::array<int, Dim>& idx) const { return values_[flatten(idx)]; }

  Vec<Dim> cell_center(const std::array<int, Dim>& idx) const {
    Vec<Dim> x;
    for (std::size_t i = 0; i < Dim; ++i) x[i] = origin_[i] + (idx[i] + 0.5) * spacing_[i];
    return x;
  }

  double cell_volume() const {
    double v = 1;
    for (std::size_t i = 0; i < Dim; ++i) v *= spacing_[i];
    return v;
  }

  /// Full grid as a position box.
  Box<Dim> grid_box() const {
    Box<Dim> b;
    for (std::size_t i = 0; i < Dim; ++i) {
      b.lo[i] = origin_[i];
      b.hi[i] = origin_[i] + extents_[i] * spacing_[i];
    }
    return b;
  }

  bool empty_support() const { return empty_; }

  /// Tight bounding box of nonzero cells (full cell extents).
  const Box<Dim>& support_box() const { return support_box_; }
  const std::array<int, Dim>& support_lo() const { return support_lo_; }
  const std::array<int, Dim>& support_hi() const { return support_hi_; }

 private:
  void compute_support() {
    empty_ = true;
    for (std::size_t i = 0; i < Dim; ++i) {
      support_lo_[i] = extents_[i];
      support_hi_[i] = -1;
    }
    for (std::size_t flat = 0; flat < values_.size(); ++flat) {
      if (values_[flat] == 0) continue;
      empty_ = false;
      const auto idx = unflatten(flat);
      for (std::size_t i = 0; i < Dim; ++i) {
        support_lo_[i] = std::min(support_lo_[i], idx[i]);
        support_hi_[i] = std::max(support_hi_[i], idx[i]);
      }
    }
    if (empty_) {
      for (std::size_t i = 0; i < Dim; ++i) {
        support_lo_[i] = 0;
        support_hi_[i] = -1;
        support_box_.lo[i] = origin_[i];
        support_box_.hi[i] = origin_[i];
      }
      return;
    }
    for (std::size_t i = 0; i < Dim; ++i) {
      support_box_.lo[i] = origin_[i] + support_lo_[i] * spacing_[i];
      support_box_.hi[i] = origin_[i] + (support_hi_[i] + 1) * spacing_[i];
    }
  }

  Vec<Dim> origin_;
  Vec<Dim> spacing_;
  std::array<int, Dim> extents_;
  std::vector<double> values_;
  Box<Dim> support_box_{};
  std::array<int, Dim> support_lo_{};
  std::array<int, Dim> support_hi_{};
  bool empty_ = true;
};

/// Multilinear interpolation of cell-center values; zero outside the grid.
template <std::size_t Dim>
double sample_density(const GridDensity<Dim>& m, const Vec<Dim>& x) {
  std::array<int, Dim> base;
  std::array<double, Dim> frac;
  for (std::size_t i = 0; i < Dim; ++i) {
    const double u = (x[i] - m.origin()[i]) / m.spacing()[i] - 0.5;
    const double fl = std::floor(u);
    base[i] = int(fl);
    frac[i] = u - fl;
  }
  double acc = 0;
  for (int corner = 0; corner < (1 << Dim); ++corner) {
    double w = 1;
    std::array<int, Dim> idx;
    bool inside = true;
    for (std::size_t i = 0; i < Dim; ++i) {
      const int off = (corner >> i) & 1;
      idx[i] = base[i] + off;
      w *= off ? frac[i] : 1 - frac[i];
      if (idx[i] < 0 || idx[i] >= m.extents()[i]) inside = false;
    }
    if (inside && w != 0) acc += w * m.value_at(idx);
  }
  return acc;
}

/// Midpoint-rule integral h^d * sum of values.
template <std::size_t Dim>
double mass(const GridDensity<Dim>& m) {
  double s = 0;
  for (double v : m.values()) s += v;
  return s * m.cell_volume();
}

/// The discrete B-bar(box, M*dt): the box dilated by M*dt on every face.
template <std::size_t Dim>
Box<Dim> support_envelope(const Box<Dim>& box, double M, double dt) {
  if (M < 0 || dt < 0) throw ConfigError("support_envelope: M and dt must be >= 0");
  return box.dilated(M * dt);
}

struct NormReport {
  double l2 = 0;
  double h1 = 0;
  double w1inf = 0;
  double mass = 0;
};

namespace detail {
// Discrete norms of an arbitrary grid function laid out like a GridDensity:
// central-difference gradient, one-sided at grid edges.
template <std::size_t Dim>
NormReport norms_of_values(const GridDensity<Dim>& layout, const std::vector<double>& values) {
  NormReport r;
  const double vol = layout.cell_volume();
  double sum_sq = 0, sum_grad_sq = 0, sum_val = 0;
  double max_val = 0, max_grad = 0;
  const auto& n = layout.extents();
  for (std::size_t flat = 0; flat < values.size(); ++flat) {
    const double v = values[flat];
    sum_sq += v * v;
    sum_val += v;
    max_val = std::max(max_val, std::abs(v));
    const auto idx = layout.unflatten(flat);
    double grad_sq = 0;
    for (std::size_t axis = 0; axis < Dim; ++axis) {
      const double h = layout.spacing()[axis];
      auto up = idx, dn = idx;
      double g;
      if (idx[axis] == 0) {
        up[axis] = 1;
        g = (values[layout.flatten(up)] - v) / h;
      } else if (idx[axis] == n[axis] - 1) {
        dn[axis] = n[axis] - 2;
        g = (v - values[layout.flatten(dn)]) / h;
      } else {
        up[axis] += 1;
        dn[axis] -= 1;
        g = (values[layout.flatten(up)] - values[layout.flatten(dn)]) / (2 * h);
      }
      grad_sq += g * g;
    }
    sum_grad_sq += grad_sq;
    max_grad = std::max(max_grad, std::sqrt(grad_sq));
  }
  r.l2 = std::sqrt(sum_sq * vol);
  r.h1 = std::sqrt((sum_sq + sum_grad_sq) * vol);
  r.w1inf = std::max(max_val, max_grad);
  r.mass = sum_val * vol;
  return r;
}
}  // namespace detail

template <std::size_t Dim>
NormReport norms(const GridDensity<Dim>& m) {
  return detail::norms_of_values(m, m.values());
}

/// Norms of a - b for two densities on the same grid.
template <std::size_t Dim>
NormReport difference_norms(const GridDensity<Dim>& a, const GridDensity<Dim>& b) {
  if (a.extents() != b.extents() || a.origin() != b.origin() || a.spacing() != b.spacing())
    throw ConfigError("difference_norms: grids do not match");
  std::vector<double> diff(a.values().size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = a.values()[i] - b.values()[i];
  return detail::norms_of_values(a, diff);
}

namespace detail {
template <std::size_t Dim>
double schedule_sup_speed(const Schedule<Dim>& schedule) {
  double sup = 0;
  for (const auto& e : schedule.entries) sup = std::max(sup, field_bounds(e.field).sup_b);
  return sup;
}
}  // namespace detail

/// Pushforward of m0 from time t to s under the schedule: each target cell
/// traces its characteristic backward and divides the interpolated value by
/// the accumulated Jacobian determinant. Errors out if the dilated support
/// could leave the safe interior of the grid.
template <std::size_t Dim>
GridDensity<Dim> transport_density(const GridDensity<Dim>& m0, double t, double s,
                                   const Schedule<Dim>& schedule, const IntegratorConfig& cfg) {
  if (!(t <= s)) throw ConfigError("transport: requires t <= s");
  if (m0.empty_support())
    return m0;

  const double sup_b = detail::schedule_sup_speed(schedule);
  const Box<Dim> env = support_envelope(m0.support_box(), sup_b, s - t);
  const Box<Dim> grid = m0.grid_box();
  for (std::size_t i = 0; i < Dim; ++i) {
    const double h = m0.spacing()[i];
    if (env.lo[i] - h < grid.lo[i] + h || env.hi[i] + h > grid.hi[i] - h)
      throw DomainOverflowError(
          "transport: dilated support would reach the grid boundary; enlarge the grid");
  }

  std::vector<double> out(m0.values().size(), 0.0);
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    const auto idx = m0.unflatten(flat);
    const Vec<Dim> x = m0.cell_center(idx);
    const FlowSample<Dim> back = inverse_flow(x, t, s, schedule, cfg);
    const double v = sample_density(m0, back.position);
    if (v != 0) out[flat] = v * std::exp(-back.div_integral);
  }
  return GridDensity<Dim>(m0.origin(), m0.spacing(), m0.extents(), std::move(out));
}

/// Exact integral of the piecewise-constant grid function over [a, b] (1D).
inline double window_integral(const GridDensity<1>& m, double a, double b) {
  if (b <= a) return 0;
  const double h = m.spacing()[0];
  const double x0 = m.origin()[0];
  const int n = m.extents()[0];
  const int lo = std::max(0, int(std::floor((a - x0) / h)));
  const int hi = std::min(n - 1, int(std::floor((b - x0) / h)));
  double acc = 0;
  for (int i = lo; i <= hi; ++i) {
    const double cell_lo = x0 + i * h;
    const double cell_hi = cell_lo + h;
    const double overlap = std::min(b, cell_hi) - std::max(a, cell_lo);
    if (overlap > 0) acc += m.values()[std::size_t(i)] * overlap;
  }
  return acc;
}

/// Discrete first moment h * sum(xi_i * m_i) (1D).
inline double mean_position(const GridDensity<1>& m) {
  double acc = 0;
  const double h = m.spacing()[0];
  for (std::size_t i = 0; i < m.values().size(); ++i)
    acc += (m.origin()[0] + (double(i) + 0.5) * h) * m.values()[i];
  return acc * h;
}

}  // namespace masschase
