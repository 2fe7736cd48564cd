#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "masschase/core.hpp"

namespace masschase {

// Cubic smoothstep used for all compact-support blending. s is C^1 with
// Lipschitz derivative, so blended fields stay in W^{2,inf}.
inline double smoothstep(double u) {
  if (u <= 0) return 0;
  if (u >= 1) return 1;
  return u * u * (3 - 2 * u);
}
inline double smoothstep_d(double u) {
  if (u <= 0 || u >= 1) return 0;
  return 6 * u * (1 - u);
}
inline double smoothstep_dd(double u) {
  if (u <= 0 || u >= 1) return 0;
  return 6 - 12 * u;
}

namespace detail {
constexpr double kSmoothstepMaxD = 1.5;  // max |s'|
constexpr double kSmoothstepMaxDD = 6.0; // max |s''|

struct Blend1 {
  double value;
  double d1;
  double d2;
};

// One-axis plateau profile: 1 on [lo,hi], smoothstep decay to 0 over a
// margin of width w on both sides.
inline Blend1 axis_blend(double x, double lo, double hi, double w) {
  if (x <= lo - w || x >= hi + w) return {0, 0, 0};
  if (x < lo) {
    const double u = (x - (lo - w)) / w;
    return {smoothstep(u), smoothstep_d(u) / w, smoothstep_dd(u) / (w * w)};
  }
  if (x > hi) {
    const double u = ((hi + w) - x) / w;
    return {smoothstep(u), -smoothstep_d(u) / w, smoothstep_dd(u) / (w * w)};
  }
  return {1, 0, 0};
}
}  // namespace detail

enum class FieldKind { Constant, LinearWindow, ClampRamp };

/// Parametric admissible vector field. Constant and LinearWindow are blended
/// to zero outside `window` over a margin of width `margin`, which gives them
/// compact support. ClampRamp is the one-dimensional +c/-c profile acting on
/// axis 0: +c left of `ramp_left`, -c right of `ramp_right`, and either a
/// linear (smooth == 0) or cubic-smoothstep (smooth > 0) transition between.
template <std::size_t Dim>
struct FieldSpec {
  FieldKind kind = FieldKind::Constant;

  Vec<Dim> velocity{};    // Constant
  double growth_rate = 0; // LinearWindow
  Box<Dim> window{};      // Constant / LinearWindow active box
  double margin = 0;      // blend width

  double ramp_left = 0;   // ClampRamp
  double ramp_right = 0;
  double ramp_speed = 0;
  double ramp_smooth = 0;

  std::string label;

  static FieldSpec constant(const Vec<Dim>& v, const Box<Dim>& window, double margin,
                            std::string label = "constant") {
    validate_window(window, margin);
    FieldSpec f;
    f.kind = FieldKind::Constant;
    f.velocity = v;
    f.window = window;
    f.margin = margin;
    f.label = std::move(label);
    return f;
  }

  static FieldSpec linear_window(double lambda, const Box<Dim>& window, double margin,
                                 std::string label = "linear_window") {
    validate_window(window, margin);
    FieldSpec f;
    f.kind = FieldKind::LinearWindow;
    f.growth_rate = lambda;
    f.window = window;
    f.margin = margin;
    f.label = std::move(label);
    return f;
  }

  static FieldSpec clamp_ramp(double L, double R, double c, double smooth,
                              std::string label = "clamp_ramp") {
    if (!(L < R)) throw ConfigError("clamp_ramp: requires L < R");
    if (c < 0) throw ConfigError("clamp_ramp: speed must be >= 0");
    if (smooth < 0) throw ConfigError("clamp_ramp: smooth must be >= 0");
    FieldSpec f;
    f.kind = FieldKind::ClampRamp;
    f.ramp_left = L;
    f.ramp_right = R;
    f.ramp_speed = c;
    f.ramp_smooth = smooth;
    f.label = std::move(label);
    return f;
  }

 private:
  static void validate_window(const Box<Dim>& window, double margin) {
    if (!(margin > 0)) throw ConfigError("field window: margin must be > 0");
    for (std::size_t i = 0; i < Dim; ++i)
      if (!(window.lo[i] < window.hi[i])) throw ConfigError("field window: lo < hi required");
  }
};

template <std::size_t Dim>
using Mat = std::array<std::array<double, Dim>, Dim>;

namespace detail {
template <std::size_t Dim>
struct BlendEval {
  std::array<Blend1, Dim> axis;
  double chi;  // product of axis values

  double grad(std::size_t j) const {
    double g = axis[j].d1;
    for (std::size_t k = 0; k < Dim; ++k)
      if (k != j) g *= axis[k].value;
    return g;
  }

  double hess(std::size_t j, std::size_t k) const {
    if (j == k) {
      double h = axis[j].d2;
      for (std::size_t i = 0; i < Dim; ++i)
        if (i != j) h *= axis[i].value;
      return h;
    }
    double h = axis[j].d1 * axis[k].d1;
    for (std::size_t i = 0; i < Dim; ++i)
      if (i != j && i != k) h *= axis[i].value;
    return h;
  }
};

template <std::size_t Dim>
BlendEval<Dim> eval_blend(const FieldSpec<Dim>& f, const Vec<Dim>& x) {
  BlendEval<Dim> b;
  b.chi = 1;
  for (std::size_t i = 0; i < Dim; ++i) {
    b.axis[i] = axis_blend(x[i], f.window.lo[i], f.window.hi[i], f.margin);
    b.chi *= b.axis[i].value;
  }
  return b;
}

struct Ramp1 {
  double value;
  double d1;
};

template <std::size_t Dim>
Ramp1 eval_ramp(const FieldSpec<Dim>& f, double xi) {
  const double c = f.ramp_speed;
  const double L = f.ramp_left;
  const double R = f.ramp_right;
  if (xi <= L) return {c, 0};
  if (xi >= R) return {-c, 0};
  const double u = (xi - L) / (R - L);
  if (f.ramp_smooth > 0)
    return {c * (1 - 2 * smoothstep(u)), -2 * c * smoothstep_d(u) / (R - L)};
  return {c * (1 - 2 * u), -2 * c / (R - L)};
}
}  // namespace detail

/// b(x); fields are autonomous, the time argument exists for signature
/// symmetry with schedules.
template <std::size_t Dim>
Vec<Dim> field_eval(const FieldSpec<Dim>& f, const Vec<Dim>& x, double /*t*/ = 0) {
  switch (f.kind) {
    case FieldKind::Constant: {
      const auto b = detail::eval_blend(f, x);
      return vscale<Dim>(b.chi, f.velocity);
    }
    case FieldKind::LinearWindow: {
      const auto b = detail::eval_blend(f, x);
      return vscale<Dim>(f.growth_rate * b.chi, x);
    }
    case FieldKind::ClampRamp: {
      Vec<Dim> r{};
      r[0] = detail::eval_ramp(f, x[0]).value;
      return r;
    }
  }
  return {};
}

/// Exact spatial Jacobian of the variant at x.
template <std::size_t Dim>
Mat<Dim> field_jacobian(const FieldSpec<Dim>& f, const Vec<Dim>& x, double /*t*/ = 0) {
  Mat<Dim> J{};
  switch (f.kind) {
    case FieldKind::Constant: {
      const auto b = detail::eval_blend(f, x);
      for (std::size_t i = 0; i < Dim; ++i)
        for (std::size_t j = 0; j < Dim; ++j) J[i][j] = f.velocity[i] * b.grad(j);
      break;
    }
    case FieldKind::LinearWindow: {
      const auto b = detail::eval_blend(f, x);
      for (std::size_t i = 0; i < Dim; ++i)
        for (std::size_t j = 0; j < Dim; ++j)
          J[i][j] = f.growth_rate * ((i == j ? b.chi : 0.0) + x[i] * b.grad(j));
      break;
    }
    case FieldKind::ClampRamp:
      J[0][0] = detail::eval_ramp(f, x[0]).d1;
      break;
  }
  return J;
}

/// Exact divergence (trace of the Jacobian).
template <std::size_t Dim>
double field_div(const FieldSpec<Dim>& f, const Vec<Dim>& x, double /*t*/ = 0) {
  switch (f.kind) {
    case FieldKind::Constant: {
      const auto b = detail::eval_blend(f, x);
      double d = 0;
      for (std::size_t i = 0; i < Dim; ++i) d += f.velocity[i] * b.grad(i);
      return d;
    }
    case FieldKind::LinearWindow: {
      const auto b = detail::eval_blend(f, x);
      double d = Dim * b.chi;
      for (std::size_t i = 0; i < Dim; ++i) d += x[i] * b.grad(i);
      return f.growth_rate * d;
    }
    case FieldKind::ClampRamp:
      return detail::eval_ramp(f, x[0]).d1;
  }
  return 0;
}

/// Certified upper bounds for a field: sup |b|, sup |div b|, a Lipschitz
/// constant for div b, and the H^1 norm over support plus margins.
struct BoundsReport {
  double sup_b = 0;
  double sup_div = 0;
  double lip_div = 0;
  double h1_norm = 0;
};

namespace detail {

// Midpoint quadrature of |b|^2 + |Jb|_F^2 over the expanded window box.
template <std::size_t Dim>
double h1_norm_quadrature(const FieldSpec<Dim>& f) {
  const Box<Dim> box = f.window.dilated(f.margin);
  const int n = Dim == 1 ? 16384 : (Dim == 2 ? 512 : 64);
  std::array<double, Dim> h;
  long total = 1;
  for (std::size_t i = 0; i < Dim; ++i) {
    h[i] = box.extent(i) / n;
    total *= n;
  }
  double acc = 0;
  std::array<int, Dim> idx{};
  for (long cell = 0; cell < total; ++cell) {
    long rem = cell;
    Vec<Dim> x;
    for (std::size_t i = 0; i < Dim; ++i) {
      idx[i] = int(rem % n);
      rem /= n;
      x[i] = box.lo[i] + (idx[i] + 0.5) * h[i];
    }
    const Vec<Dim> b = field_eval(f, x);
    const Mat<Dim> J = field_jacobian(f, x);
    double val = dot<Dim>(b, b);
    for (std::size_t i = 0; i < Dim; ++i)
      for (std::size_t j = 0; j < Dim; ++j) val += J[i][j] * J[i][j];
    acc += val;
  }
  double volume_element = 1;
  for (std::size_t i = 0; i < Dim; ++i) volume_element *= h[i];
  return std::sqrt(acc * volume_element);
}

template <std::size_t Dim>
std::array<double, Dim> axis_abs_max(const Box<Dim>& window, double margin) {
  std::array<double, Dim> a;
  for (std::size_t i = 0; i < Dim; ++i)
    a[i] = std::max(std::abs(window.lo[i] - margin), std::abs(window.hi[i] + margin));
  return a;
}

}  // namespace detail

template <std::size_t Dim>
BoundsReport field_bounds(const FieldSpec<Dim>& f) {
  constexpr double S1 = detail::kSmoothstepMaxD;
  constexpr double S2 = detail::kSmoothstepMaxDD;
  BoundsReport r;
  switch (f.kind) {
    case FieldKind::Constant: {
      const double w = f.margin;
      r.sup_b = norm<Dim>(f.velocity);
      double sup_div = 0;
      double lip_sq = 0;
      for (std::size_t k = 0; k < Dim; ++k) {
        sup_div += std::abs(f.velocity[k]) * S1 / w;
        double dk = std::abs(f.velocity[k]) * S2 / (w * w);
        for (std::size_t i = 0; i < Dim; ++i)
          if (i != k) dk += std::abs(f.velocity[i]) * S1 * S1 / (w * w);
        lip_sq += dk * dk;
      }
      r.sup_div = sup_div;
      r.lip_div = std::sqrt(lip_sq);
      r.h1_norm = r.sup_b == 0 ? 0 : detail::h1_norm_quadrature(f);
      break;
    }
    case FieldKind::LinearWindow: {
      const double w = f.margin;
      const double lam = std::abs(f.growth_rate);
      const auto a = detail::axis_abs_max(f.window, f.margin);
      double a_norm_sq = 0, a_sum = 0;
      for (std::size_t i = 0; i < Dim; ++i) {
        a_norm_sq += a[i] * a[i];
        a_sum += a[i];
      }
      r.sup_b = lam * std::sqrt(a_norm_sq);
      r.sup_div = lam * (Dim + a_sum * S1 / w);
      double lip_sq = 0;
      for (std::size_t k = 0; k < Dim; ++k) {
        double dk = (Dim + 1) * S1 / w + a[k] * S2 / (w * w);
        for (std::size_t i = 0; i < Dim; ++i)
          if (i != k) dk += a[i] * S1 * S1 / (w * w);
        lip_sq += lam * dk * lam * dk;
      }
      r.lip_div = std::sqrt(lip_sq);
      r.h1_norm = lam == 0 ? 0 : detail::h1_norm_quadrature(f);
      break;
    }
    case FieldKind::ClampRamp: {
      const double len = f.ramp_right - f.ramp_left;
      r.sup_b = f.ramp_speed;
      if (f.ramp_smooth > 0) {
        r.sup_div = 2 * f.ramp_speed * S1 / len;
        r.lip_div = 2 * f.ramp_speed * S2 / (len * len);
      } else {
        r.sup_div = 2 * f.ramp_speed / len;
        r.lip_div = std::numeric_limits<double>::infinity();
      }
      r.h1_norm = std::numeric_limits<double>::infinity();
      break;
    }
  }
  return r;
}

/// Verdict of the membership test against the admissible-set bound M.
/// ClampRamp can never satisfy the strict test (it has no compact support),
/// but it is the optimal shape of the limiting problem, so it gets its own
/// verdict instead of a rejection.
struct Admissibility {
  enum class Status { Pass, AdmissibleInTheLimit, Fail };
  Status status = Status::Pass;
  std::vector<std::string> violations;

  bool admissible() const { return status != Status::Fail; }
};

template <std::size_t Dim>
Admissibility check_admissible(const FieldSpec<Dim>& f, double M) {
  if (!(M > 0)) throw ConfigError("check_admissible: M must be > 0");
  const BoundsReport b = field_bounds(f);
  Admissibility v;
  if (b.sup_b > M) v.violations.push_back("sup|b| <= M violated");
  if (f.kind == FieldKind::ClampRamp) {
    v.status = Admissibility::Status::AdmissibleInTheLimit;
    v.violations.push_back("||b||_{H1} <= M unattainable: support is unbounded");
    if (f.ramp_smooth <= 0) {
      v.violations.push_back("||div b||_{W1inf} <= M unattainable: div b not Lipschitz");
      if (b.sup_div > M) v.violations.push_back("sup|div b| <= M violated");
    } else if (b.sup_div + b.lip_div > M) {
      v.violations.push_back("||div b||_{W1inf} <= M violated");
    }
    return v;
  }
  if (b.h1_norm > M) v.violations.push_back("||b||_{H1} <= M violated");
  if (b.sup_div + b.lip_div > M) v.violations.push_back("||div b||_{W1inf} <= M violated");
  v.status = v.violations.empty() ? Admissibility::Status::Pass : Admissibility::Status::Fail;
  return v;
}

/// The ramp swing constraint: the transition from +c to -c must fit a slope
/// bound c1, i.e. R - L >= 2c/c1 for the linear profile.
template <std::size_t Dim>
bool ramp_fits_swing(const FieldSpec<Dim>& f, double c1) {
  if (f.kind != FieldKind::ClampRamp) return true;
  return field_bounds(f).sup_div <= c1;
}

/// Piecewise-constant-in-time assignment of fields, right-continuous.
template <std::size_t Dim>
struct Schedule {
  struct Entry {
    double time;
    FieldSpec<Dim> field;
  };
  std::vector<Entry> entries;

  static Schedule single(FieldSpec<Dim> field, double start = 0) {
    Schedule s;
    s.entries.push_back({start, std::move(field)});
    return s;
  }

  static Schedule piecewise(std::vector<Entry> entries) {
    if (entries.empty()) throw ConfigError("schedule: needs at least one entry");
    for (std::size_t i = 1; i < entries.size(); ++i)
      if (!(entries[i - 1].time < entries[i].time))
        throw ConfigError("schedule: times must be strictly increasing");
    Schedule s;
    s.entries = std::move(entries);
    return s;
  }

  double start_time() const { return entries.front().time; }

  bool covers(double t) const { return !entries.empty() && t >= start_time(); }

  const FieldSpec<Dim>& field_at(double t) const {
    if (!covers(t)) throw ConfigError("schedule: gap, no field defined at requested time");
    std::size_t i = entries.size();
    while (i > 1 && entries[i - 1].time > t) --i;
    return entries[i - 1].field;
  }

  // Interior switch times in the open interval (t, s), ascending.
  std::vector<double> switch_times_in(double t, double s) const {
    std::vector<double> out;
    for (const auto& e : entries)
      if (e.time > t && e.time < s) out.push_back(e.time);
    return out;
  }
};

/// Finite dictionary of player controls inside the box [-c, c]^Dim.
template <std::size_t Dim>
struct ControlSetA {
  double c = 0;
  std::vector<Vec<Dim>> dictionary;

  static ControlSetA make(double c, std::vector<Vec<Dim>> dict) {
    if (!(c >= 0)) throw ConfigError("control set: c must be >= 0");
    if (dict.empty()) throw ConfigError("control set: dictionary must be non-empty");
    for (const auto& a : dict)
      for (std::size_t i = 0; i < Dim; ++i)
        if (std::abs(a[i]) > c)
          throw ConfigError("control set: dictionary element outside [-c, c]^d");
    return ControlSetA{c, std::move(dict)};
  }
};

}  // namespace masschase
