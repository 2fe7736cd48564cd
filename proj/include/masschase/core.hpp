#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace masschase {

template <std::size_t Dim>
using Vec = std::array<double, Dim>;

template <std::size_t Dim>
inline Vec<Dim> vadd(const Vec<Dim>& a, const Vec<Dim>& b) {
  Vec<Dim> r;
  for (std::size_t i = 0; i < Dim; ++i) r[i] = a[i] + b[i];
  return r;
}

template <std::size_t Dim>
inline Vec<Dim> vaxpy(const Vec<Dim>& a, double s, const Vec<Dim>& b) {
  Vec<Dim> r;
  for (std::size_t i = 0; i < Dim; ++i) r[i] = a[i] + s * b[i];
  return r;
}

template <std::size_t Dim>
inline Vec<Dim> vscale(double s, const Vec<Dim>& a) {
  Vec<Dim> r;
  for (std::size_t i = 0; i < Dim; ++i) r[i] = s * a[i];
  return r;
}

template <std::size_t Dim>
inline double dot(const Vec<Dim>& a, const Vec<Dim>& b) {
  double s = 0;
  for (std::size_t i = 0; i < Dim; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t Dim>
inline double norm(const Vec<Dim>& a) {
  return std::sqrt(dot<Dim>(a, a));
}

template <std::size_t Dim>
inline Vec<Dim> filled(double v) {
  Vec<Dim> r;
  r.fill(v);
  return r;
}

/// Axis-aligned box, lo <= hi per axis.
template <std::size_t Dim>
struct Box {
  Vec<Dim> lo{};
  Vec<Dim> hi{};

  bool contains(const Vec<Dim>& x) const {
    for (std::size_t i = 0; i < Dim; ++i)
      if (x[i] < lo[i] || x[i] > hi[i]) return false;
    return true;
  }

  bool contains(const Box& other) const {
    for (std::size_t i = 0; i < Dim; ++i)
      if (other.lo[i] < lo[i] || other.hi[i] > hi[i]) return false;
    return true;
  }

  Box dilated(double margin) const {
    Box b = *this;
    for (std::size_t i = 0; i < Dim; ++i) {
      b.lo[i] -= margin;
      b.hi[i] += margin;
    }
    return b;
  }

  double extent(int axis) const { return hi[axis] - lo[axis]; }
};

// Error taxonomy shared across modules; the CLI maps these to exit codes.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct DomainOverflowError : std::runtime_error {
  explicit DomainOverflowError(const std::string& what) : std::runtime_error(what) {}
};

struct BudgetError : std::runtime_error {
  explicit BudgetError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace masschase
