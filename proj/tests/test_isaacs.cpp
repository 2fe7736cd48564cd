#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "masschase/isaacs.hpp"

using namespace masschase;
using Catch::Approx;

namespace {

GridDensity<1> unit_hat(int cells = 2048, double origin = -2.0, double span = 4.0) {
  auto m = GridDensity<1>::from_function({origin}, {span / cells}, {cells}, [](const Vec<1>& x) {
    return std::max(0.0, 1.0 - std::abs(x[0]));
  });
  std::vector<double> vals = m.values();
  const double total = mass(m);
  for (auto& v : vals) v /= total;
  return GridDensity<1>(m.origin(), m.spacing(), m.extents(), std::move(vals));
}

// Strictly decreasing over its positive part, with the rise tucked far left.
GridDensity<1> decreasing_density(int cells) {
  return GridDensity<1>::from_function({-5.5}, {12.0 / cells}, {cells}, [](const Vec<1>& x) {
    if (x[0] <= -4.0 || x[0] >= 4.8) return 0.0;
    if (x[0] <= -3.2) return (x[0] + 4.0) / 0.8;
    return (4.8 - x[0]) / 8.0;
  });
}

FieldSpec<1> wide_constant(double v) {
  return FieldSpec<1>::constant({v}, Box<1>{{-6.0}, {7.0}}, 1.0);
}

}  // namespace

TEST_CASE("h-schedule construction and evaluation") {
  auto h = HSchedule::make({0.0, 0.5, 1.0}, {0.0, 0.0, 0.0}, {2.0, 1.0, 0.0});
  const auto e = h.at(0.25);
  REQUIRE(e.h_right == Approx(1.5));
  REQUIRE(e.dh_right == Approx(-2.0));
  REQUIRE(e.h_left == 0.0);
  REQUIRE_THROWS_AS(h.at(1.5), ConfigError);
  REQUIRE_THROWS_AS(HSchedule::make({0.0, 1.0}, {0.0, 0.1}, {0.0, 0.0}), ConfigError);
  REQUIRE_THROWS_AS(HSchedule::make({0.0, 1.0}, {0.0, 0.0}, {-1.0, 0.0}), ConfigError);
  REQUIRE_THROWS_AS(HSchedule::make({0.0, 0.5, 1.0}, {0.0, 0.0, 0.0}, {0.1, 0.2, 0.0}),
                    ConfigError);
}

TEST_CASE("coupling term") {
  const auto m = unit_hat();
  SECTION("constant q over a divergence-free region integrates to zero") {
    std::vector<double> q(m.values().size(), 3.0);
    REQUIRE(coupling_term(q, wide_constant(-0.5), m) == Approx(0.0).margin(1e-10));
  }
  SECTION("varying field: still a total divergence") {
    std::vector<double> q(m.values().size(), 1.0);
    const auto lin = FieldSpec<1>::linear_window(0.3, Box<1>{{-1.5}, {1.5}}, 0.4);
    REQUIRE(coupling_term(q, lin, m) == Approx(0.0).margin(1e-5));
  }
  SECTION("q = -z xi against a constant -c field gives -zc") {
    const double z = 1.4, c = 0.5;
    std::vector<double> q(m.values().size());
    for (std::size_t i = 0; i < q.size(); ++i)
      q[i] = -z * (m.origin()[0] + (double(i) + 0.5) * m.spacing()[0]);
    REQUIRE(coupling_term(q, wide_constant(-c), m) == Approx(-z * c).margin(1e-12));
  }
  SECTION("grid mismatch is rejected") {
    std::vector<double> q(7, 0.0);
    REQUIRE_THROWS_AS(coupling_term(q, wide_constant(0.1), m), ConfigError);
  }
}

TEST_CASE("boundary-mode coupling matches the edge formula") {
  const auto m = decreasing_density(2048);
  const double x = 0.0, r = 0.5, c = 1.0, hr = 1.2;
  const auto ramp = optimal_mass_field(x, r, 0.0, hr, c, 0.0);
  const double left = x - r, right = x + r + hr;
  const double got = coupling_term_window(left, right, ramp, m);
  const double expect =
      -c * (sample_density(m, Vec<1>{right}) + sample_density(m, Vec<1>{left}));
  REQUIRE(got == Approx(expect).margin(1e-15));
}

TEST_CASE("hamiltonian assembly") {
  const auto m = unit_hat();
  const PlayerDynamics dyn{1.0, std::nullopt};
  const CostSpec mayer{{RunningCost::Kind::Zero, 0}, {TerminalCost::Kind::SquaredMeanDistance, 0}};
  std::vector<double> zero_q(m.values().size(), 0.0);
  SECTION("degenerate dictionaries give zero") {
    const auto dictA = ControlSetA<1>::make(1.0, {{0.0}});
    const std::vector<FieldSpec<1>> dictB{wide_constant(0.0)};
    const auto h = hamiltonian(0.3, m, 0.0, 2.0, zero_q, dictA, dictB, mayer, dyn);
    REQUIRE(h.value == Approx(0.0).margin(1e-14));
  }
  SECTION("linear term maximizes at the opposing box corner") {
    const auto dictA = ControlSetA<1>::make(1.0, {{-1.0}, {1.0}});
    const std::vector<FieldSpec<1>> dictB{wide_constant(0.0)};
    const double z = 0.7;
    const auto h = hamiltonian(0.0, m, 0.0, z, zero_q, dictA, dictB, mayer, dyn);
    REQUIRE(h.value == Approx(z).margin(1e-14));  // max_a {-a z} = c z at a = -c
    REQUIRE(h.argmax_control == 0);
    // Ties break on the first dictionary index.
    const auto tie = hamiltonian(0.0, m, 0.0, 0.0, zero_q, dictA, dictB, mayer, dyn);
    REQUIRE(tie.argmax_control == 0);
    REQUIRE(tie.argmin_field == 0);
  }
  SECTION("mean-square assembly cancels at both control extremes") {
    const double c = 0.5;
    const auto dictA = ControlSetA<1>::make(c, {{-c}, {c}});
    const std::vector<FieldSpec<1>> dictB{wide_constant(-c), wide_constant(c)};
    const double x = 1.0;
    const double z = 2 * (x - mean_position(m));
    std::vector<double> q(m.values().size());
    for (std::size_t i = 0; i < q.size(); ++i)
      q[i] = -z * (m.origin()[0] + (double(i) + 0.5) * m.spacing()[0]);
    const PlayerDynamics slow{c, std::nullopt};
    const auto h = hamiltonian(x, m, 0.0, z, q, dictA, dictB, mayer, slow);
    REQUIRE(h.value == Approx(0.0).margin(1e-9));  // zc - zc
  }
}

TEST_CASE("mean-square candidate solves the Isaacs equation exactly") {
  std::mt19937 rng(20240817);
  std::uniform_real_distribution<double> spread(0.2, 1.8), tdist(0.0, 1.0), sdist(0.4, 1.1);
  const CandidateValue v{MeanSquareValue{}};
  int positives = 0, negatives = 0;
  for (int k = 0; k < 20; ++k) {
    const int cells = 512 + 256 * (k % 3);
    auto base = GridDensity<1>::from_function(
        {-2.0}, {4.0 / cells}, {cells}, [&, s = sdist(rng)](const Vec<1>& x) {
          const double u = x[0] / s;
          return std::abs(x[0]) < 1.6 ? std::exp(-0.5 * u * u) : 0.0;
        });
    std::vector<double> vals = base.values();
    const double total = mass(base);
    for (auto& val : vals) val /= total;
    const GridDensity<1> m(base.origin(), base.spacing(), base.extents(), std::move(vals));
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    const double x = mean_position(m) + sign * spread(rng);
    (sign > 0 ? positives : negatives)++;
    const auto rep = hji_residual(v, x, m, tdist(rng), 0.5, InfMode::Analytic);
    REQUIRE(std::abs(rep.residual) <= 1e-12);
    REQUIRE(rep.residual == rep.time_term + rep.player_term + rep.mass_term);
  }
  REQUIRE(positives > 0);
  REQUIRE(negatives > 0);
}

TEST_CASE("dictionary residual dominates the analytic one") {
  const auto m = unit_hat();
  const CandidateValue v{MeanSquareValue{}};
  const std::vector<FieldSpec<1>> full{wide_constant(-0.5), wide_constant(0.0),
                                       wide_constant(0.5)};
  const std::vector<FieldSpec<1>> missing{wide_constant(0.0), wide_constant(0.25)};
  for (double x : {1.0, -0.7, 2.0}) {
    const auto analytic = hji_residual(v, x, m, 0.3, 0.5, InfMode::Analytic);
    const auto with_full = hji_residual(v, x, m, 0.3, 0.5, InfMode::Dictionary, full);
    const auto with_missing = hji_residual(v, x, m, 0.3, 0.5, InfMode::Dictionary, missing);
    REQUIRE(with_full.residual >= analytic.residual - 1e-12);
    REQUIRE(with_missing.residual >= with_full.residual - 1e-12);
  }
  REQUIRE_THROWS_AS(hji_residual(v, 1.0, m, 0.3, 0.5, InfMode::Dictionary), ConfigError);
}

TEST_CASE("monotone window candidate has a first-order residual") {
  const double r = 0.5, c = 1.0, T = 1.0;
  const CandidateValue v{MonotoneWindowValue{r, c, T}};
  std::vector<double> worst_by_level;
  for (int cells : {2048, 4096}) {
    const auto m = decreasing_density(cells);
    double worst = 0;
    for (double x : {0.0, 0.2}) {
      for (double t : {0.0, 0.25, 0.5, 0.75}) {
        std::vector<FieldSpec<1>> dict{
            optimal_mass_field(x, r, 0.0, 2 * c * (T - t), c, 0.0), wide_constant(c),
            wide_constant(-c), wide_constant(0.0)};
        const auto rep = hji_residual(v, x, m, t, c, InfMode::Dictionary, dict);
        worst = std::max(worst, std::abs(rep.residual));
      }
    }
    worst_by_level.push_back(worst);
  }
  const double w1inf = norms(decreasing_density(2048)).w1inf;
  REQUIRE(worst_by_level[0] <= 0.02 * w1inf);
  REQUIRE(worst_by_level[1] <= 0.6 * worst_by_level[0]);  // roughly halves with h
}

TEST_CASE("solve_h_ode") {
  const double c = 1.0, T = 1.0;
  SECTION("non-increasing density: right edge sweeps, left edge stays") {
    const auto m = decreasing_density(2048);
    const auto h = solve_h_ode(m, 0.0, 0.5, c, T, 16);
    for (std::size_t k = 0; k < h.times.size(); ++k) {
      REQUIRE(h.h_left[k] == 0.0);
      REQUIRE(h.h_right[k] == 2 * c * (T - h.times[k]));
    }
  }
  SECTION("mirrored density flips the roles") {
    const auto m = GridDensity<1>::from_function({-6.5}, {12.0 / 2048}, {2048},
                                                 [](const Vec<1>& x) {
                                                   if (x[0] >= 4.0 || x[0] <= -4.8) return 0.0;
                                                   if (x[0] >= 3.2) return (4.0 - x[0]) / 0.8;
                                                   return (x[0] + 4.8) / 8.0;
                                                 });
    const auto h = solve_h_ode(m, 0.0, 0.5, c, T, 16);
    for (std::size_t k = 0; k < h.times.size(); ++k) {
      REQUIRE(h.h_right[k] == 0.0);
      REQUIRE(h.h_left[k] == 2 * c * (T - h.times[k]));
    }
  }
  SECTION("flat ties break toward the right edge") {
    std::vector<double> vals(256, 0.0);
    for (int i = 8; i < 248; ++i) vals[std::size_t(i)] = 1.0;
    const GridDensity<1> m({-8.0}, {16.0 / 256}, {256}, vals);
    const auto h = solve_h_ode(m, 0.0, 0.5, c, T, 8);
    REQUIRE(h.h_left.front() == 0.0);
    REQUIRE(h.h_right.front() == 2 * c * T);
  }
  SECTION("final condition") {
    const auto h = solve_h_ode(decreasing_density(512), 0.0, 0.5, c, T, 1);
    REQUIRE(h.h_left.back() == 0.0);
    REQUIRE(h.h_right.back() == 0.0);
  }
  SECTION("affine constraint holds at every knot") {
    const auto h = solve_h_ode(unit_hat(), 0.0, 0.25, 0.5, 1.0, 16);
    for (std::size_t k = 0; k < h.times.size(); ++k)
      REQUIRE(h.h_left[k] + h.h_right[k] ==
              Approx(2 * 0.5 * (1.0 - h.times[k])).margin(1e-15));
  }
  SECTION("window leaving the grid is a domain error") {
    REQUIRE_THROWS_AS(solve_h_ode(unit_hat(64, -1.5, 3.0), 0.0, 0.5, c, T, 8),
                      DomainOverflowError);
  }
}

TEST_CASE("optimal mass field") {
  const auto f = optimal_mass_field(0.3, 0.5, 0.0, 0.0, 1.0, 0.0);
  REQUIRE(f.ramp_left == Approx(-0.2));
  REQUIRE(f.ramp_right == Approx(0.8));
  REQUIRE(field_eval(f, Vec<1>{-5.0})[0] == 1.0);
  REQUIRE(field_eval(f, Vec<1>{0.3})[0] == Approx(0.0).margin(1e-15));  // midpoint
  // Edge tracking: +c at the left edge, -c at the right edge.
  REQUIRE(field_eval(f, Vec<1>{f.ramp_left})[0] == 1.0);
  REQUIRE(field_eval(f, Vec<1>{f.ramp_right})[0] == -1.0);
}

TEST_CASE("candidate values") {
  SECTION("uniform density window") {
    std::vector<double> vals(10, 0.0);
    for (int i = 1; i <= 8; ++i) vals[std::size_t(i)] = 0.5;
    const GridDensity<1> m({-1.25}, {0.25}, {10}, vals);
    const auto h = HSchedule::make({0.0, 1.0}, {0.0, 0.0}, {0.0, 0.0});
    REQUIRE(value_window(WindowValue{0.5, h}, 0.0, m, 0.0) == Approx(0.5));
  }
  SECTION("mean-square vanishes at the discrete mean") {
    const auto m = unit_hat();
    REQUIRE(value_mean_square(mean_position(m), m) == Approx(0.0).margin(1e-20));
  }
  SECTION("monotone window at the horizon is the terminal window cost") {
    const auto m = decreasing_density(1024);
    const double direct = window_integral(m, 0.0 - 0.5, 0.0 + 0.5);
    REQUIRE(value_window(MonotoneWindowValue{0.5, 1.0, 1.0}, 0.0, m, 1.0) == direct);
  }
  SECTION("window leaving the grid is a domain error") {
    const auto m = unit_hat(64, -1.5, 3.0);
    REQUIRE_THROWS_AS(value_window(MonotoneWindowValue{0.5, 1.0, 1.0}, 0.0, m, 0.0),
                      DomainOverflowError);
  }
}
