#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "masschase/density.hpp"
#include "masschase/density_io.hpp"

using namespace masschase;
using Catch::Approx;

namespace {

const IntegratorConfig kCfg{1e-3};

GridDensity<1> hat_grid(int cells = 2048, double origin = -2.0, double span = 4.0) {
  return GridDensity<1>::from_function({origin}, {span / cells}, {cells}, [](const Vec<1>& x) {
    return std::max(0.0, 1.0 - std::abs(x[0]));
  });
}

FieldSpec<1> constant_field(double v) {
  return FieldSpec<1>::constant({v}, Box<1>{{-2.0}, {2.0}}, 1.0);
}

std::vector<FieldSpec<1>> dictionary() {
  return {constant_field(0.5), FieldSpec<1>::linear_window(0.3, Box<1>{{-1.5}, {1.5}}, 1.0),
          FieldSpec<1>::clamp_ramp(-1.0, 1.0, 1.0, 1.0)};
}

}  // namespace

TEST_CASE("grid density construction enforces its invariants") {
  REQUIRE_THROWS_AS(GridDensity<1>({0.0}, {1.0}, {3}, {0, -1, 0}), ConfigError);
  REQUIRE_THROWS_AS(GridDensity<1>({0.0}, {1.0}, {3}, {1, 0, 0}), ConfigError);  // edge layer
  REQUIRE_THROWS_AS(GridDensity<1>({0.0}, {0.0}, {3}, {0, 0, 0}), ConfigError);
  REQUIRE_THROWS_AS(GridDensity<1>({0.0}, {1.0}, {3}, {0, 0}), ConfigError);
  const GridDensity<1> m({0.0}, {1.0}, {5}, {0, 0, 2, 0, 0});
  REQUIRE(m.support_box().lo[0] == 2.0);
  REQUIRE(m.support_box().hi[0] == 3.0);
}

TEST_CASE("sample_density is multilinear interpolation") {
  const GridDensity<1> m({0.0}, {1.0}, {4}, {0, 1, 3, 0});
  REQUIRE(sample_density(m, Vec<1>{1.5}) == 1.0);   // cell center
  REQUIRE(sample_density(m, Vec<1>{2.0}) == 2.0);   // midway between cells valued 1 and 3
  REQUIRE(sample_density(m, Vec<1>{17.0}) == 0.0);  // outside the grid
  REQUIRE(sample_density(m, Vec<1>{-3.0}) == 0.0);
}

TEST_CASE("mass is the midpoint-rule integral") {
  REQUIRE(mass(GridDensity<1>({0.0}, {0.5}, {3}, {0, 2, 0})) == 1.0);
  REQUIRE(mass(GridDensity<1>({0.0}, {0.5}, {3}, {0, 0, 0})) == 0.0);
  std::vector<double> vals(12, 0.0);
  for (int i = 1; i <= 10; ++i) vals[std::size_t(i)] = 1.0;
  REQUIRE(mass(GridDensity<1>({0.0}, {0.1}, {12}, vals)) == Approx(1.0));
}

TEST_CASE("norms") {
  SECTION("zero grid") {
    const auto r = norms(GridDensity<1>({0.0}, {1.0}, {4}, {0, 0, 0, 0}));
    REQUIRE(r.l2 == 0.0);
    REQUIRE(r.h1 == 0.0);
    REQUIRE(r.w1inf == 0.0);
    REQUIRE(r.mass == 0.0);
  }
  SECTION("hat density: l2^2 -> 2/3 as h -> 0") {
    const auto r = norms(hat_grid(4096));
    REQUIRE(r.l2 * r.l2 == Approx(2.0 / 3.0).margin(1e-5));
    REQUIRE(r.h1 >= r.l2);
    REQUIRE(r.w1inf == Approx(1.0).margin(1e-3));
  }
  SECTION("plateau: interior gradient vanishes") {
    std::vector<double> vals(16, 0.0);
    for (int i = 4; i < 12; ++i) vals[std::size_t(i)] = 2.0;
    const auto r = norms(GridDensity<1>({0.0}, {0.25}, {16}, vals));
    REQUIRE(r.w1inf >= 2.0);  // edge stencils dominate
    REQUIRE(r.h1 >= r.l2);
  }
}

TEST_CASE("transport under the zero field is the identity") {
  const auto m = hat_grid(512);
  const auto out = transport_density(m, 0.0, 1.0, Schedule<1>::single(constant_field(0.0)), kCfg);
  REQUIRE(out.values() == m.values());
}

TEST_CASE("transport under a constant field translates") {
  // 0.5 over one time unit is exactly 256 cells of the 2048-cell grid, so the
  // semi-Lagrangian update is an exact shift.
  const auto m = hat_grid(2048);
  const auto out = transport_density(m, 0.0, 1.0, Schedule<1>::single(constant_field(0.5)), kCfg);
  const int shift = 256;
  for (int i = shift + 1; i + 1 < 2048; ++i)
    REQUIRE(out.values()[std::size_t(i)] ==
            Approx(m.values()[std::size_t(i - shift)]).margin(1e-12));
  REQUIRE(mass(out) == Approx(mass(m)).margin(1e-10));
}

TEST_CASE("transport under the linear flow matches the analytic pushforward") {
  const auto m = hat_grid(2048);
  const auto field = FieldSpec<1>::linear_window(0.3, Box<1>{{-1.5}, {1.5}}, 1.0);
  const auto out = transport_density(m, 0.0, 1.0, Schedule<1>::single(field), kCfg);
  const double e = std::exp(0.3);
  // m(x, 1) = m0(x e^{-0.3}) e^{-0.3} while the trajectory stays in the window.
  for (double x : {0.0, 0.3, -0.5, 0.9}) {
    const double expected = std::max(0.0, 1.0 - std::abs(x / e)) / e;
    REQUIRE(sample_density(out, Vec<1>{x}) == Approx(expected).margin(2e-3));
  }
  REQUIRE(mass(out) == Approx(mass(m)).epsilon(1e-4));
  REQUIRE(out.support_box().hi[0] == Approx(e).margin(0.01));
}

TEST_CASE("transport conserves mass and positivity across the dictionary") {
  const auto m = hat_grid(2048, -3.0, 6.0);
  for (const auto& f : dictionary()) {
    const auto out = transport_density(m, 0.0, 1.0, Schedule<1>::single(f), kCfg);
    REQUIRE(std::abs(mass(out) - mass(m)) <= 1e-4 * mass(m));
    for (double v : out.values()) REQUIRE(v >= 0.0);
    const auto env = support_envelope(m.support_box(), field_bounds(f).sup_b, 1.0);
    REQUIRE(out.support_box().lo[0] >= env.lo[0] - m.spacing()[0]);
    REQUIRE(out.support_box().hi[0] <= env.hi[0] + m.spacing()[0]);
  }
}

TEST_CASE("transport is linear in the initial values") {
  const auto m1 = hat_grid(512);
  const auto m2 = GridDensity<1>::from_function({-2.0}, {4.0 / 512}, {512}, [](const Vec<1>& x) {
    return x[0] > -0.5 && x[0] < 1.2 ? 0.7 * (1.2 - x[0]) : 0.0;
  });
  const auto sched = Schedule<1>::single(constant_field(0.3));
  std::vector<double> blend(m1.values().size());
  for (std::size_t i = 0; i < blend.size(); ++i)
    blend[i] = 2.0 * m1.values()[i] + m2.values()[i];
  const auto lhs = transport_density(GridDensity<1>(m1.origin(), m1.spacing(), m1.extents(), blend),
                                     0.0, 0.7, sched, kCfg);
  const auto t1 = transport_density(m1, 0.0, 0.7, sched, kCfg);
  const auto t2 = transport_density(m2, 0.0, 0.7, sched, kCfg);
  for (std::size_t i = 0; i < blend.size(); ++i)
    REQUIRE(lhs.values()[i] ==
            Approx(2.0 * t1.values()[i] + t2.values()[i]).margin(1e-12));
}

TEST_CASE("transport semigroup in time") {
  const auto m = hat_grid(2048, -3.0, 6.0);
  for (const auto& f : dictionary()) {
    const auto sched = Schedule<1>::single(f);
    const auto two_leg = transport_density(
        transport_density(m, 0.0, 0.4, sched, kCfg), 0.4, 1.0, sched, kCfg);
    const auto direct = transport_density(m, 0.0, 1.0, sched, kCfg);
    double worst = 0;
    for (std::size_t i = 0; i < direct.values().size(); ++i)
      worst = std::max(worst, std::abs(two_leg.values()[i] - direct.values()[i]));
    REQUIRE(worst <= 5e-3);  // interpolation error of the intermediate resample
  }
}

TEST_CASE("transport stability in the initial density") {
  // Discrete analog of the H1 stability estimate with measured constants.
  const auto m1 = hat_grid(1024, -3.0, 6.0);
  const auto m2 = GridDensity<1>::from_function({-3.0}, {6.0 / 1024}, {1024}, [](const Vec<1>& x) {
    const double u = x[0] / 0.8;
    return std::abs(x[0]) < 1.4 ? 0.9 * std::exp(-0.5 * u * u) : 0.0;
  });
  const double M = 8.0, T = 1.0;
  for (const auto& f : dictionary()) {
    const auto sched = Schedule<1>::single(f);
    const auto fc = measure_flow_constants(sched, m1.support_box().dilated(0.5), 0.0, T, kCfg, 17);
    const double factor = 3 * std::exp(2 * M * T) *
                          std::max(1 + fc.m_tilde * fc.m_tilde, fc.l_phi_inv * fc.l_phi_inv);
    const auto t1 = transport_density(m1, 0.0, T, sched, kCfg);
    const auto t2 = transport_density(m2, 0.0, T, sched, kCfg);
    const double lhs = std::pow(difference_norms(t1, t2).h1, 2);
    const double rhs = std::pow(difference_norms(m1, m2).h1, 2);
    REQUIRE(lhs <= 1.05 * factor * rhs);
  }
}

TEST_CASE("transported sup norm respects the growth bound") {
  const auto m = hat_grid(1024, -3.0, 6.0);
  const double M = 8.0, T = 1.0;
  for (const auto& f : dictionary()) {
    const auto sched = Schedule<1>::single(f);
    const auto fc = measure_flow_constants(sched, m.support_box().dilated(0.5), 0.0, T, kCfg, 9);
    const double bound = std::max(1 + fc.m_tilde, fc.l_phi_inv) * norms(m).w1inf * std::exp(M * T);
    REQUIRE(norms(transport_density(m, 0.0, T, sched, kCfg)).w1inf <= bound);
  }
}

TEST_CASE("transport rejects grids the support could escape") {
  const auto m = hat_grid(128, -1.2, 2.4);  // support fills most of the grid
  REQUIRE_THROWS_AS(
      transport_density(m, 0.0, 1.0, Schedule<1>::single(constant_field(0.5)), kCfg),
      DomainOverflowError);
}

TEST_CASE("transport edge cases") {
  const auto m = hat_grid(512);
  SECTION("zero-length interval is the identity") {
    const auto out =
        transport_density(m, 0.3, 0.3, Schedule<1>::single(constant_field(0.5)), kCfg);
    REQUIRE(out.values() == m.values());
  }
  SECTION("empty density short-circuits") {
    const GridDensity<1> empty({-2.0}, {0.5}, {8}, std::vector<double>(8, 0.0));
    const auto out =
        transport_density(empty, 0.0, 1.0, Schedule<1>::single(constant_field(0.5)), kCfg);
    REQUIRE(out.values() == empty.values());
  }
  SECTION("reversed times are rejected") {
    REQUIRE_THROWS_AS(
        transport_density(m, 0.5, 0.2, Schedule<1>::single(constant_field(0.0)), kCfg),
        ConfigError);
  }
}

TEST_CASE("window integral edge cases") {
  const auto m = hat_grid(512);
  REQUIRE(window_integral(m, 0.5, 0.5) == 0.0);
  REQUIRE(window_integral(m, 0.7, 0.2) == 0.0);  // inverted window
  REQUIRE(window_integral(m, -10.0, 10.0) == Approx(mass(m)).margin(1e-12));
  REQUIRE(mean_position(m) == Approx(0.0).margin(1e-13));  // symmetric hat
}

TEST_CASE("support envelope") {
  const Box<1> b{{0.0}, {1.0}};
  REQUIRE(support_envelope(b, 1.0, 0.0).lo[0] == 0.0);
  const auto e = support_envelope(b, 1.0, 0.5);
  REQUIRE(e.lo[0] == -0.5);
  REQUIRE(e.hi[0] == 1.5);
  const auto nested = support_envelope(support_envelope(b, 1.0, 0.2), 1.0, 0.3);
  const auto direct = support_envelope(b, 1.0, 0.5);
  REQUIRE(nested.lo[0] == direct.lo[0]);
  REQUIRE(nested.hi[0] == direct.hi[0]);
  REQUIRE_THROWS_AS(support_envelope(b, -1.0, 0.1), ConfigError);
}

TEST_CASE("two-dimensional transport properties") {
  const int n = 96;
  const auto m = GridDensity<2>::from_function(
      {-1.5, -1.5}, {3.0 / n, 3.0 / n}, {n, n}, [](const Vec<2>& x) {
        const double r = std::sqrt(x[0] * x[0] + x[1] * x[1]);
        return std::max(0.0, 0.8 - r);
      });
  const auto f = FieldSpec<2>::constant({0.25, -0.25}, Box<2>{{-1.2, -1.2}, {1.2, 1.2}}, 0.6);
  const auto out = transport_density(m, 0.0, 1.0, Schedule<2>::single(f), IntegratorConfig{5e-3});
  REQUIRE(std::abs(mass(out) - mass(m)) <= 1e-4 * mass(m));
  for (double v : out.values()) REQUIRE(v >= 0.0);
  const auto env = support_envelope(m.support_box(), field_bounds(f).sup_b, 1.0);
  for (std::size_t ax = 0; ax < 2; ++ax) {
    REQUIRE(out.support_box().lo[ax] >= env.lo[ax] - m.spacing()[ax]);
    REQUIRE(out.support_box().hi[ax] <= env.hi[ax] + m.spacing()[ax]);
  }
  // Bilinear sampling identity at cell centers.
  const auto idx = std::array<int, 2>{n / 2, n / 3};
  REQUIRE(sample_density(m, m.cell_center(idx)) == Approx(m.value_at(idx)).margin(1e-14));
  const auto nr = norms(m);
  REQUIRE(nr.h1 >= nr.l2);
}

TEST_CASE("density CSV + JSON header round trip is bit-exact") {
  const auto m = GridDensity<1>::from_function({-1.0}, {0.0625}, {32}, [](const Vec<1>& x) {
    return std::max(0.0, (0.8 - x[0] * x[0])) / 3.0;
  });
  const auto dir = std::filesystem::temp_directory_path() / "masschase_density_io";
  std::filesystem::create_directories(dir);
  const std::string base = (dir / "m").string();
  save_density(m, base);
  const auto back = load_density<1>(base);
  REQUIRE(back.origin()[0] == m.origin()[0]);
  REQUIRE(back.spacing()[0] == m.spacing()[0]);
  REQUIRE(back.extents() == m.extents());
  REQUIRE(back.values() == m.values());

  const int n2 = 12;
  const auto m2 = GridDensity<2>::from_function(
      {-1.0, 0.5}, {0.25, 0.125}, {n2, n2}, [](const Vec<2>& x) {
        const double r2 = x[0] * x[0] + (x[1] - 1.2) * (x[1] - 1.2);
        return r2 < 0.36 ? 1.7 - r2 : 0.0;
      });
  const std::string base2 = (dir / "m2").string();
  save_density(m2, base2);
  const auto back2 = load_density<2>(base2);
  REQUIRE(back2.values() == m2.values());
  REQUIRE(back2.extents() == m2.extents());
}
