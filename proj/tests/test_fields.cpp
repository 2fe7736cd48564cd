#include <catch2/catch_amalgamated.hpp>

#include "masschase/fields.hpp"

using namespace masschase;
using Catch::Approx;

namespace {

FieldSpec<1> constant_half() {
  return FieldSpec<1>::constant({0.5}, Box<1>{{-5.0}, {5.0}}, 1.0);
}

FieldSpec<1> linear_03() {
  return FieldSpec<1>::linear_window(0.3, Box<1>{{-1.0}, {1.0}}, 1.0);
}

FieldSpec<1> ramp_linear() { return FieldSpec<1>::clamp_ramp(-1.0, 1.0, 1.0, 0.0); }

}  // namespace

TEST_CASE("field_eval on the three variants") {
  REQUIRE(field_eval(constant_half(), Vec<1>{0.0})[0] == 0.5);
  REQUIRE(field_eval(ramp_linear(), Vec<1>{0.0})[0] == 0.0);  // midpoint of the ramp
  REQUIRE(field_eval(ramp_linear(), Vec<1>{2.0})[0] == -1.0); // -c right of the window
  REQUIRE(field_eval(ramp_linear(), Vec<1>{-3.0})[0] == 1.0);
  // Compact support: the blended constant vanishes past window + margin.
  REQUIRE(field_eval(constant_half(), Vec<1>{6.5})[0] == 0.0);
  REQUIRE(field_eval(linear_03(), Vec<1>{0.5})[0] == Approx(0.15));
}

TEST_CASE("field_div analytic values") {
  REQUIRE(field_div(constant_half(), Vec<1>{0.0}) == 0.0);
  REQUIRE(field_div(linear_03(), Vec<1>{0.2}) == Approx(0.3));  // d/dx (lambda x) = lambda
  REQUIRE(field_div(ramp_linear(), Vec<1>{0.0}) == Approx(-1.0));  // slope -2c/(R-L)
  REQUIRE(field_div(ramp_linear(), Vec<1>{5.0}) == 0.0);
}

TEST_CASE("finite-difference divergence matches the analytic one") {
  const double h = 1e-4;
  for (const auto& f : {constant_half(), linear_03(),
                        FieldSpec<1>::clamp_ramp(-1.0, 1.0, 1.0, 1.0)}) {
    for (int i = 0; i < 200; ++i) {
      const double x = -7.0 + 14.0 * i / 199.0;
      const double fd =
          (field_eval(f, Vec<1>{x + h})[0] - field_eval(f, Vec<1>{x - h})[0]) / (2 * h);
      REQUIRE(fd == Approx(field_div(f, Vec<1>{x})).margin(1e-6));
    }
  }
}

TEST_CASE("field_bounds per variant") {
  SECTION("blended constant") {
    const auto b = field_bounds(constant_half());
    REQUIRE(b.sup_b == 0.5);
    REQUIRE(b.sup_div == Approx(0.5 * 1.5 / 1.0));  // blend slope bound
    REQUIRE(std::isfinite(b.lip_div));
    REQUIRE(std::isfinite(b.h1_norm));
  }
  SECTION("linear ramp") {
    const auto b = field_bounds(ramp_linear());
    REQUIRE(b.sup_b == 1.0);
    REQUIRE(b.sup_div == Approx(1.0));  // 2c/(R-L)
    REQUIRE(std::isinf(b.lip_div));
    REQUIRE(std::isinf(b.h1_norm));
  }
  SECTION("zero field") {
    const auto b = field_bounds(FieldSpec<1>::constant({0.0}, Box<1>{{-1.0}, {1.0}}, 1.0));
    REQUIRE(b.sup_b == 0.0);
    REQUIRE(b.sup_div == 0.0);
    REQUIRE(b.h1_norm == 0.0);
  }
}

TEST_CASE("bounds hold under dense sampling") {
  // 1e4 points per axis across support plus margins, per field.
  const auto fields = {constant_half(), linear_03(), ramp_linear(),
                       FieldSpec<1>::clamp_ramp(-0.4, 0.8, 0.7, 1.0)};
  for (const auto& f : fields) {
    const auto b = field_bounds(f);
    double sup_seen = 0, div_seen = 0;
    for (int i = 0; i < 10000; ++i) {
      const double x = -8.0 + 16.0 * i / 9999.0;
      sup_seen = std::max(sup_seen, std::abs(field_eval(f, Vec<1>{x})[0]));
      div_seen = std::max(div_seen, std::abs(field_div(f, Vec<1>{x})));
    }
    REQUIRE(sup_seen <= b.sup_b + 1e-12);
    REQUIRE(div_seen <= b.sup_div + 1e-12);
  }
}

TEST_CASE("bounds hold for a 2d field sample") {
  const auto f = FieldSpec<2>::constant({0.4, -0.3}, Box<2>{{-1.0, -2.0}, {2.0, 1.0}}, 0.8);
  const auto b = field_bounds(f);
  REQUIRE(b.sup_b == Approx(0.5));
  double sup_seen = 0, div_seen = 0, fd_err = 0;
  for (int i = 0; i < 160; ++i) {
    for (int j = 0; j < 160; ++j) {
      const Vec<2> x{-2.5 + 5.2 * i / 159.0, -3.4 + 5.1 * j / 159.0};
      sup_seen = std::max(sup_seen, norm<2>(field_eval(f, x)));
      div_seen = std::max(div_seen, std::abs(field_div(f, x)));
      const double h = 1e-5;
      double fd = 0;
      for (std::size_t ax = 0; ax < 2; ++ax) {
        Vec<2> xp = x, xm = x;
        xp[ax] += h;
        xm[ax] -= h;
        fd += (field_eval(f, xp)[ax] - field_eval(f, xm)[ax]) / (2 * h);
      }
      fd_err = std::max(fd_err, std::abs(fd - field_div(f, x)));
    }
  }
  REQUIRE(sup_seen <= b.sup_b + 1e-12);
  REQUIRE(div_seen <= b.sup_div + 1e-12);
  REQUIRE(fd_err <= 1e-4);
}

TEST_CASE("check_admissible verdicts") {
  REQUIRE(check_admissible(constant_half(), 10.0).status == Admissibility::Status::Pass);
  const auto tight = check_admissible(constant_half(), 0.1);
  REQUIRE(tight.status == Admissibility::Status::Fail);
  REQUIRE_FALSE(tight.violations.empty());
  REQUIRE(tight.violations.front().find("sup|b|") != std::string::npos);

  // The ramp is the limiting optimizer: never rejected, never a plain pass.
  for (double M : {0.01, 1.0, 100.0}) {
    const auto v = check_admissible(ramp_linear(), M);
    REQUIRE(v.status == Admissibility::Status::AdmissibleInTheLimit);
    REQUIRE(v.admissible());
  }
  REQUIRE_THROWS_AS(check_admissible(constant_half(), 0.0), ConfigError);
}

TEST_CASE("ramp swing constraint") {
  // Transition from +c to -c over R-L fits a slope bound c1 iff R-L >= 2c/c1.
  const double c = 1.0, c1 = 2.0;
  REQUIRE(ramp_fits_swing(FieldSpec<1>::clamp_ramp(0.0, 2 * c / c1, c, 0.0), c1));
  REQUIRE_FALSE(ramp_fits_swing(FieldSpec<1>::clamp_ramp(0.0, 2 * c / c1 - 0.1, c, 0.0), c1));
  REQUIRE(ramp_fits_swing(constant_half(), c1));  // vacuous for other variants
}

TEST_CASE("ramp transitions over exactly R - L") {
  const auto f = ramp_linear();
  REQUIRE(field_eval(f, Vec<1>{-1.0})[0] == 1.0);
  REQUIRE(field_eval(f, Vec<1>{1.0})[0] == -1.0);
  REQUIRE(field_eval(f, Vec<1>{-1.0 - 1e-12})[0] == 1.0);
  REQUIRE(field_eval(f, Vec<1>{1.0 + 1e-12})[0] == -1.0);
}

TEST_CASE("schedule ordering and lookup") {
  const auto f1 = constant_half();
  const auto f2 = linear_03();
  const auto sched = Schedule<1>::piecewise({{0.0, f1}, {0.5, f2}});
  REQUIRE(sched.field_at(0.0).kind == FieldKind::Constant);
  REQUIRE(sched.field_at(0.49).kind == FieldKind::Constant);
  REQUIRE(sched.field_at(0.5).kind == FieldKind::LinearWindow);  // right-continuous
  REQUIRE(sched.field_at(7.0).kind == FieldKind::LinearWindow);
  REQUIRE_THROWS_AS(sched.field_at(-0.1), ConfigError);
  REQUIRE_THROWS_AS(Schedule<1>::piecewise({{0.5, f1}, {0.5, f2}}), ConfigError);
  REQUIRE(sched.switch_times_in(0.0, 1.0) == std::vector<double>{0.5});
}

TEST_CASE("control set validation") {
  REQUIRE_THROWS_AS(ControlSetA<1>::make(1.0, {}), ConfigError);
  REQUIRE_THROWS_AS(ControlSetA<1>::make(1.0, {{1.5}}), ConfigError);
  const auto a = ControlSetA<1>::make(1.0, {{-1.0}, {0.0}, {1.0}});
  REQUIRE(a.dictionary.size() == 3);
}

TEST_CASE("field spec construction errors") {
  REQUIRE_THROWS_AS(FieldSpec<1>::constant({1.0}, Box<1>{{1.0}, {-1.0}}, 1.0), ConfigError);
  REQUIRE_THROWS_AS(FieldSpec<1>::constant({1.0}, Box<1>{{-1.0}, {1.0}}, 0.0), ConfigError);
  REQUIRE_THROWS_AS(FieldSpec<1>::clamp_ramp(1.0, -1.0, 1.0, 0.0), ConfigError);
}
