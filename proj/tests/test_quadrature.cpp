#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "horomass/mass.hpp"
#include "horomass/quadrature.hpp"

using namespace horomass;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("1-D adaptive Gauss on smooth integrands") {
  QuadratureSpec spec;
  auto r = integrate_1d([](double x) { return std::sin(x); }, 0.0, kPi, spec);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-12));
  CHECK_FALSE(r.warning);

  // steep (near-singular) integrand: bisection still resolves it to ~1e-5
  auto r2 = integrate_1d([](double x) { return std::pow(x, -0.5); }, 1e-6, 1.0, spec);
  CHECK(r2.value == doctest::Approx(2.0 * (1.0 - 1e-3)).epsilon(1e-5));
}

TEST_CASE("depth cap produces a warning, never silence") {
  QuadratureSpec spec;
  spec.rel_tol = 1e-13;
  spec.max_depth = 2;
  auto r = integrate_1d([](double x) { return std::sin(200.0 * x * x); }, 0.0, 3.0, spec);
  CHECK(r.warning);
}

TEST_CASE("region volumes against closed-form antiderivatives") {
  QuadratureSpec spec;
  spec.rel_tol = 1e-10;

  SUBCASE("b-volume of C_eps, n=3, rho=2, eps=1/2 equals 6 pi") {
    RegionSpec reg;
    reg.kind = RegionKind::C_eps;
    reg.n = 3;
    reg.eps = 0.5;
    reg.alpha = 1.0;  // rho(1/2) = 2
    auto r = region_volume(reg, spec);
    CHECK(r.value == doctest::Approx(6.0 * kPi).epsilon(1e-9));
  }

  SUBCASE("area of c_eps (slice disc) is 4 pi") {
    RegionSpec reg;
    reg.kind = RegionKind::c_eps;
    reg.n = 3;
    reg.eps = 0.5;
    reg.alpha = 1.0;
    auto r = region_volume(reg, spec);
    CHECK(r.value == doctest::Approx(4.0 * kPi).epsilon(1e-10));
  }

  SUBCASE("ring length, lateral and bottom facet areas, strip area, n=3") {
    RegionSpec reg;
    reg.n = 3;
    reg.eps = 0.5;
    reg.alpha = 1.0;
    const double rho = 2.0;

    reg.kind = RegionKind::s_eps;
    CHECK(region_volume(reg, spec).value == doctest::Approx(2.0 * kPi * rho).epsilon(1e-10));

    reg.kind = RegionKind::S_eps;  // 2 pi rho (1/eps - 1)
    CHECK(region_volume(reg, spec).value ==
          doctest::Approx(2.0 * kPi * rho * (1.0 / reg.eps - 1.0)).epsilon(1e-9));

    reg.kind = RegionKind::F_eps;  // eps^{-2} pi rho^2
    CHECK(region_volume(reg, spec).value ==
          doctest::Approx(kPi * rho * rho / (reg.eps * reg.eps)).epsilon(1e-9));

    reg.kind = RegionKind::a_strip;  // pi (rho2^2 - rho1^2)
    reg.eps2 = 0.25;
    const double rho2 = 4.0;
    CHECK(region_volume(reg, spec).value ==
          doctest::Approx(kPi * (rho2 * rho2 - rho * rho)).epsilon(1e-9));
  }

  SUBCASE("mirrored cylinder volume, n=3") {
    RegionSpec reg;
    reg.kind = RegionKind::C_mirror;
    reg.n = 3;
    reg.eps = 0.5;
    reg.alpha = 1.0;
    // pi rho^2 int_1^{2} t^{-3} dt = pi * 4 * (1 - 1/4)/2 = 1.5 pi
    CHECK(region_volume(reg, spec).value == doctest::Approx(1.5 * kPi).epsilon(1e-9));
  }

  SUBCASE("volume of C_eps in n=4") {
    RegionSpec reg;
    reg.kind = RegionKind::C_eps;
    reg.n = 4;
    reg.eps = 0.5;
    reg.alpha = 1.0;
    // (4 pi/3) rho^3 int_{1/2}^1 t^{-4} dt = (4 pi/3) * 8 * (8-1)/3
    CHECK(region_volume(reg, spec).value ==
          doctest::Approx((4.0 * kPi / 3.0) * 8.0 * 7.0 / 3.0).epsilon(1e-8));
  }

  SUBCASE("annulus volume equals the difference of cylinders") {
    RegionSpec reg;
    reg.kind = RegionKind::annulus;
    reg.n = 3;
    reg.eps = 0.5;   // eps_1
    reg.eps2 = 0.25; // eps_2
    reg.alpha = 1.0;
    RegionSpec c1 = reg, c2 = reg;
    c1.kind = RegionKind::C_eps;
    c1.eps = 0.5;
    c2.kind = RegionKind::C_eps;
    c2.eps = 0.25;
    const double vol = region_volume(reg, spec).value;
    CHECK(vol == doctest::Approx(region_volume(c2, spec).value - region_volume(c1, spec).value)
                     .epsilon(1e-8));
  }
}

TEST_CASE("I1 integral of cosh^{1-2tau} decreases as the annulus moves out") {
  QuadratureSpec spec;
  spec.rel_tol = 1e-8;
  const double tau = 2.1;
  const auto integrand = [tau](const Point& p) {
    return std::pow(cosh_distance_r(p), 1.0 - 2.0 * tau);
  };
  RegionIntegrand ri;
  ri.f = integrand;

  double prev = std::numeric_limits<double>::infinity();
  for (double e1 : {0.25, 0.125, 0.0625}) {
    RegionSpec reg;
    reg.kind = RegionKind::I1;
    reg.n = 3;
    reg.eps = e1;
    reg.eps2 = 0.5 * e1;
    reg.alpha = 1.5;
    const double v = region_quadrature(reg, ri, spec).value;
    CHECK(v > 0.0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("region spec validation") {
  RegionSpec reg;
  reg.kind = RegionKind::I1;
  reg.eps = 0.5;
  reg.eps2 = 0.7;  // invalid: eps2 must be smaller
  CHECK_THROWS_AS(reg.check(), std::invalid_argument);
  reg.eps2 = 0.25;
  CHECK_NOTHROW(reg.check());
  reg.eps = 1.5;
  CHECK_THROWS_AS(reg.check(), std::invalid_argument);
}
