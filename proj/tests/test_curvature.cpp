#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "horomass/curvature.hpp"
#include "horomass/mass.hpp"
#include "horomass/util.hpp"
#include "oracles.hpp"

using namespace horomass;

namespace {

Point rp(Rng& rng, int n, double lo = 0.25, double hi = 2.0, double box = 2.0) {
  Vec hx(n - 1);
  for (int i = 0; i < n - 1; ++i) hx[i] = rng.uniform(-box, box);
  return Point(hx, rng.uniform(lo, hi));
}

PerturbationFamily slice_bump(int n, double tau) {
  Vec c = Vec::Zero(n);
  c[0] = 0.1;
  c[n - 1] = 1.0;
  return bump_family(n, default_bump_matrix(n), c, 0.35, tau);
}

MetricJet background_as_e_jet(const Point& p) {
  const int n = p.dim();
  MetricJet jet;
  jet.at = p;
  jet.e = metric_b(p);
  jet.de = Rank3(n);
  jet.dde = Rank4(n);
  for (int i = 0; i < n; ++i) {
    jet.de.at(n - 1, i, i) = dmetric_b(p, n - 1, i, i);
    jet.dde.at(n - 1, n - 1, i, i) = ddmetric_b(p, n - 1, n - 1, i, i);
  }
  jet.g = 2.0 * metric_b(p);
  jet.dg = jet.de;
  jet.ddg = jet.dde;
  return jet;
}

double slope2_of(const std::function<double(double)>& resid) {
  std::vector<double> xs, ys;
  for (double s : {0.3, 0.1, 0.03, 0.01}) {
    const double r = std::abs(resid(s));
    if (r > 0) {
      xs.push_back(std::log(s));
      ys.push_back(std::log(r));
    }
  }
  return fit_line(xs, ys).slope;
}

}  // namespace

TEST_CASE("christoffel_g reduces to the background table for e = 0") {
  Rng rng(3);
  for (int n : {3, 4}) {
    auto f = zero_family(n, 0.5 * n + 0.6);
    for (int t = 0; t < 30; ++t) {
      Point p = rp(rng, n);
      auto jet = evaluate_jet(f, p);
      auto Gg = christoffel_g(jet, p);
      auto Gb = christoffel_b(p);
      double worst = 0.0;
      for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(Gg(k, i, j) - Gb(k, i, j)));
      CHECK(worst < 1e-12);
    }
    // at the slice, Gamma^n_{ab} = delta_ab for e = 0
    Point ps(Vec::Constant(n - 1, 0.4), 1.0);
    auto Gg = christoffel_g(evaluate_jet(f, ps), ps);
    for (int a = 0; a < n - 1; ++a)
      for (int b2 = 0; b2 < n - 1; ++b2)
        CHECK(Gg(n - 1, a, b2) == doctest::Approx(a == b2 ? 1.0 : 0.0).epsilon(1e-14).scale(1.0));
  }
}

TEST_CASE("connection difference expansion on the slice is second order") {
  const int n = 3;
  auto f = slice_bump(n, 2.1);
  Vec hx = Vec::Zero(n - 1);
  hx[0] = 0.15;
  Point p(hx, 1.0);

  const auto residual = [&](double s) {
    auto fs = f.scaled(s);
    auto jet = evaluate_jet(fs, p);
    auto G = christoffel_g(jet, p);
    auto nab = covariant_d1(jet, p);
    double worst = 0.0;
    for (int a = 0; a < n - 1; ++a)
      for (int b2 = 0; b2 < n - 1; ++b2) {
        const double expect = (a == b2 ? 1.0 : 0.0) + 0.5 * (nab(a, b2, n - 1) +
                                                             nab(b2, a, n - 1) -
                                                             nab(n - 1, a, b2));
        worst = std::max(worst, std::abs(G(n - 1, a, b2) - expect));
      }
    return worst;
  };
  CHECK(residual(0.0) == 0.0);
  CHECK(slope2_of(residual) == doctest::Approx(2.0).epsilon(0.12));
}

TEST_CASE("curvature of the background model") {
  Rng rng(7);
  for (int n : {3, 4}) {
    auto f = zero_family(n, 0.5 * n + 0.6);
    double worstR = 0.0, worstRic = 0.0, worstMixed = 0.0;
    for (int t = 0; t < 200; ++t) {
      Point p = rp(rng, n, 0.2, 3.0);
      auto C = curvature_g(evaluate_jet(f, p), p);
      worstR = std::max(worstR, std::abs(C.R + n * (n - 1.0)));
      worstRic = std::max(worstRic, (C.Ric + (n - 1.0) * metric_b(p)).norm());
      // raising one index diagonalises: Ric^i_j = -(n-1) delta^i_j
      Mat mixed = inverse_b(p) * C.Ric + (n - 1.0) * Mat::Identity(n, n);
      worstMixed = std::max(worstMixed, mixed.norm());
    }
    CHECK(worstR < 1e-9);
    CHECK(worstRic < 1e-10);
    CHECK(worstMixed < 1e-9);
  }
}

TEST_CASE("linearized scalar curvature") {
  const int n = 3;
  Rng rng(11);

  SUBCASE("DR(b) = n(n-1)") {
    for (int nn : {3, 4}) {
      Point p = rp(rng, nn);
      CHECK(linearized_scalar(background_as_e_jet(p), p) ==
            doctest::Approx(nn * (nn - 1.0)).epsilon(1e-11));
    }
  }

  SUBCASE("bump family linearization limit with slope 1 and Richardson match") {
    auto f = default_bump_family(n, 2.1);
    Point p = default_bump_center_point(n);
    const double DR = linearized_scalar(evaluate_jet(f, p), p);
    REQUIRE(std::abs(DR) > 1e-3);  // generic point, nonzero linearization

    const auto ratio = [&](double s) {
      auto C = curvature_g(evaluate_jet(f.scaled(s), p), p);
      return (C.R + n * (n - 1.0)) / s;
    };
    const auto err = [&](double s) { return ratio(s) - DR; };
    CHECK(slope2_of(err) == doctest::Approx(1.0).epsilon(0.10));

    const double extrap = 2.0 * ratio(0.005) - ratio(0.01);
    CHECK(std::abs(extrap - DR) / std::abs(DR) < 1e-4);
  }

  SUBCASE("gauge invariance: DR(L_X b) = 0") {
    auto f = default_gauge_family(n, 2.1);
    for (int t = 0; t < 40; ++t) {
      Vec hx = Vec::Constant(n - 1, -0.12 + 0.006 * t);
      Point p(hx, 0.42 + 0.004 * t);
      const double dr = linearized_scalar(evaluate_jet(f, p), p);
      CHECK(std::abs(dr) < 1e-6);
    }
    // cross-check against the s-scaling of R at one interior point
    Point p(Vec::Zero(n - 1), 0.5);
    const auto ratio = [&](double s) {
      auto C = curvature_g(evaluate_jet(f.scaled(s), p), p);
      return (C.R + n * (n - 1.0)) / s;
    };
    CHECK(std::abs(2.0 * ratio(0.001) - ratio(0.002)) < 1e-6);
  }
}

TEST_CASE("adjoint identity: V DR(e) = div U for static V") {
  Rng rng(13);
  for (int n : {3, 4}) {
    const double tau = 0.5 * n + 0.6;
    for (const char* which : {"tail", "bump", "gauge"}) {
      PerturbationFamily f = std::string(which) == "tail"   ? default_tail_family(n, tau)
                             : std::string(which) == "bump" ? default_bump_family(n, tau)
                                                            : default_gauge_family(n, tau);
      for (int t = 0; t < 25; ++t) {
        Point p = std::string(which) == "tail" ? rp(rng, n, 0.3, 1.0, 2.0)
                                               : Point(Vec::Constant(n - 1, 0.05 + 0.004 * t),
                                                       0.4 + 0.008 * t);
        const MetricJet jet = evaluate_jet(f, p);
        const double s4 = std::pow(p.xn, 4);
        for (int kind = 0; kind < n; ++kind) {
          const Potential V = potential(kind, p);
          const double lhs = V.value * linearized_scalar(jet, p);
          const double rhs = div_U_analytic(f, V, p);
          CHECK(std::abs(lhs - rhs) < 1e-8 * (1.0 + std::abs(lhs)));
          // <nabla^2 V - V b, e>_b vanishes for static potentials
          double pair = 0.0;
          const Mat D = V.hess - V.value * metric_b(p);
          for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) pair += D(i, j) * jet.e(i, j);
          CHECK(std::abs(s4 * pair) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("boundary data on the slice") {
  Rng rng(17);
  for (int n : {3, 4}) {
    auto fz = zero_family(n, 0.5 * n + 0.6);
    for (int t = 0; t < 20; ++t) {
      Vec hx(n - 1);
      for (int i = 0; i < n - 1; ++i) hx[i] = rng.uniform(-2, 2);
      Point p(hx, 1.0);
      auto B = boundary_data(evaluate_jet(fz, p), p);
      CHECK((B.A + Mat::Identity(n - 1, n - 1)).norm() < 1e-13);   // A = -delta
      CHECK(B.H == doctest::Approx(-(n - 1.0)).epsilon(1e-14));    // H = -(n-1)
      Vec dn = Vec::Zero(n);
      dn[n - 1] = 1.0;
      CHECK((B.eta - dn).norm() < 1e-14);                          // eta = d_n
    }

    // perturbed slice: normal is unit and g-orthogonal to slice tangents
    auto f = slice_bump(n, 0.5 * n + 0.6);
    for (int t = 0; t < 20; ++t) {
      Vec hx = Vec::Zero(n - 1);
      hx[0] = 0.1 + 0.01 * t;
      Point p(hx, 1.0);
      auto jet = evaluate_jet(f, p);
      auto B = boundary_data(jet, p);
      CHECK(std::abs((B.eta.transpose() * jet.g * B.eta)(0, 0) - 1.0) < 1e-12);
      for (int a = 0; a < n - 1; ++a) {
        Vec ta = Vec::Zero(n);
        ta[a] = 1.0;
        CHECK(std::abs((B.eta.transpose() * jet.g * ta)(0, 0)) < 1e-12);
      }
    }
  }
}

TEST_CASE("mean curvature matches the first-variation-of-area oracle") {
  const int n = 3;
  auto f = slice_bump(n, 2.1);
  Vec hx0 = Vec::Zero(n - 1);
  hx0[0] = 0.12;
  const Point p0(hx0, 1.0);

  const auto flow_point = [&](const Vec& hx, double t) -> Vec {
    Point q(hx, 1.0);
    auto B = boundary_data(evaluate_jet(f, q), q);
    Vec x = q.coords();
    return x + t * B.eta;
  };
  const auto log_area = [&](double t) {
    const int nn = n - 1;
    Mat J(n, nn);
    const double h = 1e-4;
    for (int a = 0; a < nn; ++a) {
      Vec hp = hx0, hm = hx0;
      hp[a] += h;
      hm[a] -= h;
      J.col(a) = (flow_point(hp, t) - flow_point(hm, t)) / (2.0 * h);
    }
    const Vec x = flow_point(hx0, t);
    const Point q = Point::from_coords(x);
    const Mat g = evaluate_jet(f, q).g;
    return 0.5 * std::log((J.transpose() * g * J).determinant());
  };

  const double H_oracle = oracle::diff1([&](double t) { return log_area(t); }, 0.0, 1e-3);
  const double H = boundary_data(evaluate_jet(f, p0), p0).H;
  CHECK(std::abs(H - H_oracle) < 1e-5);
  CHECK(H < 0.0);  // near the model value -(n-1)
}

TEST_CASE("mean curvature expansion residual") {
  const int n = 3;
  const double tau = 2.1;

  SUBCASE("e = 0 gives zero exactly") {
    auto f = zero_family(n, tau);
    Point p(Vec::Constant(n - 1, 0.7), 1.0);
    CHECK(mean_curvature_expansion_residual(evaluate_jet(f, p), p) == doctest::Approx(0.0));
  }

  SUBCASE("residual scales as s^2") {
    auto f = slice_bump(n, tau);
    Vec hx = Vec::Zero(n - 1);
    hx[0] = 0.2;
    Point p(hx, 1.0);
    const auto resid = [&](double s) {
      return mean_curvature_expansion_residual(evaluate_jet(f.scaled(s), p), p);
    };
    CHECK(slope2_of(resid) == doctest::Approx(2.0).epsilon(0.12));
  }

  SUBCASE("tail family residual decays along the slice at rate <= -2 tau + 0.3") {
    auto f = default_tail_family(n, tau);
    std::vector<double> rs, lr;
    for (double r = 2.0; r <= 7.0; r += 0.5) {
      const double s = std::sqrt(2.0 * std::cosh(r) - 2.0);
      Vec hx = Vec::Zero(n - 1);
      hx[0] = s / std::sqrt(2.0);
      hx[1] = s / std::sqrt(2.0);
      Point p(hx, 1.0);
      const double res = std::abs(mean_curvature_expansion_residual(evaluate_jet(f, p), p));
      if (res > 0) {
        rs.push_back(distance_r(p));
        lr.push_back(std::log(res));
      }
    }
    const double slope = fit_line(rs, lr).slope;
    CHECK(slope <= -2.0 * tau + 0.3);
  }
}
