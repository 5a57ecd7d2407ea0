#pragma once

#include <functional>
#include <string>
#include <vector>

#include "horomass/curvature.hpp"
#include "horomass/killing.hpp"
#include "horomass/perturbation.hpp"
#include "horomass/quadrature.hpp"

// The mass integrand U, the integration regions of the truncation scheme,
// their quadrature, and the mass M(V) as an eps-limit with Cauchy
// diagnostics.

namespace horomass {

// first background-covariant derivative only (cheaper than covariant_jets)
inline Rank3 covariant_d1(const MetricJet& jet, const Point& p) {
  const int n = p.dim();
  Rank3 nab(n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = jet.de(k, i, j);
        for (int m = 0; m < n; ++m)
          v -= christoffel_b_entry(p, m, k, i) * jet.e(m, j) +
               christoffel_b_entry(p, m, k, j) * jet.e(i, m);
        nab.at(k, i, j) = v;
      }
  return nab;
}

// U = V div e - V d(tr_b e) + (tr_b e) dV - e(grad V, .), all with respect to
// b; returned with the index raised by b (vector components U^i).
inline Vec mass_integrand_U(const MetricJet& jet, const Potential& V, const Point& p) {
  const int n = p.dim();
  const Rank3 nab = covariant_d1(jet, p);
  const double s2 = p.xn * p.xn;
  Vec U(n);
  double E = 0.0;
  for (int i = 0; i < n; ++i) E += jet.e(i, i);
  E *= s2;
  for (int k = 0; k < n; ++k) {
    double dive_k = 0.0, dE_k = 0.0, eDV_k = 0.0;
    for (int i = 0; i < n; ++i) {
      dive_k += nab(i, i, k);
      dE_k += nab(k, i, i);
      eDV_k += jet.e(k, i) * V.grad[i];
    }
    const double U_k = V.value * s2 * (dive_k - dE_k) + E * V.grad[k] - s2 * eDV_k;
    U[k] = s2 * U_k;
  }
  return U;
}

// Divergence of U assembled term by term from the family jets and the
// potential's closed forms (independent of the linearized_scalar code path).
inline double div_U_analytic(const PerturbationFamily& f, const Potential& V, const Point& p) {
  const MetricJet jet = evaluate_jet(f, p);
  const auto [nab, nab2] = covariant_jets(jet, p);
  const int n = p.dim();
  const double s2 = p.xn * p.xn, s4 = s2 * s2;

  double E = 0.0, divdive = 0.0, lapE = 0.0, laplaceV = 0.0, e_hess = 0.0;
  Vec dive(n), dE(n);
  for (int k = 0; k < n; ++k) {
    double a = 0.0, b2 = 0.0;
    for (int i = 0; i < n; ++i) {
      a += nab(i, i, k);
      b2 += nab(k, i, i);
    }
    dive[k] = s2 * a;
    dE[k] = s2 * b2;
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      divdive += nab2(k, i, i, k);
      lapE += nab2(k, k, i, i);
    }
  divdive *= s4;
  lapE *= s4;
  for (int i = 0; i < n; ++i) {
    E += jet.e(i, i);
    laplaceV += V.hess(i, i);
    for (int j = 0; j < n; ++j) e_hess += jet.e(i, j) * V.hess(i, j);
  }
  E *= s2;
  laplaceV *= s2;
  e_hess *= s4;

  double t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0;
  for (int k = 0; k < n; ++k) {
    t1 += s2 * V.grad[k] * dive[k];
    t2 -= s2 * V.grad[k] * dE[k];
    t3 += s2 * dE[k] * V.grad[k];
    t4 -= s2 * dive[k] * V.grad[k];
  }
  t1 += V.value * divdive;
  t2 -= V.value * lapE;
  t3 += E * laplaceV;
  t4 -= e_hess;
  return t1 + t2 + t3 + t4;
}

// ---------------------------------------------------------------------------
// Regions

enum class RegionKind {
  C_eps,
  F_eps,
  S_eps,
  c_eps,
  s_eps,
  annulus,
  a_strip,
  I1,
  I2,
  I3,
  I4,
  C_mirror,
  F_mirror,
  S_mirror
};

struct RegionSpec {
  RegionKind kind = RegionKind::C_eps;
  int n = 3;
  double eps = 0.5;    // primary epsilon (eps_1 for two-parameter regions)
  double eps2 = 0.0;   // eps_2 < eps for annulus/a_strip/I_k
  double alpha = 1.5;  // rho(eps) = eps^{-alpha}

  double rho(double e) const { return std::pow(e, -alpha); }
  bool two_eps() const {
    return kind == RegionKind::annulus || kind == RegionKind::a_strip ||
           kind == RegionKind::I1 || kind == RegionKind::I2 || kind == RegionKind::I3 ||
           kind == RegionKind::I4;
  }
  void check() const {
    if (n != 3 && n != 4)
      throw std::invalid_argument("RegionSpec: quadrature charts support n in {3,4}");
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("RegionSpec: eps must be in (0,1)");
    // eps2 == eps describes an empty annulus, which integrates to zero
    if (two_eps() && !(eps2 > 0.0 && eps2 <= eps))
      throw std::invalid_argument("RegionSpec: need 0 < eps2 <= eps");
    if (!(alpha > 0.0)) throw std::invalid_argument("RegionSpec: alpha must be positive");
  }
};

enum class MeasureConvention { background, metric };

namespace region_detail {

// Builds the tangential coordinates from radius s and angles.
inline void hatx_from_polar(int n, double s, const double* ang, Vec& hx, Mat* dcols = nullptr) {
  if (n == 3) {
    const double c = std::cos(ang[0]), si = std::sin(ang[0]);
    hx.resize(2);
    hx << s * c, s * si;
    if (dcols) {
      // columns: d/ds, d/dtheta
      dcols->resize(2, 2);
      (*dcols) << c, -s * si, si, s * c;
    }
  } else {
    const double cph = std::cos(ang[0]), sph = std::sin(ang[0]);
    const double cth = std::cos(ang[1]), sth = std::sin(ang[1]);
    hx.resize(3);
    hx << s * sph * cth, s * sph * sth, s * cph;
    if (dcols) {
      // columns: d/ds, d/dphi, d/dtheta
      dcols->resize(3, 3);
      (*dcols) << sph * cth, s * cph * cth, -s * sph * sth,
                  sph * sth, s * cph * sth, s * sph * cth,
                  cph, -s * sph, 0.0;
    }
  }
}

struct Solid {
  std::vector<std::array<double, 2>> box;  // (s, angles..., t)
};

// angle boxes per dimension
inline std::vector<std::array<double, 2>> angle_box(int n) {
  if (n == 3) return {{{0.0, 6.283185307179586476925287}}};
  return {{{0.0, 3.14159265358979323846}, {0.0, 6.283185307179586476925287}}};
}

}  // namespace region_detail

// Integrate a pointwise scalar against the background measure of the region
// (volume on solids, induced area on hypersurface facets, induced length on
// the ring s_eps). For MeasureConvention::metric the measure of g = b + e is
// used instead (the family must then be supplied).
struct RegionIntegrand {
  std::function<double(const Point&)> f;
  MeasureConvention convention = MeasureConvention::background;
  const PerturbationFamily* family = nullptr;  // required for metric convention
  std::function<Mat(const Point&)> metric_override;  // wins over convention when set
};

inline QuadratureResult region_quadrature(const RegionSpec& region, const RegionIntegrand& ri,
                                          const QuadratureSpec& spec) {
  region.check();
  const int n = region.n;
  const auto angles = region_detail::angle_box(n);
  const int na = static_cast<int>(angles.size());

  const auto metric_at = [&](const Point& p) -> Mat {
    if (ri.metric_override) return ri.metric_override(p);
    if (ri.convention == MeasureConvention::background) return metric_b(p);
    if (!ri.family) throw std::invalid_argument("region_quadrature: metric convention needs family");
    return evaluate_jet(*ri.family, p).g;
  };

  // ---- solids: params (s, angles, t), Lebesgue jac s^{n-2} * sin(phi)
  const auto solid_result = [&](std::vector<std::array<double, 2>> sbox,
                                std::vector<std::array<double, 2>> tbox) {
    QuadratureResult total;
    for (auto& sb : sbox)
      for (auto& tb : tbox) {
        std::vector<std::array<double, 2>> box;
        box.push_back(sb);
        for (auto& a : angles) box.push_back(a);
        box.push_back(tb);
        auto res = integrate_box(
            [&](const double* u) {
              const double s = u[0];
              const double t = u[1 + na];
              Vec hx;
              region_detail::hatx_from_polar(n, s, u + 1, hx);
              const Point p(hx, t);
              double jac = (n == 3) ? s : s * s * std::sin(u[1]);
              const double dens = std::sqrt(metric_at(p).determinant());
              return ri.f(p) * dens * jac;
            },
            box, spec);
        total.value += res.value;
        total.error_estimate += res.error_estimate;
        total.warning = total.warning || res.warning;
        total.cells += res.cells;
      }
    return total;
  };

  // ---- facets at fixed t: params (s, angles)
  const auto disc_result = [&](double t, double s0, double s1) {
    std::vector<std::array<double, 2>> box;
    box.push_back({s0, s1});
    for (auto& a : angles) box.push_back(a);
    return integrate_box(
        [&](const double* u) {
          const double s = u[0];
          Vec hx;
          Mat dcols;
          region_detail::hatx_from_polar(n, s, u + 1, hx, &dcols);
          const Point p(hx, t);
          // ambient Jacobian: columns are tangent vectors, x^n fixed
          Mat J = Mat::Zero(n, n - 1);
          J.topLeftCorner(n - 1, n - 1) = dcols;
          const Mat M = metric_at(p);
          const double area = std::sqrt((J.transpose() * M * J).determinant());
          return ri.f(p) * area;
        },
        box, spec);
  };

  // ---- lateral facets at fixed s: params (angles, t)
  const auto lateral_result = [&](double s, double t0, double t1) {
    std::vector<std::array<double, 2>> box;
    for (auto& a : angles) box.push_back(a);
    box.push_back({t0, t1});
    return integrate_box(
        [&](const double* u) {
          const double t = u[na];
          Vec hx;
          Mat dcols;
          region_detail::hatx_from_polar(n, s, u, hx, &dcols);
          const Point p(hx, t);
          Mat J = Mat::Zero(n, na + 1);
          J.topLeftCorner(n - 1, na) = dcols.rightCols(na);  // angle directions
          J(n - 1, na) = 1.0;                                // t direction
          const Mat M = metric_at(p);
          const double area = std::sqrt((J.transpose() * M * J).determinant());
          return ri.f(p) * area;
        },
        box, spec);
  };

  // ---- the ring s_eps: params (angles) only
  const auto ring_result = [&](double s, double t) {
    std::vector<std::array<double, 2>> box = angles;
    return integrate_box(
        [&](const double* u) {
          Vec hx;
          Mat dcols;
          region_detail::hatx_from_polar(n, s, u, hx, &dcols);
          const Point p(hx, t);
          Mat J = Mat::Zero(n, na);
          J.topLeftCorner(n - 1, na) = dcols.rightCols(na);
          const Mat M = metric_at(p);
          const double len = std::sqrt((J.transpose() * M * J).determinant());
          return ri.f(p) * len;
        },
        box, spec);
  };

  const double r1 = region.rho(region.eps);
  const double r2 = region.two_eps() ? region.rho(region.eps2) : 0.0;
  switch (region.kind) {
    case RegionKind::C_eps:
      return solid_result({{{0.0, r1}}}, {{{region.eps, 1.0}}});
    case RegionKind::F_eps:
      return disc_result(region.eps, 0.0, r1);
    case RegionKind::S_eps:
      return lateral_result(r1, region.eps, 1.0);
    case RegionKind::c_eps:
      return disc_result(1.0, 0.0, r1);
    case RegionKind::s_eps:
      return ring_result(r1, 1.0);
    case RegionKind::annulus: {
      auto a = solid_result({{{0.0, r2}}}, {{{region.eps2, region.eps}}});
      auto b2 = solid_result({{{r1, r2}}}, {{{region.eps, 1.0}}});
      a.value += b2.value;
      a.error_estimate += b2.error_estimate;
      a.warning = a.warning || b2.warning;
      a.cells += b2.cells;
      return a;
    }
    case RegionKind::a_strip:
      return disc_result(1.0, r1, r2);
    case RegionKind::I1:
      return solid_result({{{r1, r2}}}, {{{region.eps, 1.0}}});
    case RegionKind::I2:
      return solid_result({{{0.0, r2}}}, {{{region.eps2, region.eps}}});
    case RegionKind::I3:
      return solid_result({{{r1, r2}}}, {{{1.0, 1.0 / region.eps}}});
    case RegionKind::I4:
      return solid_result({{{0.0, r2}}}, {{{1.0 / region.eps, 1.0 / region.eps2}}});
    case RegionKind::C_mirror:
      return solid_result({{{0.0, r1}}}, {{{1.0, 1.0 / region.eps}}});
    case RegionKind::F_mirror:
      return disc_result(1.0 / region.eps, 0.0, r1);
    case RegionKind::S_mirror:
      return lateral_result(r1, 1.0, 1.0 / region.eps);
  }
  throw std::logic_error("region_quadrature: unhandled region kind");
}

// b-volume of a region (handy oracle hook).
inline QuadratureResult region_volume(const RegionSpec& region, const QuadratureSpec& spec) {
  RegionIntegrand ri;
  ri.f = [](const Point&) { return 1.0; };
  return region_quadrature(region, ri, spec);
}

// Volume integral over the explicit cylinder {s0<=|hat x|<=s1, t0<=x^n<=t1}
// against the chosen volume measure; used to localise oracles on supports.
inline QuadratureResult cylinder_quadrature(int n, double s0, double s1, double t0, double t1,
                                            const RegionIntegrand& ri,
                                            const QuadratureSpec& spec) {
  const auto angles = region_detail::angle_box(n);
  const int na = static_cast<int>(angles.size());
  const auto metric_at = [&](const Point& p) -> Mat {
    if (ri.metric_override) return ri.metric_override(p);
    if (ri.convention == MeasureConvention::background) return metric_b(p);
    return evaluate_jet(*ri.family, p).g;
  };
  std::vector<std::array<double, 2>> box;
  box.push_back({s0, s1});
  for (auto& a : angles) box.push_back(a);
  box.push_back({t0, t1});
  return integrate_box(
      [&](const double* u) {
        const double s = u[0];
        const double t = u[1 + na];
        Vec hx;
        region_detail::hatx_from_polar(n, s, u + 1, hx);
        const Point p(hx, t);
        const double jac = (n == 3) ? s : s * s * std::sin(u[1]);
        return ri.f(p) * std::sqrt(metric_at(p).determinant()) * jac;
      },
      box, spec);
}

// ---------------------------------------------------------------------------
// Flux integrals of U over the inner boundary of C_eps

struct FluxResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool warning = false;
};

namespace flux_detail {

// Unit conormal contraction U^i nu_i on a level facet of psi with gradient
// covector w (coordinate components), against metric M: nu_i = w_i/|w|_M.
inline double contract_unit_conormal(const Vec& U, const Vec& w, const Mat& Minv) {
  const double len = std::sqrt((w.transpose() * Minv * w)(0, 0));
  return U.dot(w) / len;
}

}  // namespace flux_detail

// Integral of U^i nu_i over F_eps and S_eps with nu the outward unit normal
// of C_eps (orientation -1 flips it). Under the background convention the
// normal and area measure are those of b; under the metric convention those
// of g.
inline FluxResult flux_inner(const PerturbationFamily& f, int v_kind, double eps,
                             const RegionSpec& proto, const QuadratureSpec& spec,
                             MeasureConvention conv = MeasureConvention::background,
                             int orientation = +1) {
  RegionSpec rF = proto;
  rF.kind = RegionKind::F_eps;
  rF.eps = eps;
  RegionSpec rS = proto;
  rS.kind = RegionKind::S_eps;
  rS.eps = eps;
  const int n = proto.n;
  const double rho = proto.rho(eps);

  RegionIntegrand riF;
  riF.convention = conv;
  riF.family = &f;
  riF.f = [&f, v_kind, conv, orientation, n](const Point& p) {
    const MetricJet jet = evaluate_jet(f, p);
    const Potential V = potential(v_kind, p);
    const Vec U = mass_integrand_U(jet, V, p);
    Vec w = Vec::Zero(n);
    w[n - 1] = -1.0;  // outward on F_eps points downward
    const Mat Minv =
        (conv == MeasureConvention::background) ? inverse_b(p) : Mat(jet.g.inverse());
    return orientation * flux_detail::contract_unit_conormal(U, w, Minv);
  };
  auto resF = region_quadrature(rF, riF, spec);

  RegionIntegrand riS;
  riS.convention = conv;
  riS.family = &f;
  riS.f = [&f, v_kind, conv, orientation, n, rho](const Point& p) {
    const MetricJet jet = evaluate_jet(f, p);
    const Potential V = potential(v_kind, p);
    const Vec U = mass_integrand_U(jet, V, p);
    Vec w = Vec::Zero(n);
    for (int a = 0; a < n - 1; ++a) w[a] = p.hat_x[a] / rho;  // outward radial
    const Mat Minv =
        (conv == MeasureConvention::background) ? inverse_b(p) : Mat(jet.g.inverse());
    return orientation * flux_detail::contract_unit_conormal(U, w, Minv);
  };
  auto resS = region_quadrature(rS, riS, spec);

  FluxResult r;
  r.value = resF.value + resS.value;
  r.error_estimate = resF.error_estimate + resS.error_estimate;
  r.warning = resF.warning || resS.warning;
  return r;
}

// Separate facet contributions, used by reports.
inline std::pair<FluxResult, FluxResult> flux_inner_facets(const PerturbationFamily& f,
                                                           int v_kind, double eps,
                                                           const RegionSpec& proto,
                                                           const QuadratureSpec& spec,
                                                           MeasureConvention conv) {
  RegionSpec rF = proto;
  rF.kind = RegionKind::F_eps;
  rF.eps = eps;
  RegionSpec rS = proto;
  rS.kind = RegionKind::S_eps;
  rS.eps = eps;
  const int n = proto.n;
  const double rho = proto.rho(eps);

  const auto make = [&](bool lateral) {
    RegionIntegrand ri;
    ri.convention = conv;
    ri.family = &f;
    ri.f = [&f, v_kind, conv, n, rho, lateral](const Point& p) {
      const MetricJet jet = evaluate_jet(f, p);
      const Potential V = potential(v_kind, p);
      const Vec U = mass_integrand_U(jet, V, p);
      Vec w = Vec::Zero(n);
      if (lateral)
        for (int a = 0; a < n - 1; ++a) w[a] = p.hat_x[a] / rho;
      else
        w[n - 1] = -1.0;
      const Mat Minv =
          (conv == MeasureConvention::background) ? inverse_b(p) : Mat(jet.g.inverse());
      return flux_detail::contract_unit_conormal(U, w, Minv);
    };
    return ri;
  };
  RegionIntegrand riF = make(false), riS = make(true);
  auto resF = region_quadrature(rF, riF, spec);
  auto resS = region_quadrature(rS, riS, spec);
  FluxResult a{resF.value, resF.error_estimate, resF.warning};
  FluxResult b2{resS.value, resS.error_estimate, resS.warning};
  return {a, b2};
}

// Flux of U through the horosphere face c_eps with the normal eta = d_n
// (needed by divergence-theorem oracles when the support reaches the slice).
inline FluxResult flux_horosphere(const PerturbationFamily& f, int v_kind, double eps,
                                  const RegionSpec& proto, const QuadratureSpec& spec,
                                  MeasureConvention conv = MeasureConvention::background) {
  RegionSpec rc = proto;
  rc.kind = RegionKind::c_eps;
  rc.eps = eps;
  const int n = proto.n;
  RegionIntegrand ri;
  ri.convention = conv;
  ri.family = &f;
  ri.f = [&f, v_kind, conv, n](const Point& p) {
    const MetricJet jet = evaluate_jet(f, p);
    const Potential V = potential(v_kind, p);
    const Vec U = mass_integrand_U(jet, V, p);
    Vec w = Vec::Zero(n);
    w[n - 1] = 1.0;  // outward through the slice
    const Mat Minv =
        (conv == MeasureConvention::background) ? inverse_b(p) : Mat(jet.g.inverse());
    return flux_detail::contract_unit_conormal(U, w, Minv);
  };
  auto res = region_quadrature(rc, ri, spec);
  return {res.value, res.error_estimate, res.warning};
}

// Boundary correction: integral over s_eps of V e_{an} mu^a with mu the
// outward unit normal of the ring within the horosphere.
inline FluxResult boundary_correction(const PerturbationFamily& f, int v_kind, double eps,
                                      const RegionSpec& proto, const QuadratureSpec& spec,
                                      MeasureConvention conv = MeasureConvention::background) {
  RegionSpec rs = proto;
  rs.kind = RegionKind::s_eps;
  rs.eps = eps;
  const int n = proto.n;
  const double rho = proto.rho(eps);
  RegionIntegrand ri;
  ri.convention = conv;
  ri.family = &f;
  ri.f = [&f, v_kind, conv, n, rho](const Point& p) {
    const MetricJet jet = evaluate_jet(f, p);
    const Potential V = potential(v_kind, p);
    const int nn = n - 1;
    Vec w(nn);  // radial covector on the slice
    for (int a = 0; a < nn; ++a) w[a] = p.hat_x[a] / rho;
    Vec mu(nn);
    if (conv == MeasureConvention::background) {
      mu = w;  // induced b-metric on the slice is delta
    } else {
      const Mat h = jet.g.topLeftCorner(nn, nn).inverse();
      const Vec raw = h * w;
      mu = raw / std::sqrt(w.dot(raw));
    }
    double s = 0.0;
    for (int a = 0; a < nn; ++a) s += jet.e(a, nn) * mu[a];
    return V.value * s;
  };
  auto res = region_quadrature(rs, ri, spec);
  return {res.value, res.error_estimate, res.warning};
}

// ---------------------------------------------------------------------------
// Mass

struct MassRow {
  double eps = 0.0;
  double flux_F = 0.0;
  double flux_S = 0.0;
  double correction_s = 0.0;
  double M_eps = 0.0;
  double quad_error = 0.0;
  bool warning = false;
};

struct MassReport {
  std::vector<MassRow> rows;
  std::vector<double> cauchy;  // |M_{j+1} - M_j|
  double extrapolated = 0.0;
  double rate_beta = 0.0;
  double fit_residual = 0.0;
  bool converged = false;
  std::string status;
};

inline std::vector<double> geometric_schedule(double eps0, int count) {
  std::vector<double> s;
  for (int j = 0; j < count; ++j) s.push_back(eps0 * std::pow(2.0, -j));
  return s;
}

inline MassRow mass_at_eps(const PerturbationFamily& f, int v_kind, double eps,
                           const RegionSpec& proto, const QuadratureSpec& spec,
                           MeasureConvention conv = MeasureConvention::background) {
  auto [fF, fS] = flux_inner_facets(f, v_kind, eps, proto, spec, conv);
  auto corr = boundary_correction(f, v_kind, eps, proto, spec, conv);
  MassRow row;
  row.eps = eps;
  row.flux_F = fF.value;
  row.flux_S = fS.value;
  row.correction_s = corr.value;
  row.M_eps = fF.value + fS.value - corr.value;
  row.quad_error = fF.error_estimate + fS.error_estimate + corr.error_estimate;
  row.warning = fF.warning || fS.warning || corr.warning;
  return row;
}

inline MassReport mass(const PerturbationFamily& f, int v_kind,
                       const std::vector<double>& schedule, const RegionSpec& proto,
                       const QuadratureSpec& spec,
                       MeasureConvention conv = MeasureConvention::background) {
  if (schedule.size() < 4)
    throw std::invalid_argument("mass: schedule needs at least 4 strictly decreasing points");
  for (std::size_t j = 1; j < schedule.size(); ++j)
    if (!(schedule[j] < schedule[j - 1]))
      throw std::invalid_argument("mass: schedule must be strictly decreasing");

  MassReport rep;
  for (double eps : schedule) rep.rows.push_back(mass_at_eps(f, v_kind, eps, proto, spec, conv));
  for (std::size_t j = 1; j < rep.rows.size(); ++j)
    rep.cauchy.push_back(std::abs(rep.rows[j].M_eps - rep.rows[j - 1].M_eps));

  // two-parameter fit M + C eps^beta on the last four points; raw rows are
  // always reported
  std::vector<double> es, ms;
  const std::size_t m0 = rep.rows.size() >= 4 ? rep.rows.size() - 4 : 0;
  for (std::size_t j = m0; j < rep.rows.size(); ++j) {
    es.push_back(rep.rows[j].eps);
    ms.push_back(rep.rows[j].M_eps);
  }
  const RateFit fit = fit_limit_rate(es, ms);
  rep.extrapolated = fit.ok ? fit.limit : rep.rows.back().M_eps;
  rep.rate_beta = fit.rate;
  rep.fit_residual = fit.rms_residual;

  // Cauchy diagnostic: differences must not grow beyond quadrature noise
  bool cauchy_ok = true;
  const double noise = 10.0 * (rep.rows.back().quad_error + 1e-14);
  for (std::size_t j = 1; j < rep.cauchy.size(); ++j)
    if (rep.cauchy[j] > std::max(rep.cauchy[j - 1] * 1.5, noise)) cauchy_ok = false;
  rep.converged = cauchy_ok;
  rep.status = cauchy_ok ? "ok" : "non-cauchy";
  return rep;
}

}  // namespace horomass
