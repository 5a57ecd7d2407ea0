#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "horomass/geometry.hpp"
#include "horomass/jets.hpp"
#include "horomass/tensor.hpp"
#include "horomass/util.hpp"

// Metric perturbation families e = g - b with analytic coordinate jets up to
// second order, their background-covariant derivatives, and decay audits.

namespace horomass {

struct MetricJet {
  Point at;
  Mat g, e;        // g = b + e
  Rank3 dg, de;    // dg(k,i,j) = d_k g_{ij}
  Rank4 ddg, dde;  // ddg(l,k,i,j) = d_l d_k g_{ij}
  int dim() const { return at.dim(); }
};

enum class FamilyKind { zero, bump, tail, gauge, conformal_tail };

// One additive building block of a family.
struct FamilyTerm {
  FamilyKind kind = FamilyKind::zero;
  double weight = 1.0;
  // bump / gauge
  Vec center;
  double rho0 = 0.0;
  Mat A;   // bump amplitude / tail leading matrix
  Mat B;   // tail secondary matrix (coefficient of x^1/cosh r)
  Vec a;   // gauge vector direction
  double tau = 0.0;  // tail exponent actually used by this term
};

struct SupportBall {
  Vec center;
  double radius;
};

struct PerturbationFamily {
  int n = 3;
  double tau = 0.0;  // declared decay exponent (> n/2)
  std::string label;
  std::vector<FamilyTerm> terms;
  std::optional<SupportBall> support;  // empty: supported everywhere

  PerturbationFamily scaled(double s) const {
    PerturbationFamily f = *this;
    for (auto& t : f.terms) t.weight *= s;
    return f;
  }
  PerturbationFamily operator+(const PerturbationFamily& o) const {
    PerturbationFamily f = *this;
    f.terms.insert(f.terms.end(), o.terms.begin(), o.terms.end());
    if (!(support && o.support && (support->center - o.support->center).norm() < 1e-300 &&
          support->radius == o.support->radius))
      f.support.reset();
    f.label = label + "+" + o.label;
    return f;
  }
};

// ---------------------------------------------------------------------------
// Built-in families

inline void check_tau(int n, double tau) {
  if (!(tau > 0.5 * n))
    throw std::invalid_argument("PerturbationFamily: tau must exceed n/2");
}

inline PerturbationFamily zero_family(int n, double tau) {
  check_tau(n, tau);
  PerturbationFamily f;
  f.n = n;
  f.tau = tau;
  f.label = "zero";
  return f;
}

// e_ij = A_ij * exp(1/(q^2-1)), q = |x-c|/rho0 < 1.
inline PerturbationFamily bump_family(int n, const Mat& A, const Vec& center, double rho0,
                                      double tau) {
  check_tau(n, tau);
  PerturbationFamily f;
  f.n = n;
  f.tau = tau;
  f.label = "bump";
  FamilyTerm t;
  t.kind = FamilyKind::bump;
  t.A = 0.5 * (A + A.transpose());
  t.center = center;
  t.rho0 = rho0;
  f.terms.push_back(t);
  f.support = SupportBall{center, rho0};
  return f;
}

// e_ij = cosh^{-tau} r * (x^n)^{-2} * (A_ij + B_ij * x^1/cosh r): bounded
// b-norm profile times the exact decay factor, sharp in every direction.
inline PerturbationFamily tail_family(int n, const Mat& A, const Mat& B, double tau,
                                      double declared_tau = -1.0) {
  PerturbationFamily f;
  f.n = n;
  f.tau = declared_tau > 0 ? declared_tau : tau;
  check_tau(n, f.tau);
  f.label = "tail";
  FamilyTerm t;
  t.kind = FamilyKind::tail;
  t.A = 0.5 * (A + A.transpose());
  t.B = 0.5 * (B + B.transpose());
  t.tau = tau;
  f.terms.push_back(t);
  return f;
}

// e = c * cosh^{-q} r * b. For q = n the linearized scalar curvature reduces
// to (n-1)n(n+1) cosh^{-n-2} r, so the mass-existence integrability
// hypotheses hold and the mass converges (generically to a nonzero value).
inline PerturbationFamily conformal_tail_family(int n, double c, double q = -1.0) {
  PerturbationFamily f;
  f.n = n;
  f.tau = q > 0 ? q : n;
  check_tau(n, f.tau);
  f.label = "masstail";
  FamilyTerm t;
  t.kind = FamilyKind::conformal_tail;
  t.weight = c;
  t.tau = f.tau;
  f.terms.push_back(t);
  return f;
}

inline PerturbationFamily default_conformal_tail_family(int n) {
  return conformal_tail_family(n, 0.4);
}

// e = L_X b for X^i = a^i * exp(1/(q^2-1)) supported in the ball.
inline PerturbationFamily gauge_family(int n, const Vec& a, const Vec& center, double rho0,
                                       double tau) {
  check_tau(n, tau);
  PerturbationFamily f;
  f.n = n;
  f.tau = tau;
  f.label = "gauge";
  FamilyTerm t;
  t.kind = FamilyKind::gauge;
  t.a = a;
  t.center = center;
  t.rho0 = rho0;
  f.terms.push_back(t);
  f.support = SupportBall{center, rho0};
  return f;
}

// Default parameter sets used by the CLI and tests.
inline Mat default_bump_matrix(int n) {
  Mat A = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) A(i, i) = 0.25 - 0.07 * i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) A(i, j) = A(j, i) = 0.06 + 0.02 * (i + j);
  return A;
}

inline Point default_bump_center_point(int n) { return Point(Vec::Zero(n - 1), 0.5); }

inline PerturbationFamily default_bump_family(int n, double tau) {
  return bump_family(n, default_bump_matrix(n), default_bump_center_point(n).coords(), 0.3, tau);
}

inline PerturbationFamily default_tail_family(int n, double tau) {
  Mat A = Mat::Zero(n, n), B = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) A(i, i) = 0.30 - 0.05 * i;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) A(i, j) = A(j, i) = 0.08 + 0.01 * (i + j);
  for (int i = 0; i < n; ++i) B(i, i) = 0.10 + 0.02 * i;
  B(0, n - 1) = B(n - 1, 0) = 0.12;
  return tail_family(n, A, B, tau);
}

inline PerturbationFamily default_gauge_family(int n, double tau) {
  Vec a(n);
  for (int i = 0; i < n; ++i) a[i] = 0.05 - 0.01 * i;
  Vec c = Vec::Zero(n);
  c[n - 1] = 0.5;
  return gauge_family(n, a, c, 0.3, tau);
}

// ---------------------------------------------------------------------------
// Jet evaluation

namespace detail {

inline void accumulate_term(const FamilyTerm& t, const Point& p, Mat& e, Rank3& de, Rank4& dde) {
  const int n = p.dim();
  const double w = t.weight;
  switch (t.kind) {
    case FamilyKind::zero:
      return;
    case FamilyKind::bump: {
      if ((p.coords() - t.center).norm() >= t.rho0) return;  // exact support contract
      const Jet2 Bj = bump_jet2(p, t.center, t.rho0);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double Aij = w * t.A(i, j);
          if (Aij == 0.0) continue;
          e(i, j) += Aij * Bj.v;
          for (int k = 0; k < n; ++k) {
            de.at(k, i, j) += Aij * Bj.d[k];
            for (int l = 0; l < n; ++l) dde.at(l, k, i, j) += Aij * Bj.dd(l, k);
          }
        }
      return;
    }
    case FamilyKind::tail: {
      const Jet2 u = coshr_jet(p);
      const Jet2 sigma = xn_pow_jet(p, -2.0);
      const Jet2 phi = u.pow(-t.tau) * sigma;           // cosh^{-tau} r * (x^n)^{-2}
      const Jet2 w1 = Jet2::coordinate(p, 0) * u.reciprocal();
      const Jet2 psi = phi * w1;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          const double Aij = w * t.A(i, j), Bij = w * t.B(i, j);
          e(i, j) += Aij * phi.v + Bij * psi.v;
          for (int k = 0; k < n; ++k) {
            de.at(k, i, j) += Aij * phi.d[k] + Bij * psi.d[k];
            for (int l = 0; l < n; ++l)
              dde.at(l, k, i, j) += Aij * phi.dd(l, k) + Bij * psi.dd(l, k);
          }
        }
      return;
    }
    case FamilyKind::conformal_tail: {
      const Jet2 phi = coshr_jet(p).pow(-t.tau) * xn_pow_jet(p, -2.0);
      for (int i = 0; i < n; ++i) {
        e(i, i) += w * phi.v;
        for (int k = 0; k < n; ++k) {
          de.at(k, i, i) += w * phi.d[k];
          for (int l = 0; l < n; ++l) dde.at(l, k, i, i) += w * phi.dd(l, k);
        }
      }
      return;
    }
    case FamilyKind::gauge: {
      if ((p.coords() - t.center).norm() >= t.rho0) return;
      // X_j = (x^n)^{-2} a^j B(x); e_ij = d_i X_j + d_j X_i - 2 Gbar^k_ij X_k
      const Jet3 q = xn_pow_jet3(p, -2.0) * bump_jet3(p, t.center, t.rho0);
      const auto G = [&](int k, int i, int j) { return christoffel_b_entry(p, k, i, j); };
      const auto dG = [&](int m, int k, int i, int j) { return dchristoffel_b(p, m, k, i, j); };
      const auto ddG = [&](int l, int m, int k, int i, int j) {
        return ddchristoffel_b(p, l, m, k, i, j);
      };
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double gx = 0;
          for (int k = 0; k < n; ++k) gx += G(k, i, j) * t.a[k];
          e(i, j) += w * (q.d[i] * t.a[j] + q.d[j] * t.a[i] - 2.0 * gx * q.v);
          for (int m = 0; m < n; ++m) {
            double dgx = 0;
            for (int k = 0; k < n; ++k) dgx += dG(m, k, i, j) * t.a[k];
            de.at(m, i, j) += w * (q.dd(m, i) * t.a[j] + q.dd(m, j) * t.a[i] -
                                   2.0 * (dgx * q.v + gx * q.d[m]));
            for (int l = 0; l < n; ++l) {
              double ddgx = 0, dgl = 0;
              for (int k = 0; k < n; ++k) {
                ddgx += ddG(l, m, k, i, j) * t.a[k];
                dgl += dG(l, k, i, j) * t.a[k];
              }
              dde.at(l, m, i, j) +=
                  w * (q.d3(l, m, i) * t.a[j] + q.d3(l, m, j) * t.a[i] -
                       2.0 * (ddgx * q.v + dgx * q.d[l] + dgl * q.d[m] + gx * q.dd(l, m)));
            }
          }
        }
      return;
    }
  }
}

}  // namespace detail

struct DegenerateMetricError : std::runtime_error {
  explicit DegenerateMetricError(const std::string& msg) : std::runtime_error(msg) {}
};

inline MetricJet evaluate_jet(const PerturbationFamily& f, const Point& p) {
  p.check();
  const int n = p.dim();
  if (n != f.n) throw std::invalid_argument("evaluate_jet: dimension mismatch");
  MetricJet jet;
  jet.at = p;
  jet.e = Mat::Zero(n, n);
  jet.de = Rank3(n);
  jet.dde = Rank4(n);
  for (const auto& t : f.terms) detail::accumulate_term(t, p, jet.e, jet.de, jet.dde);

  jet.g = metric_b(p) + jet.e;
  jet.dg = jet.de;
  jet.ddg = jet.dde;
  for (int i = 0; i < n; ++i) {
    jet.dg.at(n - 1, i, i) += dmetric_b(p, n - 1, i, i);
    jet.ddg.at(n - 1, n - 1, i, i) += ddmetric_b(p, n - 1, n - 1, i, i);
  }

  Eigen::LLT<Mat> llt(jet.g);
  if (llt.info() != Eigen::Success)
    throw DegenerateMetricError("evaluate_jet: g not positive definite at x^n=" +
                                std::to_string(p.xn));
  return jet;
}

// ---------------------------------------------------------------------------
// Background-covariant derivatives assembled from the coordinate jets.
// With use_connection = false the background symbols are zeroed (test hook).

inline std::pair<Rank3, Rank4> covariant_jets(const MetricJet& jet, const Point& p,
                                              bool use_connection = true) {
  const int n = p.dim();
  const double conn = use_connection ? 1.0 : 0.0;
  Christoffel3 G = christoffel_b(p);

  Rank3 nabla(n);  // nabla(k,i,j) = \bar\nabla_k e_{ij}
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double v = jet.de(k, i, j);
        for (int m = 0; m < n; ++m)
          v -= conn * (G(m, k, i) * jet.e(m, j) + G(m, k, j) * jet.e(i, m));
        nabla.at(k, i, j) = v;
      }

  // coordinate derivative of nabla(k,i,j)
  Rank4 dnabla(n);
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = jet.dde(l, k, i, j);
          for (int m = 0; m < n; ++m) {
            v -= conn * (dchristoffel_b(p, l, m, k, i) * jet.e(m, j) +
                         G(m, k, i) * jet.de(l, m, j) +
                         dchristoffel_b(p, l, m, k, j) * jet.e(i, m) +
                         G(m, k, j) * jet.de(l, i, m));
          }
          dnabla.at(l, k, i, j) = v;
        }

  Rank4 nabla2(n);  // nabla2(l,k,i,j) = \bar\nabla_l \bar\nabla_k e_{ij}
  for (int l = 0; l < n; ++l)
    for (int k = 0; k < n; ++k)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double v = dnabla(l, k, i, j);
          for (int m = 0; m < n; ++m) {
            v -= conn * (G(m, l, k) * nabla(m, i, j) + G(m, l, i) * nabla(k, m, j) +
                         G(m, l, j) * nabla(k, i, m));
          }
          nabla2.at(l, k, i, j) = v;
        }
  return {nabla, nabla2};
}

// |e|_b + |nabla e|_b + |nabla nabla e|_b at a point.
inline double decay_quantity(const PerturbationFamily& f, const Point& p) {
  const MetricJet jet = evaluate_jet(f, p);
  const auto [n1, n2] = covariant_jets(jet, p);
  const double s2 = bnorm_scale(p, 2, 0), s3 = bnorm_scale(p, 3, 0), s4 = bnorm_scale(p, 4, 0);
  return jet.e.norm() * s2 + n1.flat().norm() * s3 + n2.flat().norm() * s4;
}

struct DecayReport {
  std::vector<double> radii;
  std::vector<double> sup_at_radius;  // sup over sampled directions of cosh^0-weighted quantity
  double sup_weighted = 0.0;          // sup of cosh^{tau} r * quantity
  double slope = 0.0;                 // LS slope of log(quantity) vs r
  bool pass = false;
  double tau = 0.0;
};

// Samples geodesic spheres about o on the {x^n <= 1} side, always including
// the downward axis direction.
inline DecayReport decay_audit(const PerturbationFamily& f, double rmin, double rmax,
                               int samples, Rng& rng, int directions_per_radius = 24) {
  if (!(rmin < rmax) || samples < 2)
    throw std::invalid_argument("decay_audit: need rmin < rmax and samples >= 2");
  const int n = f.n;
  DecayReport rep;
  rep.tau = f.tau;
  std::vector<double> log_q, rs;
  for (int si = 0; si < samples; ++si) {
    const double r = rmin + (rmax - rmin) * si / (samples - 1.0);
    const double tmin = std::tanh(0.5 * r);  // cos(theta) >= tanh(r/2) keeps x^n <= 1
    double q = 0.0;
    for (int d = 0; d < directions_per_radius; ++d) {
      double ct;
      Vec omega;
      if (d == 0) {
        ct = 1.0;  // downward axis
        omega = Vec::Zero(n - 1);
        if (n >= 2) omega[0] = 1.0;
      } else {
        ct = rng.uniform(tmin, 1.0);
        omega = rng.direction(n - 1);
      }
      const Point p = geodesic_sphere_point(n, r, ct, omega);
      q = std::max(q, decay_quantity(f, p));
    }
    rep.radii.push_back(r);
    rep.sup_at_radius.push_back(q);
    rep.sup_weighted = std::max(rep.sup_weighted, std::pow(std::cosh(r), f.tau) * q);
    if (q > 0.0) {
      rs.push_back(r);
      log_q.push_back(std::log(q));
    }
  }
  if (rs.size() < 2) {
    // identically zero family: trivially passes
    rep.slope = -std::numeric_limits<double>::infinity();
    rep.pass = true;
    return rep;
  }
  rep.slope = fit_line(rs, log_q).slope;
  rep.pass = std::isfinite(rep.sup_weighted) && rep.slope <= -f.tau + 0.3;
  return rep;
}

}  // namespace horomass
