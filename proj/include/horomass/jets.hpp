#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "horomass/geometry.hpp"

// Exact scalar jets: value + gradient + Hessian (+ optionally third
// derivatives) propagated through arithmetic and smooth 1-D maps. Families
// supply their metric jets through this algebra so that second derivatives
// are analytic, not finite-differenced.

namespace horomass {

struct Jet2 {
  double v = 0.0;
  Vec d;   // d_i f
  Mat dd;  // d_i d_j f (symmetric)

  Jet2() = default;
  explicit Jet2(int n) : v(0.0), d(Vec::Zero(n)), dd(Mat::Zero(n, n)) {}

  static Jet2 constant(int n, double c) {
    Jet2 j(n);
    j.v = c;
    return j;
  }

  // the coordinate function x^i
  static Jet2 coordinate(const Point& p, int i) {
    Jet2 j(p.dim());
    j.v = p.coord(i);
    j.d[i] = 1.0;
    return j;
  }

  Jet2 operator+(const Jet2& o) const {
    Jet2 r = *this;
    r.v += o.v;
    r.d += o.d;
    r.dd += o.dd;
    return r;
  }
  Jet2 operator-(const Jet2& o) const {
    Jet2 r = *this;
    r.v -= o.v;
    r.d -= o.d;
    r.dd -= o.dd;
    return r;
  }
  Jet2 operator*(double c) const {
    Jet2 r = *this;
    r.v *= c;
    r.d *= c;
    r.dd *= c;
    return r;
  }
  Jet2 operator*(const Jet2& o) const {
    Jet2 r(static_cast<int>(d.size()));
    r.v = v * o.v;
    r.d = v * o.d + o.v * d;
    r.dd = v * o.dd + o.v * dd + d * o.d.transpose() + o.d * d.transpose();
    return r;
  }

  // F(f) for a smooth 1-D map with derivatives F', F'' at f.v
  Jet2 compose(double F, double dF, double ddF) const {
    Jet2 r(static_cast<int>(d.size()));
    r.v = F;
    r.d = dF * d;
    r.dd = dF * dd + ddF * (d * d.transpose());
    return r;
  }

  Jet2 pow(double a) const {
    const double F = std::pow(v, a);
    return compose(F, a * F / v, a * (a - 1.0) * F / (v * v));
  }
  Jet2 reciprocal() const { return compose(1.0 / v, -1.0 / (v * v), 2.0 / (v * v * v)); }
};

inline Jet2 operator*(double c, const Jet2& j) { return j * c; }

// cosh r as a jet; rational in the coordinates, smooth everywhere.
inline Jet2 coshr_jet(const Point& p) {
  const int n = p.dim();
  const int nn = n - 1;
  Jet2 u(n);
  const double t = p.xn;
  const double A = p.hat_x.squaredNorm() + 1.0;
  u.v = (A + t * t) / (2.0 * t);
  for (int a = 0; a < nn; ++a) u.d[a] = p.hat_x[a] / t;
  u.d[nn] = (t * t - A) / (2.0 * t * t);
  for (int a = 0; a < nn; ++a) {
    u.dd(a, a) = 1.0 / t;
    u.dd(a, nn) = u.dd(nn, a) = -p.hat_x[a] / (t * t);
  }
  u.dd(nn, nn) = A / (t * t * t);
  return u;
}

// (x^n)^a as a jet.
inline Jet2 xn_pow_jet(const Point& p, double a) {
  return Jet2::coordinate(p, p.dim() - 1).pow(a);
}

// ---------------------------------------------------------------------------
// Third-order scalar jets, needed only by the gauge family (e = L_X b
// consumes three derivatives of X).

struct Jet3 {
  double v = 0.0;
  Vec d;
  Mat dd;
  Vec ddd;  // flat n^3 table, fully symmetric
  int n = 0;

  Jet3() = default;
  explicit Jet3(int nn)
      : v(0.0), d(Vec::Zero(nn)), dd(Mat::Zero(nn, nn)), ddd(Vec::Zero(nn * nn * nn)), n(nn) {}

  double d3(int a, int b, int c) const { return ddd[(a * n + b) * n + c]; }
  void add3(int a, int b, int c, double val) {
    int idx[3] = {a, b, c};
    // write all 6 permutations so the table stays exactly symmetric
    ddd[(idx[0] * n + idx[1]) * n + idx[2]] = val;
    ddd[(idx[0] * n + idx[2]) * n + idx[1]] = val;
    ddd[(idx[1] * n + idx[0]) * n + idx[2]] = val;
    ddd[(idx[1] * n + idx[2]) * n + idx[0]] = val;
    ddd[(idx[2] * n + idx[0]) * n + idx[1]] = val;
    ddd[(idx[2] * n + idx[1]) * n + idx[0]] = val;
  }

  Jet3 operator+(const Jet3& o) const {
    Jet3 r = *this;
    r.v += o.v;
    r.d += o.d;
    r.dd += o.dd;
    r.ddd += o.ddd;
    return r;
  }
  Jet3 operator*(double c) const {
    Jet3 r = *this;
    r.v *= c;
    r.d *= c;
    r.dd *= c;
    r.ddd *= c;
    return r;
  }

  Jet3 operator*(const Jet3& o) const {
    Jet3 r(n);
    r.v = v * o.v;
    r.d = v * o.d + o.v * d;
    r.dd = v * o.dd + o.v * dd + d * o.d.transpose() + o.d * d.transpose();
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b)
        for (int c = b; c < n; ++c) {
          double val = v * o.d3(a, b, c) + o.v * d3(a, b, c);
          val += dd(a, b) * o.d[c] + dd(a, c) * o.d[b] + dd(b, c) * o.d[a];
          val += o.dd(a, b) * d[c] + o.dd(a, c) * d[b] + o.dd(b, c) * d[a];
          r.add3(a, b, c, val);
        }
    return r;
  }

  // F(f) with 1-D derivatives F', F'', F''' at f.v
  Jet3 compose(double F, double dF, double ddF, double dddF) const {
    Jet3 r(n);
    r.v = F;
    r.d = dF * d;
    r.dd = dF * dd + ddF * (d * d.transpose());
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b)
        for (int c = b; c < n; ++c) {
          double val = dddF * d[a] * d[b] * d[c];
          val += ddF * (dd(a, b) * d[c] + dd(a, c) * d[b] + dd(b, c) * d[a]);
          val += dF * d3(a, b, c);
          r.add3(a, b, c, val);
        }
    return r;
  }

  Jet2 truncate() const {
    Jet2 r(n);
    r.v = v;
    r.d = d;
    r.dd = dd;
    return r;
  }
};

// (x^n)^a to third order.
inline Jet3 xn_pow_jet3(const Point& p, double a) {
  const int n = p.dim();
  Jet3 x(n);
  x.v = p.xn;
  x.d[n - 1] = 1.0;
  const double F = std::pow(p.xn, a);
  const double t = p.xn;
  return x.compose(F, a * F / t, a * (a - 1.0) * F / (t * t),
                   a * (a - 1.0) * (a - 2.0) * F / (t * t * t));
}

// Smooth compactly supported bump exp(1/(w-1)) for w = |x-c|^2/rho0^2 < 1,
// identically 0 for w >= 1, with three analytic derivative orders.
inline Jet3 bump_jet3(const Point& p, const Vec& center, double rho0) {
  const int n = p.dim();
  Jet3 r(n);  // zero outside support
  Vec dx = p.coords() - center;
  const double w = dx.squaredNorm() / (rho0 * rho0);
  if (w >= 1.0) return r;

  Jet3 wj(n);
  wj.v = w;
  wj.d = 2.0 * dx / (rho0 * rho0);
  wj.dd = Mat::Identity(n, n) * (2.0 / (rho0 * rho0));
  // third derivatives of w vanish

  // B = exp(f(w)), f = 1/(w-1)
  const double m = w - 1.0;  // in [-1, 0)
  const double f = 1.0 / m;
  const double f1 = -1.0 / (m * m);
  const double f2 = 2.0 / (m * m * m);
  const double f3 = -6.0 / (m * m * m * m);
  const double B = std::exp(f);
  // chain: derivatives of exp(f(w)) wrt w
  const double dB = B * f1;
  const double ddB = B * (f1 * f1 + f2);
  const double dddB = B * (f1 * f1 * f1 + 3.0 * f1 * f2 + f3);
  return wj.compose(B, dB, ddB, dddB);
}

inline Jet2 bump_jet2(const Point& p, const Vec& center, double rho0) {
  return bump_jet3(p, center, rho0).truncate();
}

}  // namespace horomass
