#pragma once

#include <stdexcept>
#include <string>

#include "horomass/geometry.hpp"

// Static potentials V_0 = 1/x^n, V_k = x^k/x^n and the catalogue of
// (conformal) Killing fields of the upper half-space model. Gradients are
// implemented from the per-case closed-form tables so each table line is
// separately testable; generic differentiation appears only in test oracles.

namespace horomass {

struct Potential {
  int kind = 0;  // 0 -> V_0, k in 1..n-1 -> V_k
  double value = 0.0;
  Vec grad;   // coordinate gradient d_i V
  Mat hess;   // background-covariant Hessian (nabla^2 V)_{ij}
};

inline Potential potential(int kind, const Point& p) {
  p.check();
  const int n = p.dim();
  const int nn = n - 1;
  if (kind < 0 || kind >= n) throw std::out_of_range("potential: kind must be in 0..n-1");
  Potential V;
  V.kind = kind;
  V.grad = Vec::Zero(n);
  Mat ddV = Mat::Zero(n, n);
  const double t = p.xn;
  if (kind == 0) {
    V.value = 1.0 / t;
    V.grad[nn] = -1.0 / (t * t);
    ddV(nn, nn) = 2.0 / (t * t * t);
  } else {
    const int k = kind - 1;  // tangential coordinate index
    const double xk = p.hat_x[k];
    V.value = xk / t;
    V.grad[k] = 1.0 / t;
    V.grad[nn] = -xk / (t * t);
    ddV(k, nn) = ddV(nn, k) = -1.0 / (t * t);
    ddV(nn, nn) = 2.0 * xk / (t * t * t);
  }
  V.hess = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double h = ddV(i, j);
      for (int m = 0; m < n; ++m) h -= christoffel_b_entry(p, m, i, j) * V.grad[m];
      V.hess(i, j) = h;
    }
  return V;
}

// ---------------------------------------------------------------------------

enum class FieldKind { dilation, translation_k, translation_n, quadratic, rotation_kn, Y, Y_k };

inline std::string field_kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::dilation: return "dilation";
    case FieldKind::translation_k: return "translation_k";
    case FieldKind::translation_n: return "translation_n";
    case FieldKind::quadratic: return "quadratic";
    case FieldKind::rotation_kn: return "rotation_kn";
    case FieldKind::Y: return "Y";
    case FieldKind::Y_k: return "Y_k";
  }
  return "?";
}

struct VectorFieldJet {
  FieldKind kind = FieldKind::Y;
  int k = -1;  // tangential index parameter for translation_k / rotation_kn / Y_k
  int k2 = -1; // optional second index: rotation in the (k,k2) tangential plane
  Vec a;       // constant vector parameter of the quadratic field
  Vec X;       // components X^i
  Mat gradX;   // gradX(i,j) = \bar\nabla_i X^j
};

namespace detail {

// table of the quadratic field <x,a> x - 1/2 <x,x> a
inline void quadratic_table(const Point& p, const Vec& a, Vec& X, Mat& M) {
  const int n = p.dim();
  const int nn = n - 1;
  const Vec x = p.coords();
  const double xa = x.dot(a);
  const double xx = x.squaredNorm();
  const double t = p.xn;
  for (int j = 0; j < n; ++j) X[j] = xa * x[j] - 0.5 * xx * a[j];
  for (int i = 0; i < nn; ++i)
    for (int j = 0; j < nn; ++j) M(i, j) = a[i] * x[j] - x[i] * a[j] + ((i == j) ? 0.5 * xx * a[nn] / t : 0.0);
  for (int i = 0; i < nn; ++i)
    M(i, nn) = a[i] * t - x[i] * a[nn] + (xa * x[i] - 0.5 * xx * a[i]) / t;
  for (int j = 0; j < nn; ++j)
    M(nn, j) = a[nn] * x[j] - t * a[j] - (xa * x[j] - 0.5 * xx * a[j]) / t;
  M(nn, nn) = 0.5 * xx * a[nn] / t;
}

// table of the rotation x^n d_k - x^k d_n
inline void rotation_table(const Point& p, int k, Vec& X, Mat& M) {
  const int n = p.dim();
  const int nn = n - 1;
  const double t = p.xn, xk = p.hat_x[k];
  X.setZero();
  X[k] = t;
  X[nn] = -xk;
  M.setZero();
  for (int i = 0; i < nn; ++i) M(i, i) = xk / t;
  M(nn, nn) = xk / t;
}

}  // namespace detail

inline VectorFieldJet vector_field(FieldKind kind, const Point& p, int k = -1,
                                   const Vec& a = Vec(), int k2 = -1) {
  p.check();
  const int n = p.dim();
  const int nn = n - 1;
  const double t = p.xn;
  VectorFieldJet F;
  F.kind = kind;
  F.k = k;
  F.k2 = k2;
  F.X = Vec::Zero(n);
  F.gradX = Mat::Zero(n, n);
  const auto need_k = [&] {
    if (k < 0 || k >= nn)
      throw std::invalid_argument("vector_field: kind needs a tangential index k in 0..n-2");
  };
  switch (kind) {
    case FieldKind::dilation: {
      const Vec x = p.coords();
      F.X = x;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          F.gradX(i, j) = ((j == nn ? x[i] : 0.0) - (i == nn ? x[j] : 0.0)) / t;
      break;
    }
    case FieldKind::translation_k: {
      need_k();
      F.X[k] = 1.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) F.gradX(i, j) = christoffel_b_entry(p, j, i, k);
      break;
    }
    case FieldKind::translation_n: {
      F.X[nn] = 1.0;
      F.gradX = -Mat::Identity(n, n) / t;
      break;
    }
    case FieldKind::quadratic: {
      if (a.size() != n || a.norm() == 0.0)
        throw std::invalid_argument("vector_field: quadratic kind needs a nonzero vector a");
      F.a = a;
      detail::quadratic_table(p, a, F.X, F.gradX);
      break;
    }
    case FieldKind::rotation_kn: {
      need_k();
      if (k2 >= 0 && k2 < nn && k2 != k) {
        // purely tangential rotation x^k d_{k2} - x^{k2} d_k (proper Killing)
        F.X[k2] = p.hat_x[k];
        F.X[k] = -p.hat_x[k2];
        for (int i = 0; i < nn; ++i)
          for (int j = 0; j < nn; ++j)
            F.gradX(i, j) = (i == k && j == k2 ? 1.0 : 0.0) - (i == k2 && j == k ? 1.0 : 0.0);
        for (int j = 0; j < nn; ++j) F.gradX(nn, j) = -F.X[j] / t;
        for (int i = 0; i < nn; ++i) F.gradX(i, nn) = F.X[i] / t;
      } else {
        detail::rotation_table(p, k, F.X, F.gradX);
      }
      break;
    }
    case FieldKind::Y: {
      // Y = x - d_n; table from the growth lemma with the sign attribution
      // fixed so that gradX matches finite differences of X:
      //   nabla_i Y^n = +x^i/x^n,  nabla_n Y^i = -x^i/x^n  (i tangential).
      F.X.head(nn) = p.hat_x;
      F.X[nn] = t - 1.0;
      for (int i = 0; i < nn; ++i) {
        F.gradX(i, i) = 1.0 / t;
        F.gradX(i, nn) = p.hat_x[i] / t;
        F.gradX(nn, i) = -p.hat_x[i] / t;
      }
      F.gradX(nn, nn) = 1.0 / t;
      break;
    }
    case FieldKind::Y_k: {
      need_k();
      Vec ek = Vec::Zero(n);
      ek[k] = 1.0;
      Vec Xq(n), Xr(n);
      Mat Mq(n, n), Mr(n, n);
      detail::quadratic_table(p, ek, Xq, Mq);
      detail::rotation_table(p, k, Xr, Mr);
      F.X = Xq + Xr;
      F.gradX = Mq + Mr;
      break;
    }
  }
  return F;
}

// L_X b - (2/n)(div X) b, components with both indices down.
// Since b is conformal to delta, (L_X b)_{ij} = (x^n)^{-2} (M_i^j + M_j^i)
// with M = gradX.
inline Mat conformal_deficit(const VectorFieldJet& F, const Point& p) {
  const int n = p.dim();
  const double s = 1.0 / (p.xn * p.xn);
  const double div = F.gradX.trace();
  Mat D(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      D(i, j) = s * (F.gradX(i, j) + F.gradX(j, i) - (i == j ? 2.0 * div / n : 0.0));
  return D;
}

// Conformal factor phi with L_X b = phi * b (valid when the deficit vanishes).
inline double conformal_factor(const VectorFieldJet& F, const Point& p) {
  return 2.0 * F.gradX.trace() / p.dim();
}

inline double divergence(const VectorFieldJet& F, const Point&) { return F.gradX.trace(); }

struct TangencyError : std::runtime_error {
  explicit TangencyError(const std::string& m) : std::runtime_error(m) {}
};

struct HorosphereRestriction {
  Vec tangential;      // X^alpha along the slice
  Mat deficit;         // d_a X^b + d_b X^a - (2 div_H/(n-1)) delta
  double div_H = 0.0;  // Euclidean divergence along the slice
};

inline HorosphereRestriction horosphere_restriction(const VectorFieldJet& F, const Point& p) {
  const int n = p.dim();
  const int nn = n - 1;
  if (std::abs(p.xn - 1.0) > 1e-12)
    throw std::invalid_argument("horosphere_restriction: point must lie on x^n = 1");
  if (std::abs(F.X[nn]) > 1e-12)
    throw TangencyError("horosphere_restriction: field is not tangent to the horosphere (X^n = " +
                        std::to_string(F.X[nn]) + ")");
  HorosphereRestriction R;
  R.tangential = F.X.head(nn);
  // Euclidean slice gradient dX(a,b) = d_a X^b from the restricted closed forms
  Mat dX = Mat::Zero(nn, nn);
  switch (F.kind) {
    case FieldKind::Y:
      dX = Mat::Identity(nn, nn);
      break;
    case FieldKind::Y_k: {
      const int k = F.k;
      for (int a = 0; a < nn; ++a)
        for (int b = 0; b < nn; ++b)
          dX(a, b) = (a == k ? p.hat_x[b] : 0.0) + (a == b ? p.hat_x[k] : 0.0) -
                     (b == k ? p.hat_x[a] : 0.0);
      break;
    }
    default:
      throw std::invalid_argument("horosphere_restriction: only Y and Y_k are catalogued");
  }
  R.div_H = dX.trace();
  R.deficit = dX + dX.transpose() - Mat::Identity(nn, nn) * (2.0 * R.div_H / nn);
  return R;
}

struct GrowthNorms {
  double norm_X = 0.0;
  double norm_gradX = 0.0;
  double ratio_cosh = 0.0;  // (|X|_b + |gradX|_b) / cosh r
  double ratio_exp = 0.0;   // (|X|_b + |gradX|_b) / e^r
};

inline GrowthNorms growth_norms(const VectorFieldJet& F, const Point& p) {
  if (F.kind != FieldKind::Y && F.kind != FieldKind::Y_k)
    throw std::invalid_argument("growth_norms: kind must be Y or Y_k");
  GrowthNorms g;
  g.norm_X = bnorm_vector(F.X, p);
  g.norm_gradX = bnorm_mixed(F.gradX, p);
  const double ch = cosh_distance_r(p);
  const double sum = g.norm_X + g.norm_gradX;
  g.ratio_cosh = sum / ch;
  g.ratio_exp = sum / std::exp(std::acosh(ch));
  return g;
}

// Closed forms appearing in the growth lemma proof. The |gradY_k| form is
// given in two variants: as printed, and as obtained by direct summation of
// the table entries; they differ by (n-1)(x^k)^2/(x^n)^2 inside the root.
inline double grad_Y_norm_closed(const Point& p) {
  return std::sqrt(p.dim() + 2.0 * p.hat_x.squaredNorm()) / p.xn;
}
inline double grad_Yk_norm_sq_closed_corrected(const Point& p, int k) {
  const double Q = p.coords().squaredNorm();
  const double xk = p.hat_x[k];
  return (0.5 * Q * Q + p.dim() * xk * xk) / (p.xn * p.xn);
}
inline double grad_Yk_norm_sq_closed_printed(const Point& p, int k) {
  const double Q = p.coords().squaredNorm();
  const double xk = p.hat_x[k];
  return (0.5 * Q * Q + xk * xk) / (p.xn * p.xn);
}

}  // namespace horomass
