#pragma once

#include "horomass/geometry.hpp"
#include "horomass/perturbation.hpp"
#include "horomass/tensor.hpp"

// Curvature of perturbed metrics, extrinsic geometry of the horosphere slice
// x^n = 1, and the linearized scalar curvature at b.

namespace horomass {

inline Christoffel3 christoffel_g(const MetricJet& jet, const Point& p) {
  const int n = p.dim();
  Mat ginv = jet.g.inverse();
  Christoffel3 G(n);
  for (int kk = 0; kk < n; ++kk)
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double s = 0.0;
        for (int l = 0; l < n; ++l)
          s += ginv(kk, l) * (jet.dg(i, j, l) + jet.dg(j, i, l) - jet.dg(l, i, j));
        G.set(kk, i, j, 0.5 * s);
      }
  return G;
}

// Coordinate derivative dG(m,k,i,j) = d_m Gamma^k_{ij} of the g-symbols.
inline Rank4 dchristoffel_g(const MetricJet& jet, const Point& p) {
  const int n = p.dim();
  Mat ginv = jet.g.inverse();
  // d_m g^{kl} = -g^{ka} d_m g_{ab} g^{bl}
  Rank3 dginv(n);
  for (int m = 0; m < n; ++m)
    for (int k = 0; k < n; ++k)
      for (int l = 0; l < n; ++l) {
        double s = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) s -= ginv(k, a) * jet.dg(m, a, b) * ginv(b, l);
        dginv.at(m, k, l) = s;
      }
  Rank4 dG(n);
  for (int m = 0; m < n; ++m)
    for (int kk = 0; kk < n; ++kk)
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
          double s = 0.0;
          for (int l = 0; l < n; ++l) {
            s += dginv(m, kk, l) * (jet.dg(i, j, l) + jet.dg(j, i, l) - jet.dg(l, i, j));
            s += ginv(kk, l) *
                 (jet.ddg(m, i, j, l) + jet.ddg(m, j, i, l) - jet.ddg(m, l, i, j));
          }
          dG.at(m, kk, i, j) = 0.5 * s;
        }
  return dG;
}

struct CurvatureBundle {
  Christoffel3 Gamma;
  Mat Ric;
  double R = 0.0;
  Point at;
  CurvatureBundle() : Gamma(3) {}
};

// Ric_{sn} = d_m Gamma^m_{ns} - d_n Gamma^m_{ms} + Gamma^m_{ml} Gamma^l_{ns}
//            - Gamma^m_{nl} Gamma^l_{ms};  R = g^{sn} Ric_{sn}.
inline CurvatureBundle curvature_g(const MetricJet& jet, const Point& p) {
  const int n = p.dim();
  CurvatureBundle C;
  C.at = p;
  C.Gamma = christoffel_g(jet, p);
  const Rank4 dG = dchristoffel_g(jet, p);
  C.Ric = Mat::Zero(n, n);
  for (int s = 0; s < n; ++s)
    for (int v = 0; v < n; ++v) {
      double r = 0.0;
      for (int m = 0; m < n; ++m) {
        r += dG(m, m, v, s) - dG(v, m, m, s);
        for (int l = 0; l < n; ++l)
          r += C.Gamma(m, m, l) * C.Gamma(l, v, s) - C.Gamma(m, v, l) * C.Gamma(l, m, s);
      }
      C.Ric(s, v) = r;
    }
  const Mat ginv = jet.g.inverse();
  C.R = (ginv * C.Ric).trace();
  return C;
}

// ---------------------------------------------------------------------------
// Extrinsic geometry of the slice x^n = 1.

struct BoundaryData {
  Mat A;      // second fundamental form, (n-1)x(n-1)
  double H = 0.0;
  Vec eta;    // unit normal components eta^i = (g^{nn})^{-1/2} g^{ni}
  Mat rho;    // induced metric g_{ab}, (n-1)x(n-1)
};

inline void require_on_slice(const Point& p) {
  if (std::abs(p.xn - 1.0) > 1e-12)
    throw std::invalid_argument("operation requires a point on the slice x^n = 1");
}

inline BoundaryData boundary_data(const MetricJet& jet, const Point& p) {
  require_on_slice(p);
  const int n = p.dim();
  const int nn = n - 1;
  BoundaryData B;
  const Mat ginv = jet.g.inverse();
  const double gnn_up = ginv(nn, nn);
  const double s = 1.0 / std::sqrt(gnn_up);
  B.eta = Vec(n);
  for (int i = 0; i < n; ++i) B.eta[i] = s * ginv(nn, i);
  B.rho = jet.g.topLeftCorner(nn, nn);
  Eigen::LLT<Mat> llt(B.rho);
  if (llt.info() != Eigen::Success)
    throw DegenerateMetricError("boundary_data: induced metric degenerate");
  const Christoffel3 G = christoffel_g(jet, p);
  B.A = Mat(nn, nn);
  for (int a = 0; a < nn; ++a)
    for (int b = 0; b < nn; ++b) B.A(a, b) = -s * G(nn, a, b);
  const Mat h = B.rho.inverse();
  B.H = (h * B.A).trace();
  return B;
}

// 2(H + n - 1) + sum_a (2 nab_a e_{an} - nab_n e_{aa}) + (n-1) e_{nn} - 2 sum_a e_{aa};
// the displayed first-order expansion makes this O(|e|^2).
inline double mean_curvature_expansion_residual(const MetricJet& jet, const Point& p) {
  require_on_slice(p);
  const int n = p.dim();
  const int nn = n - 1;
  const BoundaryData B = boundary_data(jet, p);
  const auto [nab, nab2] = covariant_jets(jet, p);
  (void)nab2;
  double s = 2.0 * (B.H + n - 1.0);
  for (int a = 0; a < nn; ++a) {
    s += 2.0 * nab(a, a, nn) - nab(nn, a, a);
    s -= 2.0 * jet.e(a, a);
  }
  s += (n - 1.0) * jet.e(nn, nn);
  return s;
}

// ---------------------------------------------------------------------------
// Linearized scalar curvature at b:
//   DR(e) = div(div e - dE) + (n-1) E,  E = tr_b e,
// all contractions with respect to b.
inline double linearized_scalar(const MetricJet& jet, const Point& p) {
  const int n = p.dim();
  const auto [nab, nab2] = covariant_jets(jet, p);
  (void)nab;
  const double s2 = p.xn * p.xn;
  const double s4 = s2 * s2;
  double divdiv = 0.0, lapE = 0.0, E = 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      divdiv += nab2(k, i, i, k);
      lapE += nab2(k, k, i, i);
    }
  for (int i = 0; i < n; ++i) E += jet.e(i, i);
  return s4 * (divdiv - lapE) + (n - 1.0) * s2 * E;
}

}  // namespace horomass
