#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

// Upper half-space model of hyperbolic n-space:
//   b = (x^n)^{-2} delta  on  {x^n > 0},  n >= 3.
// Coordinates are 0-based in code: indices 0..n-2 are tangential, n-1 is the
// distinguished normal index ("x^n" in the usual notation). The base point is
// o = (0,...,0,1).

namespace horomass {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Point {
  Vec hat_x;  // tangential coordinates x^1..x^{n-1}
  double xn;  // normal coordinate, must be > 0

  Point() : hat_x(), xn(1.0) {}
  Point(Vec hx, double z) : hat_x(std::move(hx)), xn(z) { check(); }

  int dim() const { return static_cast<int>(hat_x.size()) + 1; }

  double coord(int i) const {
    const int m = static_cast<int>(hat_x.size());
    return i < m ? hat_x[i] : xn;
  }

  Vec coords() const {
    Vec x(dim());
    x.head(dim() - 1) = hat_x;
    x[dim() - 1] = xn;
    return x;
  }

  static Point from_coords(const Vec& x) {
    return Point(x.head(x.size() - 1), x[x.size() - 1]);
  }

  static Point origin(int n) { return Point(Vec::Zero(n - 1), 1.0); }

  void check() const {
    if (!(xn > 0.0))
      throw std::domain_error("Point: x^n must be positive, got " + std::to_string(xn));
    if (dim() < 3) throw std::domain_error("Point: dimension must be >= 3");
  }
};

// Rank-3 table G^j_{ik}, symmetric in the lower pair (i,k).
class Christoffel3 {
 public:
  explicit Christoffel3(int n) : n_(n), v_(Vec::Zero(n * n * n)) {}

  double operator()(int j, int i, int k) const { return v_[(j * n_ + i) * n_ + k]; }
  void set(int j, int i, int k, double val) {
    v_[(j * n_ + i) * n_ + k] = val;
    v_[(j * n_ + k) * n_ + i] = val;
  }
  int dim() const { return n_; }

 private:
  int n_;
  Vec v_;
};

// ---------------------------------------------------------------------------
// Background metric

inline Mat metric_b(const Point& p) {
  p.check();
  const int n = p.dim();
  return Mat::Identity(n, n) / (p.xn * p.xn);
}

inline Mat inverse_b(const Point& p) {
  p.check();
  const int n = p.dim();
  return Mat::Identity(n, n) * (p.xn * p.xn);
}

// Volume density of b against Lebesgue measure: (x^n)^{-n}.
inline double volume_density_b(const Point& p) {
  p.check();
  return std::pow(p.xn, -p.dim());
}

// Coordinate derivative of b: db(k,i,j) = d_k b_{ij}. Only k = n-1 is nonzero.
inline double dmetric_b(const Point& p, int k, int i, int j) {
  const int nn = p.dim() - 1;
  if (k != nn || i != j) return 0.0;
  return -2.0 / (p.xn * p.xn * p.xn);
}

// Second coordinate derivative d_l d_k b_{ij}.
inline double ddmetric_b(const Point& p, int l, int k, int i, int j) {
  const int nn = p.dim() - 1;
  if (l != nn || k != nn || i != j) return 0.0;
  return 6.0 / (p.xn * p.xn * p.xn * p.xn);
}

// Christoffel symbols of b, closed form:
//   G^j_{in} = -(x^n)^{-1} d^j_i,  G^c_{ab} = 0,  G^n_{ab} = (x^n)^{-1} d_ab
// (a,b,c tangential). All entries are (dimensionless constant)/x^n.
inline double christoffel_b_entry(const Point& p, int j, int i, int k) {
  const int nn = p.dim() - 1;
  double c = 0.0;
  if (i == nn && j == k) c += -1.0;
  if (k == nn && j == i) c += -1.0;
  if (j == nn && i == k) c += 1.0;
  return c / p.xn;
}

inline Christoffel3 christoffel_b(const Point& p) {
  p.check();
  const int n = p.dim();
  Christoffel3 G(n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      for (int k = i; k < n; ++k) G.set(j, i, k, christoffel_b_entry(p, j, i, k));
  return G;
}

// d_m G^j_{ik} of the background symbols; equals -d_{m,n} G^j_{ik} / x^n.
inline double dchristoffel_b(const Point& p, int m, int j, int i, int k) {
  const int nn = p.dim() - 1;
  if (m != nn) return 0.0;
  return -christoffel_b_entry(p, j, i, k) / p.xn;
}

// Second coordinate derivative d_l d_m G^j_{ik}; nonzero only for l = m = n-1.
inline double ddchristoffel_b(const Point& p, int l, int m, int j, int i, int k) {
  const int nn = p.dim() - 1;
  if (l != nn || m != nn) return 0.0;
  return 2.0 * christoffel_b_entry(p, j, i, k) / (p.xn * p.xn);
}

// ---------------------------------------------------------------------------
// Distance to the base point o = (0,...,0,1):
//   cosh r = (|hat x|^2 + (x^n)^2 + 1) / (2 x^n).

inline double cosh_distance_r(const Point& p) {
  p.check();
  double c = (p.hat_x.squaredNorm() + p.xn * p.xn + 1.0) / (2.0 * p.xn);
  // absorb rounding just below 1 near o
  if (c < 1.0) {
    if (c < 1.0 - 1e-14)
      throw std::domain_error("cosh_distance_r: argument below 1 beyond rounding");
    c = 1.0;
  }
  return c;
}

inline double distance_r(const Point& p) { return std::acosh(cosh_distance_r(p)); }

// Point at b-distance r from o in the direction of the unit vector
// (sin(theta) * omega, -cos(theta)): theta = 0 is the downward axis ray
// x^n = e^{-r}. The geodesic sphere of radius r about o is the Euclidean
// sphere centered (0,cosh r) with radius sinh r.
inline Point geodesic_sphere_point(int n, double r, double cos_theta, const Vec& omega) {
  const double ch = std::cosh(r), sh = std::sinh(r);
  const double st = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  Vec hx = omega * (sh * st);
  double z = ch - sh * cos_theta;
  (void)n;
  return Point(hx, z);
}

// ---------------------------------------------------------------------------
// b-norms of coordinate component tables. Contracting a lower index pair with
// b^{-1} contributes (x^n)^2, an upper pair contributes (x^n)^{-2}; the rest
// is the Frobenius sum of components.

inline double bnorm_scale(const Point& p, int num_lower, int num_upper) {
  return std::pow(p.xn, num_lower - num_upper);
}

inline double bnorm_vector(const Vec& X, const Point& p) {
  if (X.size() != p.dim()) throw std::invalid_argument("bnorm_vector: shape mismatch");
  return X.norm() * bnorm_scale(p, 0, 1);
}

inline double bnorm_covector(const Vec& w, const Point& p) {
  if (w.size() != p.dim()) throw std::invalid_argument("bnorm_covector: shape mismatch");
  return w.norm() * bnorm_scale(p, 1, 0);
}

// (0,2)-valence table (both indices down), e.g. e_{ij}.
inline double bnorm_cov2(const Mat& T, const Point& p) {
  if (T.rows() != p.dim() || T.cols() != p.dim())
    throw std::invalid_argument("bnorm_cov2: shape mismatch");
  return T.norm() * bnorm_scale(p, 2, 0);
}

// (1,1)-valence table T_i^j: conformal factors cancel, plain Frobenius.
inline double bnorm_mixed(const Mat& T, const Point& p) {
  if (T.rows() != p.dim() || T.cols() != p.dim())
    throw std::invalid_argument("bnorm_mixed: shape mismatch");
  return T.norm();
}

// Generic flat component table with the given number of lower/upper slots.
inline double bnorm_table(const Vec& flat, int num_lower, int num_upper, const Point& p,
                          int expected_size) {
  if (flat.size() != expected_size) throw std::invalid_argument("bnorm_table: shape mismatch");
  return flat.norm() * bnorm_scale(p, num_lower, num_upper);
}

}  // namespace horomass
