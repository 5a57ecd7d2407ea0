#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace horomass {

// Seedable generator with a portable double mapping (the raw 64-bit stream of
// mt19937_64 is specified by the standard; the [0,1) mapping below avoids the
// implementation-defined std::uniform_real_distribution).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform01(); }
  std::uint64_t bits() { return eng_(); }

  // uniform direction on the unit sphere in R^m
  Eigen::VectorXd direction(int m) {
    Eigen::VectorXd v(m);
    double norm2 = 0.0;
    do {
      for (int i = 0; i < m; ++i) v[i] = normal();
      norm2 = v.squaredNorm();
    } while (norm2 < 1e-12);
    return v / std::sqrt(norm2);
  }

  double normal() {
    // Box-Muller from the portable uniforms
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double m = std::sqrt(-2.0 * std::log(u1));
    spare_ = m * std::sin(6.283185307179586476925287 * u2);
    have_spare_ = true;
    return m * std::cos(6.283185307179586476925287 * u2);
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

struct KahanSum {
  double s = 0.0, c = 0.0;
  void add(double x) {
    const double y = x - c;
    const double t = s + y;
    c = (t - s) - y;
    s = t;
  }
  double value() const { return s; }
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  LineFit f;
  const std::size_t m = xs.size();
  if (m < 2) return f;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < m; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double d = m * sxx - sx * sx;
  f.slope = (m * sxy - sx * sy) / d;
  f.intercept = (sy - f.slope * sx) / m;
  double ss = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = ys[i] - (f.slope * xs[i] + f.intercept);
    ss += r * r;
  }
  f.rms_residual = std::sqrt(ss / m);
  return f;
}

// Fit y_j = M + C * eps_j^beta on the given points (two linear parameters,
// beta scanned on a fixed grid). Deterministic; used to extrapolate mass
// sequences and convergence rates.
struct RateFit {
  double limit = 0.0;     // M
  double coeff = 0.0;     // C
  double rate = 0.0;      // beta
  double rms_residual = 0.0;
  bool ok = false;
};

inline RateFit fit_limit_rate(const std::vector<double>& eps, const std::vector<double>& ys) {
  RateFit best;
  if (eps.size() < 3 || eps.size() != ys.size()) return best;
  const std::size_t m = eps.size();
  best.rms_residual = std::numeric_limits<double>::infinity();
  for (int bi = 1; bi <= 800; ++bi) {
    const double beta = 0.01 * bi;  // 0.01 .. 8.0
    // linear LS in (M, C) for basis {1, eps^beta}
    double s1 = m, sb = 0, sbb = 0, sy = 0, sby = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double p = std::pow(eps[j], beta);
      sb += p;
      sbb += p * p;
      sy += ys[j];
      sby += p * ys[j];
    }
    const double det = s1 * sbb - sb * sb;
    if (std::abs(det) < 1e-300) continue;
    const double M = (sbb * sy - sb * sby) / det;
    const double C = (s1 * sby - sb * sy) / det;
    double ss = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const double r = ys[j] - (M + C * std::pow(eps[j], beta));
      ss += r * r;
    }
    const double rms = std::sqrt(ss / m);
    if (rms < best.rms_residual) {
      best.limit = M;
      best.coeff = C;
      best.rate = beta;
      best.rms_residual = rms;
      best.ok = true;
    }
  }
  return best;
}

// FNV-1a 64-bit, used for stable config hashes.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace horomass
