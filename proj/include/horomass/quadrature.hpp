#pragma once

#include <array>
#include <functional>
#include <map>
#include <vector>

#include "horomass/util.hpp"

// Adaptive tensor-product Gauss-Legendre integration over axis-aligned boxes
// in up to 4 parameters. Cells are bisected along their widest axis until the
// two-level difference meets the local tolerance or the depth cap is hit;
// accumulation is compensated and in a fixed order, so results are
// deterministic.

namespace horomass {

struct QuadratureSpec {
  int order = 8;            // Gauss points per axis per cell (>= 2)
  int initial_subdiv = 2;   // initial splits per axis
  double rel_tol = 1e-8;    // target relative tolerance
  double abs_floor = 1e-13; // absolute tolerance floor
  int max_depth = 14;

  void check() const {
    if (order < 2) throw std::invalid_argument("QuadratureSpec: order >= 2 required");
    if (rel_tol <= 0) throw std::invalid_argument("QuadratureSpec: tolerance must be positive");
  }
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  bool warning = false;  // depth cap exceeded somewhere
  long cells = 0;
};

namespace quad_detail {

struct Rule {
  std::vector<double> x;  // nodes on [-1,1]
  std::vector<double> w;
};

// Newton iteration on Legendre polynomials; cached per order.
inline const Rule& gauss_rule(int m) {
  static std::map<int, Rule> cache;
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;
  Rule r;
  r.x.resize(m);
  r.w.resize(m);
  for (int i = 0; i < m; ++i) {
    double x = std::cos(3.14159265358979323846 * (i + 0.75) / (m + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      const double dp = m * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= m; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    const double dp = m * (x * p1 - p0) / (x * x - 1.0);
    r.x[i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return cache.emplace(m, std::move(r)).first->second;
}

using BoxFn = std::function<double(const double*)>;

inline double tensor_gauss(const BoxFn& f, const double* lo, const double* hi, int dim,
                           int order) {
  const Rule& r = gauss_rule(order);
  double u[4];
  KahanSum acc;
  std::array<int, 4> idx{0, 0, 0, 0};
  const long total = [&] {
    long t = 1;
    for (int d = 0; d < dim; ++d) t *= order;
    return t;
  }();
  for (long c = 0; c < total; ++c) {
    long rem = c;
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      idx[d] = static_cast<int>(rem % order);
      rem /= order;
      const double mid = 0.5 * (lo[d] + hi[d]);
      const double half = 0.5 * (hi[d] - lo[d]);
      u[d] = mid + half * r.x[idx[d]];
      w *= half * r.w[idx[d]];
    }
    acc.add(w * f(u));
  }
  return acc.value();
}

struct AdaptState {
  const BoxFn* f = nullptr;
  int dim = 0;
  int order = 0;
  int max_depth = 0;
  bool warning = false;
  long cells = 0;
  KahanSum value;
  KahanSum error;
};

inline void adapt_cell(AdaptState& st, const double* lo, const double* hi, double coarse,
                       double tol, int depth) {
  // Probe a bisection along every axis; the worst two-level difference is
  // the error estimate and selects the split direction. Splitting only the
  // widest axis can alias smooth directions and silently accept unresolved
  // structure in the others.
  double lo1[4], hi1[4], lo2[4], hi2[4];
  double best_err = -1.0, best_fine = coarse, best_q1 = 0.0, best_q2 = 0.0;
  int best_ax = 0;
  for (int ax = 0; ax < st.dim; ++ax) {
    for (int d = 0; d < st.dim; ++d) {
      lo1[d] = lo[d];
      hi1[d] = hi[d];
      lo2[d] = lo[d];
      hi2[d] = hi[d];
    }
    const double mid = 0.5 * (lo[ax] + hi[ax]);
    hi1[ax] = mid;
    lo2[ax] = mid;
    const double q1 = tensor_gauss(*st.f, lo1, hi1, st.dim, st.order);
    const double q2 = tensor_gauss(*st.f, lo2, hi2, st.dim, st.order);
    st.cells += 2;
    const double err = std::abs(q1 + q2 - coarse);
    if (err > best_err) {
      best_err = err;
      best_fine = q1 + q2;
      best_q1 = q1;
      best_q2 = q2;
      best_ax = ax;
    }
  }
  if (best_err <= tol || depth >= st.max_depth) {
    if (best_err > tol) st.warning = true;
    st.value.add(best_fine);
    st.error.add(best_err);
    return;
  }
  for (int d = 0; d < st.dim; ++d) {
    lo1[d] = lo[d];
    hi1[d] = hi[d];
    lo2[d] = lo[d];
    hi2[d] = hi[d];
  }
  const double mid = 0.5 * (lo[best_ax] + hi[best_ax]);
  hi1[best_ax] = mid;
  lo2[best_ax] = mid;
  adapt_cell(st, lo1, hi1, best_q1, 0.5 * tol, depth + 1);
  adapt_cell(st, lo2, hi2, best_q2, 0.5 * tol, depth + 1);
}

}  // namespace quad_detail

// Integrate f over the box; f receives the parameter vector.
inline QuadratureResult integrate_box(const quad_detail::BoxFn& f,
                                      const std::vector<std::array<double, 2>>& box,
                                      const QuadratureSpec& spec) {
  spec.check();
  const int dim = static_cast<int>(box.size());
  if (dim < 1 || dim > 4) throw std::invalid_argument("integrate_box: 1..4 axes supported");

  // initial grid
  std::vector<std::array<double, 2>> cells_lo_hi;
  const int sub = std::max(1, spec.initial_subdiv);
  std::vector<int> counts(dim, sub);
  long ncells = 1;
  for (int d = 0; d < dim; ++d) ncells *= counts[d];

  // first pass for the global scale; the L1 sum of cell contributions keeps
  // the tolerance meaningful for integrands that cancel globally
  double l1_total = 0.0;
  std::vector<std::array<double, 8>> cellboxes;  // lo[4], hi[4]
  std::vector<double> cellcoarse;
  for (long c = 0; c < ncells; ++c) {
    long rem = c;
    double lo[4], hi[4];
    for (int d = 0; d < dim; ++d) {
      const int i = static_cast<int>(rem % counts[d]);
      rem /= counts[d];
      const double w = (box[d][1] - box[d][0]) / counts[d];
      lo[d] = box[d][0] + i * w;
      hi[d] = lo[d] + w;
    }
    const double q = quad_detail::tensor_gauss(f, lo, hi, dim, spec.order);
    l1_total += std::abs(q);
    std::array<double, 8> cb{};
    for (int d = 0; d < dim; ++d) {
      cb[d] = lo[d];
      cb[4 + d] = hi[d];
    }
    cellboxes.push_back(cb);
    cellcoarse.push_back(q);
  }
  const double tol_total = std::max(spec.abs_floor, spec.rel_tol * l1_total);

  quad_detail::AdaptState st;
  st.f = &f;
  st.dim = dim;
  st.order = spec.order;
  st.max_depth = spec.max_depth;
  st.cells = ncells;
  for (std::size_t c = 0; c < cellboxes.size(); ++c) {
    quad_detail::adapt_cell(st, cellboxes[c].data(), cellboxes[c].data() + 4, cellcoarse[c],
                            tol_total / static_cast<double>(cellboxes.size()), 0);
  }
  QuadratureResult res;
  res.value = st.value.value();
  res.error_estimate = st.error.value();
  res.warning = st.warning;
  res.cells = st.cells;
  return res;
}

// Adaptive 1-D convenience wrapper.
inline QuadratureResult integrate_1d(const std::function<double(double)>& f, double a, double b,
                                     const QuadratureSpec& spec) {
  return integrate_box([&](const double* u) { return f(u[0]); }, {{{a, b}}}, spec);
}

}  // namespace horomass
