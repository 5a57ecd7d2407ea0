#pragma once

#include <Eigen/Dense>

#include "horomass/geometry.hpp"

namespace horomass {

// Dense rank-3 coordinate table T(k,i,j), no symmetry enforced.
class Rank3 {
 public:
  Rank3() : n_(0) {}
  explicit Rank3(int n) : n_(n), v_(Vec::Zero(n * n * n)) {}
  double operator()(int k, int i, int j) const { return v_[(k * n_ + i) * n_ + j]; }
  double& at(int k, int i, int j) { return v_[(k * n_ + i) * n_ + j]; }
  int dim() const { return n_; }
  const Vec& flat() const { return v_; }
  Rank3& operator+=(const Rank3& o) {
    v_ += o.v_;
    return *this;
  }
  Rank3 operator*(double c) const {
    Rank3 r = *this;
    r.v_ *= c;
    return r;
  }

 private:
  int n_;
  Vec v_;
};

// Dense rank-4 coordinate table T(l,k,i,j).
class Rank4 {
 public:
  Rank4() : n_(0) {}
  explicit Rank4(int n) : n_(n), v_(Vec::Zero(n * n * n * n)) {}
  double operator()(int l, int k, int i, int j) const {
    return v_[((l * n_ + k) * n_ + i) * n_ + j];
  }
  double& at(int l, int k, int i, int j) { return v_[((l * n_ + k) * n_ + i) * n_ + j]; }
  int dim() const { return n_; }
  const Vec& flat() const { return v_; }
  Rank4& operator+=(const Rank4& o) {
    v_ += o.v_;
    return *this;
  }
  Rank4 operator*(double c) const {
    Rank4 r = *this;
    r.v_ *= c;
    return r;
  }

 private:
  int n_;
  Vec v_;
};

}  // namespace horomass
