#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "switchsolve/error.hpp"

namespace switchsolve {

/// Square band matrix with equal lower and upper bandwidth, factorised in
/// place by Gaussian elimination without pivoting. Intended for nonsingular
/// M-matrices, for which every pivot is positive and no fill leaves the band.
template <class Real = double>
class BandMatrix {
 public:
  BandMatrix(std::size_t n, std::size_t bandwidth)
      : n_(n), bw_(bandwidth), w_(2 * bandwidth + 1), a_(n * w_, Real(0)) {}

  std::size_t size() const { return n_; }
  std::size_t bandwidth() const { return bw_; }

  Real& operator()(std::size_t r, std::size_t c) { return a_[r * w_ + (c + bw_ - r)]; }
  Real operator()(std::size_t r, std::size_t c) const { return a_[r * w_ + (c + bw_ - r)]; }

  bool in_band(std::size_t r, std::size_t c) const { return c + bw_ >= r && c <= r + bw_; }

  void multiply(std::span<const Real> x, std::span<Real> y) const {
    for (std::size_t r = 0; r < n_; ++r) {
      const std::size_t c0 = r > bw_ ? r - bw_ : 0;
      const std::size_t c1 = std::min(n_ - 1, r + bw_);
      Real s = 0;
      for (std::size_t c = c0; c <= c1; ++c) s += (*this)(r, c) * x[c];
      y[r] = s;
    }
  }

  /// In-place LU. Throws SingularSystem on a vanishing pivot.
  void factorize() {
    for (std::size_t k = 0; k < n_; ++k) {
      const Real piv = (*this)(k, k);
      Real scale = 0;
      for (std::size_t c = (k > bw_ ? k - bw_ : 0); c <= std::min(n_ - 1, k + bw_); ++c)
        scale = std::max(scale, std::abs((*this)(k, c)));
      if (!(std::abs(piv) > scale * Real(1e-14)) || !std::isfinite(piv))
        throw Error(ErrorCode::SingularSystem, "zero pivot in row " + std::to_string(k));
      const std::size_t rmax = std::min(n_ - 1, k + bw_);
      for (std::size_t r = k + 1; r <= rmax; ++r) {
        Real& l = (*this)(r, k);
        if (l == Real(0)) continue;
        l /= piv;
        for (std::size_t c = k + 1; c <= rmax; ++c) (*this)(r, c) -= l * (*this)(k, c);
      }
    }
  }

  /// Solves with the factors from factorize(); rhs is overwritten.
  void solve_factored(std::span<Real> x) const {
    for (std::size_t r = 1; r < n_; ++r) {
      const std::size_t c0 = r > bw_ ? r - bw_ : 0;
      Real s = x[r];
      for (std::size_t c = c0; c < r; ++c) s -= (*this)(r, c) * x[c];
      x[r] = s;
    }
    for (std::size_t r = n_; r-- > 0;) {
      const std::size_t c1 = std::min(n_ - 1, r + bw_);
      Real s = x[r];
      for (std::size_t c = r + 1; c <= c1; ++c) s -= (*this)(r, c) * x[c];
      x[r] = s / (*this)(r, r);
    }
  }

 private:
  std::size_t n_, bw_, w_;
  std::vector<Real> a_;
};

}  // namespace switchsolve
