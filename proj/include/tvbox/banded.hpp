#pragma once

// Banded linear algebra: storage, SPD Cholesky, and LU with partial pivoting.
//
// P1 matrices on the structured grid have bandwidth nx+2 in node order, and
// the coupled Newton systems stay banded when the three unknowns per node are
// interleaved, so banded direct solvers cover every system in this project.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "tvbox/errors.hpp"

namespace tvbox {

// General banded matrix, column-major band storage:
// A(i,j) lives at a[(size_t)j*ld + ku + i - j] for j-ku <= i <= j+kl.
class BandMatrix {
 public:
  BandMatrix() = default;
  BandMatrix(int n, int kl, int ku)
      : n_(n), kl_(kl), ku_(ku), ld_(kl + ku + 1),
        a_(static_cast<size_t>(ld_) * n, 0.0) {}

  int n() const { return n_; }
  int kl() const { return kl_; }
  int ku() const { return ku_; }

  bool in_band(int i, int j) const {
    return i >= 0 && j >= 0 && i < n_ && j < n_ && i - j <= kl_ && j - i <= ku_;
  }

  double& at(int i, int j) {
    TVBOX_REQUIRE(in_band(i, j), "BandMatrix::at out of band");
    return a_[static_cast<size_t>(j) * ld_ + ku_ + i - j];
  }
  double at(int i, int j) const {
    TVBOX_REQUIRE(in_band(i, j), "BandMatrix::at out of band");
    return a_[static_cast<size_t>(j) * ld_ + ku_ + i - j];
  }
  double get(int i, int j) const {  // zero outside the band
    return in_band(i, j) ? a_[static_cast<size_t>(j) * ld_ + ku_ + i - j] : 0.0;
  }
  void add(int i, int j, double v) { at(i, j) += v; }

  void set_zero() { std::fill(a_.begin(), a_.end(), 0.0); }

  std::vector<double> mul(const std::vector<double>& x) const {
    std::vector<double> y(n_, 0.0);
    for (int j = 0; j < n_; ++j) {
      const double xj = x[j];
      if (xj == 0.0) continue;
      const int ilo = std::max(0, j - ku_);
      const int ihi = std::min(n_ - 1, j + kl_);
      const double* col = &a_[static_cast<size_t>(j) * ld_];
      for (int i = ilo; i <= ihi; ++i) y[i] += col[ku_ + i - j] * xj;
    }
    return y;
  }

  // Zero row and column k within the band and put 1 on the diagonal.
  // Intended for homogeneous Dirichlet elimination (rhs entry must be zeroed
  // by the caller), which keeps symmetric matrices symmetric.
  void eliminate_symmetric(int k) {
    for (int j = std::max(0, k - ku_); j <= std::min(n_ - 1, k + kl_); ++j)
      at(k, j) = 0.0;
    for (int i = std::max(0, k - kl_); i <= std::min(n_ - 1, k + ku_); ++i)
      at(i, k) = 0.0;
    at(k, k) = 1.0;
  }

  double max_abs_asymmetry() const {
    double worst = 0.0;
    for (int j = 0; j < n_; ++j)
      for (int i = std::max(0, j - ku_); i <= std::min(n_ - 1, j + kl_); ++i)
        worst = std::max(worst, std::abs(get(i, j) - get(j, i)));
    return worst;
  }

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ld_ = 0;
  std::vector<double> a_;
};

// Cholesky factorization of a symmetric positive definite band matrix
// (lower band storage, no pivoting).
class BandCholesky {
 public:
  BandCholesky() = default;

  static BandCholesky factor(const BandMatrix& a) {
    TVBOX_REQUIRE(a.kl() == a.ku(), "BandCholesky: need symmetric bandwidth");
    BandCholesky f;
    f.n_ = a.n();
    f.kb_ = a.kl();
    const int ld = f.kb_ + 1;
    f.lb_.assign(static_cast<size_t>(ld) * f.n_, 0.0);
    for (int j = 0; j < f.n_; ++j)
      for (int i = j; i <= std::min(f.n_ - 1, j + f.kb_); ++i)
        f.lb_[static_cast<size_t>(j) * ld + (i - j)] = a.at(i, j);

    for (int j = 0; j < f.n_; ++j) {
      double* colj = &f.lb_[static_cast<size_t>(j) * ld];
      const double d = colj[0];
      if (!(d > 0.0))
        throw solver_error("BandCholesky: matrix not positive definite at row " +
                           std::to_string(j));
      const double ajj = std::sqrt(d);
      colj[0] = ajj;
      const int len = std::min(f.kb_, f.n_ - 1 - j);
      for (int p = 1; p <= len; ++p) colj[p] /= ajj;
      for (int q = 1; q <= len; ++q) {
        const double ljq = colj[q];
        if (ljq == 0.0) continue;
        double* colc = &f.lb_[static_cast<size_t>(j + q) * ld];
        for (int p = q; p <= len; ++p) colc[p - q] -= colj[p] * ljq;
      }
    }
    return f;
  }

  void solve_in_place(std::vector<double>& b) const {
    const int ld = kb_ + 1;
    for (int j = 0; j < n_; ++j) {  // forward: L z = b
      const double* colj = &lb_[static_cast<size_t>(j) * ld];
      const double zj = b[j] / colj[0];
      b[j] = zj;
      const int len = std::min(kb_, n_ - 1 - j);
      for (int p = 1; p <= len; ++p) b[j + p] -= colj[p] * zj;
    }
    for (int j = n_ - 1; j >= 0; --j) {  // backward: L^T x = z
      const double* colj = &lb_[static_cast<size_t>(j) * ld];
      double s = b[j];
      const int len = std::min(kb_, n_ - 1 - j);
      for (int p = 1; p <= len; ++p) s -= colj[p] * b[j + p];
      b[j] = s / colj[0];
    }
  }

  std::vector<double> solve(std::vector<double> b) const {
    solve_in_place(b);
    return b;
  }

  int n() const { return n_; }

 private:
  int n_ = 0, kb_ = 0;
  std::vector<double> lb_;
};

// LU factorization with partial pivoting for general band matrices
// (LAPACK gbtrf layout: kl extra superdiagonals absorb pivoting fill).
class BandLU {
 public:
  BandLU() = default;

  static BandLU factor(const BandMatrix& a) {
    BandLU f;
    f.n_ = a.n();
    f.kl_ = a.kl();
    f.ku_ = a.ku();
    f.ld_ = 2 * f.kl_ + f.ku_ + 1;
    f.ab_.assign(static_cast<size_t>(f.ld_) * f.n_, 0.0);
    f.ipiv_.assign(f.n_, 0);
    const int off = f.kl_ + f.ku_;  // storage row of the diagonal
    for (int j = 0; j < f.n_; ++j)
      for (int i = std::max(0, j - f.ku_); i <= std::min(f.n_ - 1, j + f.kl_); ++i)
        f.ab_[static_cast<size_t>(j) * f.ld_ + off + i - j] = a.at(i, j);

    const int n = f.n_, kl = f.kl_, ku = f.ku_, ld = f.ld_;
    int ju = 0;  // rightmost column touched by row interchanges so far
    for (int j = 0; j < n; ++j) {
      double* colj = &f.ab_[static_cast<size_t>(j) * ld + off];
      const int km = std::min(kl, n - 1 - j);
      int jp = 0;
      double best = std::abs(colj[0]);
      for (int p = 1; p <= km; ++p)
        if (std::abs(colj[p]) > best) { best = std::abs(colj[p]); jp = p; }
      f.ipiv_[j] = j + jp;
      if (best == 0.0)
        throw solver_error("BandLU: singular pivot at column " + std::to_string(j));

      ju = std::max(ju, std::min(j + ku + kl, n - 1));
      if (jp != 0) {
        // swap rows j and j+jp across columns j..ju
        for (int c = j; c <= ju; ++c) {
          double* colc = &f.ab_[static_cast<size_t>(c) * ld + off];
          std::swap(colc[j + jp - c], colc[j - c]);
        }
      }
      if (km > 0) {
        const double inv_piv = 1.0 / colj[0];
        for (int p = 1; p <= km; ++p) colj[p] *= inv_piv;
        for (int c = j + 1; c <= ju; ++c) {
          double* colc = &f.ab_[static_cast<size_t>(c) * ld + off];
          const double fmul = colc[j - c];
          if (fmul == 0.0) continue;
          double* dst = colc + (j + 1 - c);
          const double* src = colj + 1;
          for (int p = 0; p < km; ++p) dst[p] -= src[p] * fmul;
        }
      }
    }
    return f;
  }

  void solve_in_place(std::vector<double>& b) const {
    const int off = kl_ + ku_;
    for (int j = 0; j < n_; ++j) {  // L solve with row interchanges
      if (ipiv_[j] != j) std::swap(b[ipiv_[j]], b[j]);
      const double bj = b[j];
      if (bj == 0.0) continue;
      const int km = std::min(kl_, n_ - 1 - j);
      const double* colj = &ab_[static_cast<size_t>(j) * ld_ + off];
      for (int p = 1; p <= km; ++p) b[j + p] -= colj[p] * bj;
    }
    for (int j = n_ - 1; j >= 0; --j) {  // U solve
      const double* colj = &ab_[static_cast<size_t>(j) * ld_ + off];
      const double xj = b[j] / colj[0];
      b[j] = xj;
      const int len = std::min(kl_ + ku_, j);
      for (int p = 1; p <= len; ++p) b[j - p] -= colj[-p] * xj;
    }
  }

  std::vector<double> solve(std::vector<double> b) const {
    solve_in_place(b);
    return b;
  }

 private:
  int n_ = 0, kl_ = 0, ku_ = 0, ld_ = 0;
  std::vector<double> ab_;
  std::vector<int> ipiv_;
};

}  // namespace tvbox
