#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "neuedit/common.hpp"

namespace neuedit {

// Dense row-major matrix of doubles. Deliberately minimal: the library only
// needs feature tables, projections and attention maps.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double value = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, value) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }

  double* row(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline double dot(const double* a, const double* b, int n) {
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const double* a, int n) { return std::sqrt(dot(a, a, n)); }

inline double cosine(const double* a, const double* b, int n) {
  const double na = norm2(a, n);
  const double nb = norm2(b, n);
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b, n) / (na * nb);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  require(a.size() == b.size(), "dim-mismatch", "cosine: vector sizes differ");
  return cosine(a.data(), b.data(), static_cast<int>(a.size()));
}

// y = M x
inline std::vector<double> matvec(const Matrix& m, const std::vector<double>& x) {
  require(static_cast<int>(x.size()) == m.cols(), "dim-mismatch", "matvec: size mismatch");
  std::vector<double> y(static_cast<std::size_t>(m.rows()), 0.0);
  for (int r = 0; r < m.rows(); ++r) y[static_cast<std::size_t>(r)] = dot(m.row(r), x.data(), m.cols());
  return y;
}

// Orthonormalizes the rows of `m` in place with two passes of modified
// Gram-Schmidt. Requires rows <= cols and numerically independent rows.
inline void orthonormalize_rows(Matrix& m) {
  require(m.rows() <= m.cols(), "dim-mismatch", "orthonormalize_rows: more rows than cols");
  for (int pass = 0; pass < 2; ++pass) {
    for (int r = 0; r < m.rows(); ++r) {
      double* vr = m.row(r);
      for (int p = 0; p < r; ++p) {
        const double* vp = m.row(p);
        const double proj = dot(vr, vp, m.cols());
        for (int c = 0; c < m.cols(); ++c) vr[c] -= proj * vp[c];
      }
      const double nrm = norm2(vr, m.cols());
      require(nrm > 1e-12, "degenerate-basis", "orthonormalize_rows: dependent rows");
      for (int c = 0; c < m.cols(); ++c) vr[c] /= nrm;
    }
  }
}

}  // namespace neuedit
