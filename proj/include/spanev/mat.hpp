#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace spanev {

// Dense row-major matrix of doubles. Deliberately minimal; the model works
// with small matrices (sentence length x 2*hidden) where a plain loop is
// plenty.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
  Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), a(std::move(data)) {
    assert(a.size() == static_cast<size_t>(r) * c);
  }

  double& operator()(int i, int j) { return a[static_cast<size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<size_t>(i) * cols + j]; }

  size_t size() const { return a.size(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  void fill(double v) { std::fill(a.begin(), a.end(), v); }
  void resize(int r, int c) {
    rows = r;
    cols = c;
    a.assign(static_cast<size_t>(r) * c, 0.0);
  }

  bool all_finite() const {
    for (double v : a)
      if (!std::isfinite(v)) return false;
    return true;
  }

  bool operator==(const Mat& o) const { return rows == o.rows && cols == o.cols && a == o.a; }
};

// c = a * b
inline void matmul_into(const Mat& a, const Mat& b, Mat& c) {
  assert(a.cols == b.rows);
  c.resize(a.rows, b.cols);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.a[static_cast<size_t>(i) * a.cols];
    double* crow = &c.a[static_cast<size_t>(i) * c.cols];
    for (int k = 0; k < a.cols; ++k) {
      double av = arow[k];
      if (av == 0.0) continue;
      const double* brow = &b.a[static_cast<size_t>(k) * b.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

// c = a * b^T
inline void matmul_nt_into(const Mat& a, const Mat& b, Mat& c) {
  assert(a.cols == b.cols);
  c.resize(a.rows, b.rows);
  for (int i = 0; i < a.rows; ++i) {
    const double* arow = &a.a[static_cast<size_t>(i) * a.cols];
    for (int j = 0; j < b.rows; ++j) {
      const double* brow = &b.a[static_cast<size_t>(j) * b.cols];
      double s = 0.0;
      for (int k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      c(i, j) = s;
    }
  }
}

// c += a^T * b  (accumulating; used by matmul backward)
inline void matmul_tn_acc(const Mat& a, const Mat& b, Mat& c) {
  assert(a.rows == b.rows);
  assert(c.rows == a.cols && c.cols == b.cols);
  for (int k = 0; k < a.rows; ++k) {
    const double* arow = &a.a[static_cast<size_t>(k) * a.cols];
    const double* brow = &b.a[static_cast<size_t>(k) * b.cols];
    for (int i = 0; i < a.cols; ++i) {
      double av = arow[i];
      if (av == 0.0) continue;
      double* crow = &c.a[static_cast<size_t>(i) * c.cols];
      for (int j = 0; j < b.cols; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace spanev
