#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "threatlens/kernels.hpp"

namespace threatlens {

// Row-major dense matrix; vectors are 1 x n.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(std::size_t r, std::size_t c) : rows(r), cols(c), v(r * c, 0.0) {}

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }
  double* row(std::size_t r) { return v.data() + r * cols; }
  const double* row(std::size_t r) const { return v.data() + r * cols; }
  double& at(std::size_t r, std::size_t c) { return v[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return v[r * cols + c]; }
  std::size_t numel() const { return v.size(); }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }

  bool operator==(const Mat&) const = default;
};

inline Mat matmul_nn(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.cols);
  kernels::matmul_nn(a.data(), b.data(), c.data(), a.rows, a.cols, b.cols);
  return c;
}

// a * b^T
inline Mat matmul_nt(const Mat& a, const Mat& b) {
  Mat c(a.rows, b.rows);
  kernels::matmul_nt(a.data(), b.data(), c.data(), a.rows, a.cols, b.rows);
  return c;
}

// a^T * b
inline Mat matmul_tn(const Mat& a, const Mat& b) {
  Mat c(a.cols, b.cols);
  kernels::matmul_tn(a.data(), b.data(), c.data(), a.rows, a.cols, b.cols);
  return c;
}

inline void add_into(Mat& dst, const Mat& src) {
  kernels::add(dst.data(), src.data(), dst.data(), dst.numel());
}

}  // namespace threatlens
