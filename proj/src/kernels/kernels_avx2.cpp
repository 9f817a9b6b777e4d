// AVX2/FMA variants of the dense kernels. This translation unit is compiled
// with -mavx2 -mfma and must only be entered after the runtime CPUID check
// in kernels.cpp.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "threatlens/kernels.hpp"

#if defined(THREATLENS_HAVE_AVX2)

namespace threatlens::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

void avx2_axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void avx2_scale(double a, double* x, std::size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(av, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

void avx2_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(
        out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

double avx2_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double avx2_sum_squares(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    acc = _mm256_fmadd_pd(xv, xv, acc);
  }
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void avx2_matmul_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      const __m256d alv = _mm256_set1_pd(a[i * k + l]);
      const double* brow = b + l * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(alv, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double als = a[i * k + l];
      for (; j < n; ++j) crow[j] += als * brow[j];
    }
  }
}

void avx2_matmul_nt(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = avx2_dot(arow, b + j * k, k);
    }
  }
}

void avx2_matmul_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  std::fill(c, c + k * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const __m256d alv = _mm256_set1_pd(a[i * k + l]);
      double* crow = c + l * n;
      std::size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(alv, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      const double als = a[i * k + l];
      for (; j < n; ++j) crow[j] += als * brow[j];
    }
  }
}

void avx2_adam_update(double* w, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2) {
  const __m256d b1 = _mm256_set1_pd(beta1);
  const __m256d b1c = _mm256_set1_pd(1.0 - beta1);
  const __m256d b2 = _mm256_set1_pd(beta2);
  const __m256d b2c = _mm256_set1_pd(1.0 - beta2);
  const __m256d inv_bias1 = _mm256_set1_pd(1.0 / bias1);
  const __m256d inv_bias2 = _mm256_set1_pd(1.0 / bias2);
  const __m256d lrv = _mm256_set1_pd(lr);
  const __m256d epsv = _mm256_set1_pd(eps);

  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d gv = _mm256_loadu_pd(g + i);
    __m256d mv = _mm256_loadu_pd(m + i);
    __m256d vv = _mm256_loadu_pd(v + i);
    mv = _mm256_fmadd_pd(b1, mv, _mm256_mul_pd(b1c, gv));
    vv = _mm256_fmadd_pd(b2, vv, _mm256_mul_pd(b2c, _mm256_mul_pd(gv, gv)));
    _mm256_storeu_pd(m + i, mv);
    _mm256_storeu_pd(v + i, vv);
    const __m256d m_hat = _mm256_mul_pd(mv, inv_bias1);
    const __m256d v_hat = _mm256_mul_pd(vv, inv_bias2);
    const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(v_hat), epsv);
    __m256d wv = _mm256_loadu_pd(w + i);
    wv = _mm256_sub_pd(wv, _mm256_div_pd(_mm256_mul_pd(lrv, m_hat), denom));
    _mm256_storeu_pd(w + i, wv);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
  }
}

void avx2_softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x + r * cols;

    __m256d mxv = _mm256_set1_pd(row[0]);
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
      mxv = _mm256_max_pd(mxv, _mm256_loadu_pd(row + j));
    }
    double lanes[4];
    _mm256_storeu_pd(lanes, mxv);
    double mx = std::max(std::max(lanes[0], lanes[1]),
                         std::max(lanes[2], lanes[3]));
    for (; j < cols; ++j) mx = std::max(mx, row[j]);

    // exp stays scalar (libm); the surrounding reduction and normalisation
    // are vectorised.
    double sum = 0.0;
    for (std::size_t t = 0; t < cols; ++t) {
      row[t] = std::exp(row[t] - mx);
      sum += row[t];
    }
    const __m256d sv = _mm256_set1_pd(sum);
    j = 0;
    for (; j + 4 <= cols; j += 4) {
      _mm256_storeu_pd(row + j, _mm256_div_pd(_mm256_loadu_pd(row + j), sv));
    }
    for (; j < cols; ++j) row[j] /= sum;
  }
}

}  // namespace threatlens::kernels::detail

#endif  // THREATLENS_HAVE_AVX2
