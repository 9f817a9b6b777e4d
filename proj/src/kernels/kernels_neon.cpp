// NEON variants of the dense kernels (aarch64, where NEON is baseline).

#include "threatlens/kernels.hpp"

#if defined(THREATLENS_HAVE_NEON)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace threatlens::kernels::detail {

void neon_axpy(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    float64x2_t yv = vld1q_f64(y + i);
    yv = vfmaq_f64(yv, av, vld1q_f64(x + i));
    vst1q_f64(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void neon_scale(double a, double* x, std::size_t n) {
  const float64x2_t av = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(x + i, vmulq_f64(av, vld1q_f64(x + i)));
  }
  for (; i < n; ++i) x[i] *= a;
}

void neon_add(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(out + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

double neon_dot(const double* a, const double* b, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double neon_sum_squares(const double* x, std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t xv = vld1q_f64(x + i);
    acc = vfmaq_f64(acc, xv, xv);
  }
  double s = vaddvq_f64(acc);
  for (; i < n; ++i) s += x[i] * x[i];
  return s;
}

void neon_matmul_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      const double als = a[i * k + l];
      const float64x2_t alv = vdupq_n_f64(als);
      const double* brow = b + l * n;
      std::size_t j = 0;
      for (; j + 2 <= n; j += 2) {
        float64x2_t cv = vld1q_f64(crow + j);
        cv = vfmaq_f64(cv, alv, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += als * brow[j];
    }
  }
}

void neon_matmul_nt(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = neon_dot(arow, b + j * k, k);
    }
  }
}

void neon_matmul_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n) {
  std::fill(c, c + k * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double als = a[i * k + l];
      const float64x2_t alv = vdupq_n_f64(als);
      double* crow = c + l * n;
      std::size_t j = 0;
      for (; j + 2 <= n; j += 2) {
        float64x2_t cv = vld1q_f64(crow + j);
        cv = vfmaq_f64(cv, alv, vld1q_f64(brow + j));
        vst1q_f64(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += als * brow[j];
    }
  }
}

void neon_adam_update(double* w, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2) {
  const float64x2_t b1 = vdupq_n_f64(beta1);
  const float64x2_t b1c = vdupq_n_f64(1.0 - beta1);
  const float64x2_t b2 = vdupq_n_f64(beta2);
  const float64x2_t b2c = vdupq_n_f64(1.0 - beta2);
  const float64x2_t inv_bias1 = vdupq_n_f64(1.0 / bias1);
  const float64x2_t inv_bias2 = vdupq_n_f64(1.0 / bias2);
  const float64x2_t lrv = vdupq_n_f64(lr);
  const float64x2_t epsv = vdupq_n_f64(eps);

  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t gv = vld1q_f64(g + i);
    float64x2_t mv = vld1q_f64(m + i);
    float64x2_t vv = vld1q_f64(v + i);
    mv = vfmaq_f64(vmulq_f64(b1c, gv), b1, mv);
    vv = vfmaq_f64(vmulq_f64(b2c, vmulq_f64(gv, gv)), b2, vv);
    vst1q_f64(m + i, mv);
    vst1q_f64(v + i, vv);
    const float64x2_t m_hat = vmulq_f64(mv, inv_bias1);
    const float64x2_t v_hat = vmulq_f64(vv, inv_bias2);
    const float64x2_t denom = vaddq_f64(vsqrtq_f64(v_hat), epsv);
    float64x2_t wv = vld1q_f64(w + i);
    wv = vsubq_f64(wv, vdivq_f64(vmulq_f64(lrv, m_hat), denom));
    vst1q_f64(w + i, wv);
  }
  for (; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    w[i] -= lr * (m[i] / bias1) / (std::sqrt(v[i] / bias2) + eps);
  }
}

void neon_softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x + r * cols;

    float64x2_t mxv = vdupq_n_f64(row[0]);
    std::size_t j = 0;
    for (; j + 2 <= cols; j += 2) {
      mxv = vmaxq_f64(mxv, vld1q_f64(row + j));
    }
    double mx = std::max(vgetq_lane_f64(mxv, 0), vgetq_lane_f64(mxv, 1));
    for (; j < cols; ++j) mx = std::max(mx, row[j]);

    double sum = 0.0;
    for (std::size_t t = 0; t < cols; ++t) {
      row[t] = std::exp(row[t] - mx);
      sum += row[t];
    }
    const float64x2_t sv = vdupq_n_f64(sum);
    j = 0;
    for (; j + 2 <= cols; j += 2) {
      vst1q_f64(row + j, vdivq_f64(vld1q_f64(row + j), sv));
    }
    for (; j < cols; ++j) row[j] /= sum;
  }
}

}  // namespace threatlens::kernels::detail

#endif  // THREATLENS_HAVE_NEON
