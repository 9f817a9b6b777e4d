#include "threatlens/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#if defined(__x86_64__) || defined(_M_X64)
#include <cpuid.h>
#endif

namespace threatlens::kernels {

namespace detail {

void scalar_axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void scalar_scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void scalar_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

double scalar_dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

double scalar_sum_squares(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

void scalar_matmul_nn(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    std::fill(crow, crow + n, 0.0);
    for (std::size_t l = 0; l < k; ++l) {
      const double alv = a[i * k + l];
      const double* brow = b + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += alv * brow[j];
    }
  }
}

void scalar_matmul_nt(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      c[i * n + j] = scalar_dot(arow, b + j * k, k);
    }
  }
}

void scalar_matmul_tn(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n) {
  std::fill(c, c + k * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double* brow = b + i * n;
    for (std::size_t l = 0; l < k; ++l) {
      const double alv = a[i * k + l];
      double* crow = c + l * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += alv * brow[j];
    }
  }
}

void scalar_softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = x + r * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < cols; ++j) row[j] /= sum;
  }
}

void scalar_adam_update(double* w, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bias1, double bias2) {
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
    const double m_hat = m[i] / bias1;
    const double v_hat = v[i] / bias2;
    w[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace detail

namespace {

bool cpu_has_avx2() {
#if defined(THREATLENS_HAVE_AVX2) && (defined(__x86_64__) || defined(_M_X64))
  unsigned int eax, ebx, ecx, edx;
  if (__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) {
    return (ebx & (1u << 5)) != 0;  // AVX2 bit
  }
#endif
  return false;
}

Isa detect() {
#if defined(THREATLENS_HAVE_NEON)
  return Isa::neon;  // baseline on aarch64
#else
  if (cpu_has_avx2()) return Isa::avx2;
  return Isa::scalar;
#endif
}

bool& scalar_override() {
  static bool v = [] {
    const char* e = std::getenv("THREATLENS_NO_SIMD");
    return e != nullptr && e[0] != '\0' && e[0] != '0';
  }();
  return v;
}

}  // namespace

Isa active_isa() {
  static const Isa detected = detect();
  return scalar_override() ? Isa::scalar : detected;
}

const char* isa_name() {
  switch (active_isa()) {
    case Isa::avx2:
      return "avx2";
    case Isa::neon:
      return "neon";
    default:
      return "scalar";
  }
}

void force_scalar(bool on) { scalar_override() = on; }

#if defined(THREATLENS_HAVE_AVX2)
#define THREATLENS_DISPATCH(fn, ...)              \
  do {                                            \
    if (active_isa() == Isa::avx2) {              \
      return detail::avx2_##fn(__VA_ARGS__);      \
    }                                             \
    return detail::scalar_##fn(__VA_ARGS__);      \
  } while (0)
#elif defined(THREATLENS_HAVE_NEON)
#define THREATLENS_DISPATCH(fn, ...)              \
  do {                                            \
    if (active_isa() == Isa::neon) {              \
      return detail::neon_##fn(__VA_ARGS__);      \
    }                                             \
    return detail::scalar_##fn(__VA_ARGS__);      \
  } while (0)
#else
#define THREATLENS_DISPATCH(fn, ...) return detail::scalar_##fn(__VA_ARGS__)
#endif

void axpy(double a, const double* x, double* y, std::size_t n) {
  THREATLENS_DISPATCH(axpy, a, x, y, n);
}

void scale(double a, double* x, std::size_t n) {
  THREATLENS_DISPATCH(scale, a, x, n);
}

void add(const double* a, const double* b, double* out, std::size_t n) {
  THREATLENS_DISPATCH(add, a, b, out, n);
}

double dot(const double* a, const double* b, std::size_t n) {
  THREATLENS_DISPATCH(dot, a, b, n);
}

double sum_squares(const double* x, std::size_t n) {
  THREATLENS_DISPATCH(sum_squares, x, n);
}

void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  THREATLENS_DISPATCH(matmul_nn, a, b, c, m, k, n);
}

void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  THREATLENS_DISPATCH(matmul_nt, a, b, c, m, k, n);
}

void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n) {
  THREATLENS_DISPATCH(matmul_tn, a, b, c, m, k, n);
}

void softmax_rows(double* x, std::size_t rows, std::size_t cols) {
  THREATLENS_DISPATCH(softmax_rows, x, rows, cols);
}

void adam_update(double* w, const double* g, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2) {
  THREATLENS_DISPATCH(adam_update, w, g, m, v, n, lr, beta1, beta2, eps, bias1,
                      bias2);
}

#undef THREATLENS_DISPATCH

}  // namespace threatlens::kernels
