#pragma once

#include <cstddef>

namespace threatlens::kernels {

// Dense double-precision kernels behind the model math. Every operation has
// a scalar reference implementation; on x86-64 an AVX2/FMA variant and on
// aarch64 a NEON variant are selected at runtime. The SIMD variants are
// equivalence-tested against the scalar references. Reductions reassociate,
// so a given machine is bit-reproducible run to run but scalar and SIMD
// paths may differ in the last ulps; set THREATLENS_NO_SIMD=1 (or call
// force_scalar) to pin the scalar path for cross-machine comparisons.

enum class Isa { scalar, avx2, neon };

Isa active_isa();
const char* isa_name();
void force_scalar(bool on);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);
// x[i] *= a
void scale(double a, double* x, std::size_t n);
// out[i] = a[i] + b[i]
void add(const double* a, const double* b, double* out, std::size_t n);
double dot(const double* a, const double* b, std::size_t n);
double sum_squares(const double* x, std::size_t n);

// Row-major matrix products; C is overwritten.
// C[m x n] = A[m x k] * B[k x n]
void matmul_nn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_nt(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);
// C[k x n] = A[m x k]^T * B[m x n]
void matmul_tn(const double* a, const double* b, double* c, std::size_t m,
               std::size_t k, std::size_t n);

// In-place softmax over each row of x[rows x cols], max-subtracted.
void softmax_rows(double* x, std::size_t rows, std::size_t cols);

// Fused Adam update: m = b1*m + (1-b1)*g, v = b2*v + (1-b2)*g^2,
// w -= lr * (m/bias1) / (sqrt(v/bias2) + eps). bias1/bias2 are the
// step-dependent corrections 1-b1^t and 1-b2^t.
void adam_update(double* w, const double* g, double* m, double* v,
                 std::size_t n, double lr, double beta1, double beta2,
                 double eps, double bias1, double bias2);

namespace detail {

// Scalar references (ground truth for the equivalence tests).
void scalar_axpy(double a, const double* x, double* y, std::size_t n);
void scalar_scale(double a, double* x, std::size_t n);
void scalar_add(const double* a, const double* b, double* out, std::size_t n);
double scalar_dot(const double* a, const double* b, std::size_t n);
double scalar_sum_squares(const double* x, std::size_t n);
void scalar_matmul_nn(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void scalar_matmul_nt(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void scalar_matmul_tn(const double* a, const double* b, double* c,
                      std::size_t m, std::size_t k, std::size_t n);
void scalar_softmax_rows(double* x, std::size_t rows, std::size_t cols);
void scalar_adam_update(double* w, const double* g, double* m, double* v,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bias1, double bias2);

#if defined(THREATLENS_HAVE_AVX2)
void avx2_axpy(double a, const double* x, double* y, std::size_t n);
void avx2_scale(double a, double* x, std::size_t n);
void avx2_add(const double* a, const double* b, double* out, std::size_t n);
double avx2_dot(const double* a, const double* b, std::size_t n);
double avx2_sum_squares(const double* x, std::size_t n);
void avx2_matmul_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);
void avx2_matmul_nt(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);
void avx2_matmul_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);
void avx2_softmax_rows(double* x, std::size_t rows, std::size_t cols);
void avx2_adam_update(double* w, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
#endif

#if defined(THREATLENS_HAVE_NEON)
void neon_axpy(double a, const double* x, double* y, std::size_t n);
void neon_scale(double a, double* x, std::size_t n);
void neon_add(const double* a, const double* b, double* out, std::size_t n);
double neon_dot(const double* a, const double* b, std::size_t n);
double neon_sum_squares(const double* x, std::size_t n);
void neon_matmul_nn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);
void neon_matmul_nt(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);
void neon_matmul_tn(const double* a, const double* b, double* c, std::size_t m,
                    std::size_t k, std::size_t n);
void neon_softmax_rows(double* x, std::size_t rows, std::size_t cols);
void neon_adam_update(double* w, const double* g, double* m, double* v,
                      std::size_t n, double lr, double beta1, double beta2,
                      double eps, double bias1, double bias2);
#endif

}  // namespace detail

}  // namespace threatlens::kernels
