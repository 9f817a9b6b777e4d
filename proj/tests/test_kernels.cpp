#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "threatlens/kernels.hpp"
#include "threatlens/rng.hpp"

using namespace threatlens;
namespace k = threatlens::kernels;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform01() * 2.0 - 1.0;
  return v;
}

bool close(double a, double b, double rel = 1e-10, double abs_tol = 1e-12) {
  return std::fabs(a - b) <=
         std::max(abs_tol, rel * std::max(std::fabs(a), std::fabs(b)));
}

bool all_close(const std::vector<double>& a, const std::vector<double>& b,
               double rel = 1e-10) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!close(a[i], b[i], rel)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("dispatch reports an isa") {
  CHECK(k::isa_name() != nullptr);
  k::force_scalar(true);
  CHECK(k::active_isa() == k::Isa::scalar);
  k::force_scalar(false);
}

#if defined(THREATLENS_HAVE_AVX2)

TEST_CASE("avx2 variants match the scalar references") {
  if (k::active_isa() != k::Isa::avx2) {
    MESSAGE("avx2 not available at runtime, skipping equivalence");
    return;
  }
  Rng rng(7);
  for (std::size_t n : {1u, 3u, 4u, 7u, 16u, 33u, 257u}) {
    auto x = random_vec(rng, n);
    auto y = random_vec(rng, n);

    {
      auto y1 = y, y2 = y;
      k::detail::scalar_axpy(0.37, x.data(), y1.data(), n);
      k::detail::avx2_axpy(0.37, x.data(), y2.data(), n);
      CHECK(all_close(y1, y2));
    }
    {
      auto x1 = x, x2 = x;
      k::detail::scalar_scale(-1.25, x1.data(), n);
      k::detail::avx2_scale(-1.25, x2.data(), n);
      CHECK(all_close(x1, x2));
    }
    {
      std::vector<double> o1(n), o2(n);
      k::detail::scalar_add(x.data(), y.data(), o1.data(), n);
      k::detail::avx2_add(x.data(), y.data(), o2.data(), n);
      CHECK(all_close(o1, o2));
    }
    CHECK(close(k::detail::scalar_dot(x.data(), y.data(), n),
                k::detail::avx2_dot(x.data(), y.data(), n), 1e-12, 1e-13));
    CHECK(close(k::detail::scalar_sum_squares(x.data(), n),
                k::detail::avx2_sum_squares(x.data(), n), 1e-12, 1e-13));
  }
}

TEST_CASE("avx2 matmuls match the scalar references") {
  if (k::active_isa() != k::Isa::avx2) return;
  Rng rng(11);
  const std::size_t shapes[][3] = {
      {1, 1, 1}, {2, 3, 4}, {5, 8, 3}, {7, 16, 9}, {13, 31, 17}, {32, 64, 20}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], kk = s[1], n = s[2];
    auto a = random_vec(rng, m * kk);
    auto b_nn = random_vec(rng, kk * n);
    auto b_nt = random_vec(rng, n * kk);
    auto b_tn = random_vec(rng, m * n);

    std::vector<double> c1(m * n), c2(m * n);
    k::detail::scalar_matmul_nn(a.data(), b_nn.data(), c1.data(), m, kk, n);
    k::detail::avx2_matmul_nn(a.data(), b_nn.data(), c2.data(), m, kk, n);
    CHECK(all_close(c1, c2));

    k::detail::scalar_matmul_nt(a.data(), b_nt.data(), c1.data(), m, kk, n);
    k::detail::avx2_matmul_nt(a.data(), b_nt.data(), c2.data(), m, kk, n);
    CHECK(all_close(c1, c2));

    std::vector<double> d1(kk * n), d2(kk * n);
    k::detail::scalar_matmul_tn(a.data(), b_tn.data(), d1.data(), m, kk, n);
    k::detail::avx2_matmul_tn(a.data(), b_tn.data(), d2.data(), m, kk, n);
    CHECK(all_close(d1, d2));
  }
}

TEST_CASE("avx2 adam update matches the scalar reference") {
  if (k::active_isa() != k::Isa::avx2) return;
  Rng rng(41);
  for (std::size_t n : {1u, 4u, 7u, 63u, 200u}) {
    auto w1 = random_vec(rng, n);
    auto g = random_vec(rng, n);
    auto m1 = random_vec(rng, n);
    std::vector<double> v1(n);
    for (double& x : v1) x = rng.uniform01();  // second moments stay positive
    auto w2 = w1, m2 = m1, v2 = v1;

    k::detail::scalar_adam_update(w1.data(), g.data(), m1.data(), v1.data(), n,
                                  1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001);
    k::detail::avx2_adam_update(w2.data(), g.data(), m2.data(), v2.data(), n,
                                1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001);
    CHECK(all_close(w1, w2, 1e-12));
    CHECK(all_close(m1, m2, 1e-12));
    CHECK(all_close(v1, v2, 1e-12));
  }
}

TEST_CASE("avx2 softmax matches the scalar reference") {
  if (k::active_isa() != k::Isa::avx2) return;
  Rng rng(13);
  for (std::size_t cols : {1u, 2u, 5u, 8u, 31u}) {
    auto x1 = random_vec(rng, 6 * cols);
    auto x2 = x1;
    k::detail::scalar_softmax_rows(x1.data(), 6, cols);
    k::detail::avx2_softmax_rows(x2.data(), 6, cols);
    CHECK(all_close(x1, x2, 1e-12));
  }
}

#endif  // THREATLENS_HAVE_AVX2

TEST_CASE("matmul_nt and matmul_tn agree with explicit transposes") {
  Rng rng(17);
  const std::size_t m = 6, kk = 9, n = 5;
  auto a = random_vec(rng, m * kk);
  auto b = random_vec(rng, n * kk);

  // C = A * B^T via matmul_nt vs transposing B and using matmul_nn
  std::vector<double> bt(kk * n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < kk; ++c) bt[c * n + r] = b[r * kk + c];
  }
  std::vector<double> c1(m * n), c2(m * n);
  k::matmul_nt(a.data(), b.data(), c1.data(), m, kk, n);
  k::matmul_nn(a.data(), bt.data(), c2.data(), m, kk, n);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(close(c1[i], c2[i], 1e-9));
  }

  // C = A^T * D via matmul_tn vs transposing A and using matmul_nn
  auto d = random_vec(rng, m * n);
  std::vector<double> at(kk * m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < kk; ++c) at[c * m + r] = a[r * kk + c];
  }
  std::vector<double> e1(kk * n), e2(kk * n);
  k::matmul_tn(a.data(), d.data(), e1.data(), m, kk, n);
  k::matmul_nn(at.data(), d.data(), e2.data(), kk, m, n);
  for (std::size_t i = 0; i < e1.size(); ++i) {
    CHECK(close(e1[i], e2[i], 1e-9));
  }
}

TEST_CASE("softmax rows are probability distributions") {
  Rng rng(23);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t rows = 1 + rng.bounded(6);
    const std::size_t cols = 1 + rng.bounded(40);
    auto x = random_vec(rng, rows * cols);
    for (double& v : x) v *= 30.0;  // spread the logits
    k::softmax_rows(x.data(), rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      double sum = 0.0;
      for (std::size_t c = 0; c < cols; ++c) {
        CHECK(x[r * cols + c] >= 0.0);
        sum += x[r * cols + c];
      }
      CHECK(std::fabs(sum - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("softmax with a -1e30 mask zeroes the masked columns") {
  std::vector<double> row = {1.0, 2.0, -1e30, 0.5};
  k::softmax_rows(row.data(), 1, 4);
  CHECK(row[2] == 0.0);
  CHECK(std::fabs(row[0] + row[1] + row[3] - 1.0) < 1e-9);
}
