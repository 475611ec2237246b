#include <vector>

#include "doctest.h"
#include "e2d/ops.hpp"
#include "e2d/simd/kernels.hpp"
#include "test_support.hpp"

using namespace e2d;
using e2d::test::bitwise_equal;
using e2d::test::random_values;

namespace {

// Per-element reference with the documented accumulation order.
void naive_gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
                const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = c[i * ldc + j];
      for (std::size_t p = 0; p < k; ++p) acc = acc + a[i * lda + p] * b[p * ldb + j];
      c[i * ldc + j] = acc;
    }
  }
}

double canonical_dot(std::size_t n, const double* x, const double* y) {
  double s[4] = {0.0, 0.0, 0.0, 0.0};
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    for (std::size_t l = 0; l < 4; ++l) s[l] = s[l] + x[i + l] * y[i + l];
  }
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (; i < n; ++i) total = total + x[i] * y[i];
  return total;
}

std::vector<const simd::KernelTable*> tables() {
  std::vector<const simd::KernelTable*> t{&simd::scalar_kernels()};
  if (const auto* avx = simd::avx2_kernels()) t.push_back(avx);
  return t;
}

struct IsaRestore {
  ~IsaRestore() {
    if (!simd::select_isa(simd::Isa::kAvx2)) simd::select_isa(simd::Isa::kScalar);
  }
};

}  // namespace

TEST_CASE("gemm variants match the per-element reference bit for bit") {
  const std::size_t sizes[] = {1, 2, 3, 4, 5, 7, 8, 9, 13, 16, 17, 33};
  std::uint64_t seed = 1;
  for (std::size_t m : sizes) {
    for (std::size_t n : sizes) {
      for (std::size_t k : {std::size_t{1}, std::size_t{6}, std::size_t{25}}) {
        const std::size_t lda = k + 1, ldb = n + 3, ldc = n + 2;
        const auto a = random_values(m * lda, seed++);
        const auto b = random_values(k * ldb, seed++);
        const auto c0 = random_values(m * ldc, seed++);
        auto expect = c0;
        naive_gemm(m, n, k, a.data(), lda, b.data(), ldb, expect.data(), ldc);
        for (const auto* t : tables()) {
          auto got = c0;
          t->gemm(m, n, k, a.data(), lda, b.data(), ldb, got.data(), ldc);
          INFO(t->name, " m=", m, " n=", n, " k=", k);
          CHECK(bitwise_equal(got, expect));
        }
      }
    }
  }
}

TEST_CASE("vector kernels agree across instruction sets") {
  for (std::size_t n = 0; n < 70; ++n) {
    const auto x = random_values(n, 100 + n);
    const auto y = random_values(n, 200 + n);
    std::vector<double> sum_ref(n), prod_ref(n), axpy_ref = y;
    for (std::size_t i = 0; i < n; ++i) {
      sum_ref[i] = x[i] + y[i];
      prod_ref[i] = x[i] * y[i];
      axpy_ref[i] = axpy_ref[i] + 0.37 * x[i];
    }
    const double dot_ref = canonical_dot(n, x.data(), y.data());
    for (const auto* t : tables()) {
      INFO(t->name, " n=", n);
      std::vector<double> out(n), ax = y;
      t->add(n, x.data(), y.data(), out.data());
      CHECK(bitwise_equal(out, sum_ref));
      t->mul(n, x.data(), y.data(), out.data());
      CHECK(bitwise_equal(out, prod_ref));
      t->axpy(n, 0.37, x.data(), ax.data());
      CHECK(bitwise_equal(ax, axpy_ref));
      const double d = t->dot(n, x.data(), y.data());
      CHECK(std::memcmp(&d, &dot_ref, sizeof d) == 0);
    }
  }
}

TEST_CASE("runtime selection switches the active table") {
  IsaRestore restore;
  REQUIRE(simd::select_isa(simd::Isa::kScalar));
  CHECK(simd::kernels().isa == simd::Isa::kScalar);
  if (simd::avx2_kernels() == nullptr) {
    CHECK_FALSE(simd::select_isa(simd::Isa::kAvx2));
    return;
  }
  REQUIRE(simd::select_isa(simd::Isa::kAvx2));
  CHECK(simd::kernels().isa == simd::Isa::kAvx2);
}

TEST_CASE("convolution forward and backward are ISA independent") {
  if (simd::avx2_kernels() == nullptr) return;
  IsaRestore restore;
  auto run = [](simd::Isa isa) {
    simd::select_isa(isa);
    auto x = test::random_parameter({2, 3, 11, 9}, 7);
    auto w = test::random_parameter({5, 3, 3, 3}, 8);
    auto b = test::random_parameter({5}, 9);
    const auto y = nn::conv2d(x, w, b, 2, 1);
    nn::sum(nn::mul(y, y)).backward();
    std::vector<double> all(y.data().begin(), y.data().end());
    for (const auto* t : {&x, &w, &b}) all.insert(all.end(), t->grad().begin(), t->grad().end());
    return all;
  };
  CHECK(bitwise_equal(run(simd::Isa::kScalar), run(simd::Isa::kAvx2)));
}
