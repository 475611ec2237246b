#include <immintrin.h>

#include "e2d/simd/kernels.hpp"

namespace e2d::simd {
namespace {

// 4x8 register tile. Each accumulator lane sees exactly the scalar sequence
// acc = acc + a*b for p = 0..k-1.
inline void tile_4x8(std::size_t k, const double* a, std::size_t lda, const double* b,
                     std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + ldc), c11 = _mm256_loadu_pd(c + ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc), c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc), c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    __m256d av = _mm256_broadcast_sd(a + p);
    c00 = _mm256_add_pd(c00, _mm256_mul_pd(av, b0));
    c01 = _mm256_add_pd(c01, _mm256_mul_pd(av, b1));
    av = _mm256_broadcast_sd(a + lda + p);
    c10 = _mm256_add_pd(c10, _mm256_mul_pd(av, b0));
    c11 = _mm256_add_pd(c11, _mm256_mul_pd(av, b1));
    av = _mm256_broadcast_sd(a + 2 * lda + p);
    c20 = _mm256_add_pd(c20, _mm256_mul_pd(av, b0));
    c21 = _mm256_add_pd(c21, _mm256_mul_pd(av, b1));
    av = _mm256_broadcast_sd(a + 3 * lda + p);
    c30 = _mm256_add_pd(c30, _mm256_mul_pd(av, b0));
    c31 = _mm256_add_pd(c31, _mm256_mul_pd(av, b1));
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

inline void tile_1x4(std::size_t k, const double* a, const double* b, std::size_t ldb,
                     double* c) {
  __m256d acc = _mm256_loadu_pd(c);
  for (std::size_t p = 0; p < k; ++p) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_broadcast_sd(a + p),
                                           _mm256_loadu_pd(b + p * ldb)));
  }
  _mm256_storeu_pd(c, acc);
}

inline void tile_1x1(std::size_t k, const double* a, const double* b, std::size_t ldb,
                     double* c) {
  double acc = *c;
  for (std::size_t p = 0; p < k; ++p) acc = acc + a[p] * b[p * ldb];
  *c = acc;
}

void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c,
               std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      tile_4x8(k, a + i * lda, lda, b + j, ldb, c + i * ldc + j, ldc);
    }
    for (std::size_t r = i; r < i + 4; ++r) {
      std::size_t jj = j;
      for (; jj + 4 <= n; jj += 4) tile_1x4(k, a + r * lda, b + jj, ldb, c + r * ldc + jj);
      for (; jj < n; ++jj) tile_1x1(k, a + r * lda, b + jj, ldb, c + r * ldc + jj);
    }
  }
  for (; i < m; ++i) {
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) tile_1x4(k, a + i * lda, b + j, ldb, c + i * ldc + j);
    for (; j < n; ++j) tile_1x1(k, a + i * lda, b + j, ldb, c + i * ldc + j);
  }
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i),
                                          _mm256_mul_pd(av, _mm256_loadu_pd(x + i))));
  }
  for (; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void add_avx2(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] + y[i];
}

void mul_avx2(std::size_t n, const double* x, const double* y, double* out) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) out[i] = x[i] * y[i];
}

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  alignas(32) double s[4];
  _mm256_store_pd(s, acc);
  double total = (s[0] + s[1]) + (s[2] + s[3]);
  for (; i < n; ++i) total = total + x[i] * y[i];
  return total;
}

}  // namespace

const KernelTable* avx2_table_impl() {
  static const KernelTable table{Isa::kAvx2, "avx2", gemm_avx2, axpy_avx2,
                                 add_avx2,   mul_avx2, dot_avx2};
  return &table;
}

}  // namespace e2d::simd
