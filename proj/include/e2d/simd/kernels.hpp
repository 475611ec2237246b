#pragma once

#include <cstddef>
#include <string_view>

// Dense float64 kernels behind a runtime-selected dispatch table.
//
// Every variant performs the same IEEE operations in the same order per output
// element (separate multiply and add, no fusion), so results are bit-identical
// across instruction sets. Only the evaluation schedule differs.

namespace e2d::simd {

enum class Isa { kScalar, kAvx2 };

struct KernelTable {
  Isa isa;
  std::string_view name;

  /// C[i,j] += sum_k A[i,k] * B[k,j], with k visited in ascending order and
  /// the running value seeded from C. Row-major with explicit leading dims.
  void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a,
               std::size_t lda, const double* b, std::size_t ldb, double* c,
               std::size_t ldc);

  /// y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);

  /// Sum of x[i]*y[i] with four interleaved partial sums combined as
  /// (s0 + s1) + (s2 + s3), then the tail added in order.
  double (*dot)(std::size_t n, const double* x, const double* y);
};

const KernelTable& scalar_kernels();

/// nullptr when the binary was built without AVX2 support or the CPU lacks it.
const KernelTable* avx2_kernels();

/// The table used by the tensor engine. Picks the widest supported ISA on
/// first use; E2D_SIMD=scalar in the environment forces the reference path.
const KernelTable& kernels();

/// Overrides the active table. Returns false if the ISA is unavailable.
bool select_isa(Isa isa);

}  // namespace e2d::simd
