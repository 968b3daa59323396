#pragma once

#include <cstddef>
#include <string_view>

// Arithmetic inner loops with a portable scalar reference and an AVX2/FMA
// variant. The variant is chosen once at startup from CPUID and can be
// overridden with CEUNET_ISA=scalar|avx2 or set_isa().

namespace ceunet::simd {

enum class Isa { Scalar, Avx2 };

enum class Trans { No, Yes };

std::string_view to_string(Isa isa);

bool avx2_supported();
Isa active_isa();
// Throws std::invalid_argument when the requested ISA is unavailable.
void set_isa(Isa isa);

// C[m x n] (+)= op(A)[m x k] * op(B)[k x n], all row-major.
// op(A) = A (lda >= k) or A^T with A stored k x m (lda >= m); same for B.
// With accumulate == false, C is overwritten.
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate);

// sum_i (a_i - b_i)^2
double squared_distance(const double* a, const double* b, std::size_t n);

namespace scalar {
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace scalar

namespace avx2 {
template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate);
double squared_distance(const double* a, const double* b, std::size_t n);
}  // namespace avx2

}  // namespace ceunet::simd
