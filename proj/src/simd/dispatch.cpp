#include "ceunet/simd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace ceunet::simd {
namespace {

Isa detect() {
  if (const char* env = std::getenv("CEUNET_ISA")) {
    const std::string want(env);
    if (want == "scalar") return Isa::Scalar;
    if (want == "avx2" && avx2_supported()) return Isa::Avx2;
  }
  return avx2_supported() ? Isa::Avx2 : Isa::Scalar;
}

Isa& current() {
  static Isa isa = detect();
  return isa;
}

}  // namespace

std::string_view to_string(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

bool avx2_supported() {
#if defined(CEUNET_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Isa active_isa() { return current(); }

void set_isa(Isa isa) {
  if (isa == Isa::Avx2 && !avx2_supported()) {
    throw std::invalid_argument("AVX2/FMA kernels are not available on this CPU or build");
  }
  current() = isa;
}

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate) {
#if defined(CEUNET_HAVE_AVX2)
  if (current() == Isa::Avx2) {
    avx2::gemm<T>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
#endif
  scalar::gemm<T>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

double squared_distance(const double* a, const double* b, std::size_t n) {
#if defined(CEUNET_HAVE_AVX2)
  if (current() == Isa::Avx2) return avx2::squared_distance(a, b, n);
#endif
  return scalar::squared_distance(a, b, n);
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t,
                          const float*, std::size_t, const float*, std::size_t,
                          float*, std::size_t, bool);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t,
                           const double*, std::size_t, const double*,
                           std::size_t, double*, std::size_t, bool);

}  // namespace ceunet::simd
