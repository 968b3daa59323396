// Compiled with -mavx2 -mfma; only reached after a CPUID check.
#include "ceunet/simd/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <vector>

namespace ceunet::simd::avx2 {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using type = __m256;
  static constexpr std::size_t width = 8;
  static type zero() { return _mm256_setzero_ps(); }
  static type load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, type v) { _mm256_storeu_ps(p, v); }
  static type broadcast(const float* p) { return _mm256_broadcast_ss(p); }
  static type fma(type a, type b, type c) { return _mm256_fmadd_ps(a, b, c); }
  static type add(type a, type b) { return _mm256_add_ps(a, b); }
};

template <>
struct Vec<double> {
  using type = __m256d;
  static constexpr std::size_t width = 4;
  static type zero() { return _mm256_setzero_pd(); }
  static type load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, type v) { _mm256_storeu_pd(p, v); }
  static type broadcast(const double* p) { return _mm256_broadcast_sd(p); }
  static type fma(type a, type b, type c) { return _mm256_fmadd_pd(a, b, c); }
  static type add(type a, type b) { return _mm256_add_pd(a, b); }
};

constexpr std::size_t kMr = 6;
constexpr std::size_t kKc = 256;
constexpr std::size_t kMc = 120;
constexpr std::size_t kNc = 3072;

template <class T>
constexpr std::size_t nr() {
  return 2 * Vec<T>::width;
}

// Packs op(A)[ic:ic+mc, pc:pc+kc] into MR-row panels, k-major within a panel.
template <class T>
void pack_a(Trans ta, const T* a, std::size_t lda, std::size_t ic,
            std::size_t pc, std::size_t mc, std::size_t kc, T* out) {
  for (std::size_t i0 = 0; i0 < mc; i0 += kMr) {
    const std::size_t rows = std::min(kMr, mc - i0);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < kMr; ++r) {
        T v = T(0);
        if (r < rows) {
          const std::size_t i = ic + i0 + r;
          const std::size_t kk = pc + p;
          v = ta == Trans::No ? a[i * lda + kk] : a[kk * lda + i];
        }
        *out++ = v;
      }
    }
  }
}

// Packs op(B)[pc:pc+kc, jc:jc+nc] into NR-column panels.
template <class T>
void pack_b(Trans tb, const T* b, std::size_t ldb, std::size_t pc,
            std::size_t jc, std::size_t kc, std::size_t nc, T* out) {
  constexpr std::size_t NR = nr<T>();
  for (std::size_t j0 = 0; j0 < nc; j0 += NR) {
    const std::size_t cols = std::min(NR, nc - j0);
    for (std::size_t p = 0; p < kc; ++p) {
      const std::size_t kk = pc + p;
      if (tb == Trans::No && cols == NR) {
        const T* src = b + kk * ldb + jc + j0;
        std::copy_n(src, NR, out);
        out += NR;
        continue;
      }
      for (std::size_t c = 0; c < NR; ++c) {
        T v = T(0);
        if (c < cols) {
          const std::size_t j = jc + j0 + c;
          v = tb == Trans::No ? b[kk * ldb + j] : b[j * ldb + kk];
        }
        *out++ = v;
      }
    }
  }
}

template <class T>
void micro_kernel(std::size_t kc, const T* ap, const T* bp, T* c,
                  std::size_t ldc, std::size_t rows, std::size_t cols,
                  bool overwrite) {
  using V = Vec<T>;
  using reg = typename V::type;
  constexpr std::size_t W = V::width;
  constexpr std::size_t NR = nr<T>();

  reg acc[kMr][2];
  for (std::size_t r = 0; r < kMr; ++r) acc[r][0] = acc[r][1] = V::zero();

  for (std::size_t p = 0; p < kc; ++p) {
    const reg b0 = V::load(bp);
    const reg b1 = V::load(bp + W);
    for (std::size_t r = 0; r < kMr; ++r) {
      const reg av = V::broadcast(ap + r);
      acc[r][0] = V::fma(av, b0, acc[r][0]);
      acc[r][1] = V::fma(av, b1, acc[r][1]);
    }
    ap += kMr;
    bp += NR;
  }

  if (rows == kMr && cols == NR) {
    for (std::size_t r = 0; r < kMr; ++r) {
      T* dst = c + r * ldc;
      if (overwrite) {
        V::store(dst, acc[r][0]);
        V::store(dst + W, acc[r][1]);
      } else {
        V::store(dst, V::add(V::load(dst), acc[r][0]));
        V::store(dst + W, V::add(V::load(dst + W), acc[r][1]));
      }
    }
    return;
  }

  alignas(32) T tile[kMr * NR];
  for (std::size_t r = 0; r < kMr; ++r) {
    V::store(tile + r * NR, acc[r][0]);
    V::store(tile + r * NR + W, acc[r][1]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    T* dst = c + r * ldc;
    for (std::size_t j = 0; j < cols; ++j) {
      dst[j] = overwrite ? tile[r * NR + j] : dst[j] + tile[r * NR + j];
    }
  }
}

}  // namespace

template <class T>
void gemm(Trans ta, Trans tb, std::size_t m, std::size_t n, std::size_t k,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T* c,
          std::size_t ldc, bool accumulate) {
  constexpr std::size_t NR = nr<T>();
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate) {
      for (std::size_t i = 0; i < m; ++i) std::fill_n(c + i * ldc, n, T(0));
    }
    return;
  }

  thread_local std::vector<T> apack;
  thread_local std::vector<T> bpack;
  apack.resize(((kMc + kMr - 1) / kMr) * kMr * kKc);
  bpack.resize(((kNc + NR - 1) / NR) * NR * kKc);

  for (std::size_t jc = 0; jc < n; jc += kNc) {
    const std::size_t nc = std::min(kNc, n - jc);
    for (std::size_t pc = 0; pc < k; pc += kKc) {
      const std::size_t kc = std::min(kKc, k - pc);
      const bool overwrite = !accumulate && pc == 0;
      pack_b(tb, b, ldb, pc, jc, kc, nc, bpack.data());
      for (std::size_t ic = 0; ic < m; ic += kMc) {
        const std::size_t mc = std::min(kMc, m - ic);
        pack_a(ta, a, lda, ic, pc, mc, kc, apack.data());
        for (std::size_t j0 = 0; j0 < nc; j0 += NR) {
          const std::size_t cols = std::min(NR, nc - j0);
          const T* bp = bpack.data() + (j0 / NR) * NR * kc;
          for (std::size_t i0 = 0; i0 < mc; i0 += kMr) {
            const std::size_t rows = std::min(kMr, mc - i0);
            const T* ap = apack.data() + (i0 / kMr) * kMr * kc;
            micro_kernel(kc, ap, bp, c + (ic + i0) * ldc + jc + j0, ldc, rows,
                         cols, overwrite);
          }
        }
      }
    }
  }
}

double squared_distance(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    const __m256d d1 =
        _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  for (; i + 4 <= n; i += 4) {
    const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
  }
  acc0 = _mm256_add_pd(acc0, acc1);
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc0);
  double s = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

template void gemm<float>(Trans, Trans, std::size_t, std::size_t, std::size_t,
                          const float*, std::size_t, const float*, std::size_t,
                          float*, std::size_t, bool);
template void gemm<double>(Trans, Trans, std::size_t, std::size_t, std::size_t,
                           const double*, std::size_t, const double*,
                           std::size_t, double*, std::size_t, bool);

}  // namespace ceunet::simd::avx2
