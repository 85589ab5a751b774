// Packed single-precision GEMM for AVX2 + FMA. This translation unit is the
// only one compiled with -mavx2 -mfma; nothing here may run unless the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include <algorithm>
#include <cstring>
#include <vector>

#include "pcle/simd/gemm.hpp"

namespace pcle::simd::avx2 {
namespace {

constexpr int kMr = 6;
constexpr int kNr = 16;
constexpr int kMc = 96;
constexpr int kKc = 256;
constexpr int kNc = 1024;

// packed layout: panel-major, each panel kc x kMr, row-of-panel fastest
void pack_a(Trans ta, const float* a, int lda, int i0, int mc, int p0, int kc, float* out) {
  for (int ip = 0; ip < mc; ip += kMr) {
    const int rows = std::min(kMr, mc - ip);
    if (ta == Trans::no) {
      for (int r = 0; r < kMr; ++r) {
        if (r < rows) {
          const float* src = a + static_cast<long>(i0 + ip + r) * lda + p0;
          for (int p = 0; p < kc; ++p) out[p * kMr + r] = src[p];
        } else {
          for (int p = 0; p < kc; ++p) out[p * kMr + r] = 0.0f;
        }
      }
    } else {
      for (int p = 0; p < kc; ++p) {
        const float* src = a + static_cast<long>(p0 + p) * lda + i0 + ip;
        int r = 0;
        for (; r < rows; ++r) out[p * kMr + r] = src[r];
        for (; r < kMr; ++r) out[p * kMr + r] = 0.0f;
      }
    }
    out += static_cast<long>(kc) * kMr;
  }
}

// packed layout: panel-major, each panel kc x kNr
void pack_b(Trans tb, const float* b, int ldb, int p0, int kc, int j0, int nc, float* out) {
  for (int jp = 0; jp < nc; jp += kNr) {
    const int cols = std::min(kNr, nc - jp);
    if (tb == Trans::no) {
      for (int p = 0; p < kc; ++p) {
        const float* src = b + static_cast<long>(p0 + p) * ldb + j0 + jp;
        if (cols == kNr) {
          _mm256_storeu_ps(out, _mm256_loadu_ps(src));
          _mm256_storeu_ps(out + 8, _mm256_loadu_ps(src + 8));
        } else {
          int c = 0;
          for (; c < cols; ++c) out[c] = src[c];
          for (; c < kNr; ++c) out[c] = 0.0f;
        }
        out += kNr;
      }
    } else {
      for (int c = 0; c < kNr; ++c) {
        if (c < cols) {
          const float* src = b + static_cast<long>(j0 + jp + c) * ldb + p0;
          for (int p = 0; p < kc; ++p) out[p * kNr + c] = src[p];
        } else {
          for (int p = 0; p < kc; ++p) out[p * kNr + c] = 0.0f;
        }
      }
      out += static_cast<long>(kc) * kNr;
    }
  }
}

// C[6 x 16] += Apanel * Bpanel; writes through a scratch tile at the edges
void micro_kernel(int kc, const float* ap, const float* bp, float* c, int ldc, int rows, int cols) {
  __m256 c00 = _mm256_setzero_ps(), c01 = _mm256_setzero_ps();
  __m256 c10 = _mm256_setzero_ps(), c11 = _mm256_setzero_ps();
  __m256 c20 = _mm256_setzero_ps(), c21 = _mm256_setzero_ps();
  __m256 c30 = _mm256_setzero_ps(), c31 = _mm256_setzero_ps();
  __m256 c40 = _mm256_setzero_ps(), c41 = _mm256_setzero_ps();
  __m256 c50 = _mm256_setzero_ps(), c51 = _mm256_setzero_ps();

  for (int p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(bp);
    const __m256 b1 = _mm256_loadu_ps(bp + 8);
    __m256 av = _mm256_broadcast_ss(ap + 0);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(ap + 1);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(ap + 2);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(ap + 3);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(ap + 4);
    c40 = _mm256_fmadd_ps(av, b0, c40);
    c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(ap + 5);
    c50 = _mm256_fmadd_ps(av, b0, c50);
    c51 = _mm256_fmadd_ps(av, b1, c51);
    ap += kMr;
    bp += kNr;
  }

  alignas(32) float tile[kMr * kNr];
  _mm256_store_ps(tile + 0 * kNr, c00);
  _mm256_store_ps(tile + 0 * kNr + 8, c01);
  _mm256_store_ps(tile + 1 * kNr, c10);
  _mm256_store_ps(tile + 1 * kNr + 8, c11);
  _mm256_store_ps(tile + 2 * kNr, c20);
  _mm256_store_ps(tile + 2 * kNr + 8, c21);
  _mm256_store_ps(tile + 3 * kNr, c30);
  _mm256_store_ps(tile + 3 * kNr + 8, c31);
  _mm256_store_ps(tile + 4 * kNr, c40);
  _mm256_store_ps(tile + 4 * kNr + 8, c41);
  _mm256_store_ps(tile + 5 * kNr, c50);
  _mm256_store_ps(tile + 5 * kNr + 8, c51);

  if (cols == kNr) {
    for (int r = 0; r < rows; ++r) {
      float* crow = c + static_cast<long>(r) * ldc;
      _mm256_storeu_ps(crow, _mm256_add_ps(_mm256_loadu_ps(crow), _mm256_load_ps(tile + r * kNr)));
      _mm256_storeu_ps(crow + 8, _mm256_add_ps(_mm256_loadu_ps(crow + 8), _mm256_load_ps(tile + r * kNr + 8)));
    }
  } else {
    for (int r = 0; r < rows; ++r) {
      float* crow = c + static_cast<long>(r) * ldc;
      for (int j = 0; j < cols; ++j) crow[j] += tile[r * kNr + j];
    }
  }
}

}  // namespace

void sgemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
           float* c, int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i) std::memset(c + static_cast<long>(i) * ldc, 0, sizeof(float) * n);
  }
  if (m == 0 || n == 0 || k == 0) return;

  // thread_local scratch: the kernel is re-entrant across threads
  thread_local std::vector<float> apack;
  thread_local std::vector<float> bpack;
  apack.resize(static_cast<size_t>(kMc + kMr) * kKc);
  bpack.resize(static_cast<size_t>(kNc + kNr) * kKc);

  for (int j0 = 0; j0 < n; j0 += kNc) {
    const int nc = std::min(kNc, n - j0);
    for (int p0 = 0; p0 < k; p0 += kKc) {
      const int kc = std::min(kKc, k - p0);
      pack_b(tb, b, ldb, p0, kc, j0, nc, bpack.data());
      for (int i0 = 0; i0 < m; i0 += kMc) {
        const int mc = std::min(kMc, m - i0);
        pack_a(ta, a, lda, i0, mc, p0, kc, apack.data());
        for (int jr = 0; jr < nc; jr += kNr) {
          const int cols = std::min(kNr, nc - jr);
          const float* bp = bpack.data() + static_cast<long>(jr / kNr) * kc * kNr;
          for (int ir = 0; ir < mc; ir += kMr) {
            const int rows = std::min(kMr, mc - ir);
            const float* ap = apack.data() + static_cast<long>(ir / kMr) * kc * kMr;
            micro_kernel(kc, ap, bp, c + static_cast<long>(i0 + ir) * ldc + j0 + jr, ldc, rows, cols);
          }
        }
      }
    }
  }
}

}  // namespace pcle::simd::avx2
