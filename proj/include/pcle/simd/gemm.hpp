#pragma once

// Dense row-major GEMM used by every convolution in the network and the
// perceptual feature extractor:
//
//   C[M x N] (+)= op(A)[M x K] * op(B)[K x N]
//
// Two implementations exist: a portable scalar reference with a fixed
// summation order, and an AVX2/FMA packed kernel for float. The float entry
// point picks one at runtime from the CPU features (or the PCLE_SIMD
// environment variable, or set_backend()). double always uses the scalar
// reference; it is the gradient-checking precision.

#include <string_view>

namespace pcle::simd {

enum class Trans { no, yes };

enum class Backend { scalar, avx2 };

bool avx2_supported();
Backend active_backend();
/// Throws ConfigError when the requested backend is not supported by this CPU/build.
void set_backend(Backend b);
std::string_view backend_name(Backend b);
/// Parses "scalar" / "avx2" / "auto".
Backend parse_backend(std::string_view name);

namespace scalar {
template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c,
          int ldc, bool accumulate);
}  // namespace scalar

namespace avx2 {
/// Only callable when avx2_supported().
void sgemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
           float* c, int ldc, bool accumulate);
}  // namespace avx2

void gemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
          float* c, int ldc, bool accumulate);
void gemm(Trans ta, Trans tb, int m, int n, int k, const double* a, int lda, const double* b,
          int ldb, double* c, int ldc, bool accumulate);

}  // namespace pcle::simd
