#include <atomic>
#include <cstdlib>
#include <string>

#include "pcle/error.hpp"
#include "pcle/simd/gemm.hpp"

namespace pcle::simd {
namespace {

Backend detect_default() {
  if (const char* env = std::getenv("PCLE_SIMD")) {
    const Backend wanted = parse_backend(env);
    if (wanted == Backend::avx2 && !avx2_supported()) return Backend::scalar;
    return wanted;
  }
  return avx2_supported() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& current() {
  static std::atomic<Backend> b{detect_default()};
  return b;
}

}  // namespace

bool avx2_supported() {
#if defined(PCLE_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok;
#else
  return false;
#endif
}

Backend active_backend() { return current().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
  if (b == Backend::avx2 && !avx2_supported()) throw ConfigError("AVX2/FMA kernels are not available on this machine");
  current().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::scalar;
  if (name == "avx2") return Backend::avx2;
  if (name == "auto" || name.empty()) return avx2_supported() ? Backend::avx2 : Backend::scalar;
  throw ConfigError("unknown SIMD backend '" + std::string(name) + "' (expected scalar, avx2 or auto)");
}

void gemm(Trans ta, Trans tb, int m, int n, int k, const float* a, int lda, const float* b, int ldb,
          float* c, int ldc, bool accumulate) {
#if defined(PCLE_HAVE_AVX2)
  if (active_backend() == Backend::avx2) {
    avx2::sgemm(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
    return;
  }
#endif
  scalar::gemm<float>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

void gemm(Trans ta, Trans tb, int m, int n, int k, const double* a, int lda, const double* b,
          int ldb, double* c, int ldc, bool accumulate) {
  scalar::gemm<double>(ta, tb, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

#if !defined(PCLE_HAVE_AVX2)
namespace avx2 {
void sgemm(Trans, Trans, int, int, int, const float*, int, const float*, int, float*, int, bool) {
  throw ConfigError("built without AVX2 kernels");
}
}  // namespace avx2
#endif

}  // namespace pcle::simd
