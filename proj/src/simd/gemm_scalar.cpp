#include "pcle/simd/gemm.hpp"

#include <algorithm>
#include <vector>

namespace pcle::simd::scalar {

template <class T>
void gemm(Trans ta, Trans tb, int m, int n, int k, const T* a, int lda, const T* b, int ldb, T* c,
          int ldc, bool accumulate) {
  if (!accumulate) {
    for (int i = 0; i < m; ++i) std::fill(c + static_cast<long>(i) * ldc, c + static_cast<long>(i) * ldc + n, T(0));
  }
  if (k == 0) return;

  if (tb == Trans::yes) {
    // B is stored N x K: every C entry is a dot product of two contiguous rows
    // once A is read row-wise.
    std::vector<T> arow(static_cast<size_t>(k));
    for (int i = 0; i < m; ++i) {
      for (int p = 0; p < k; ++p)
        arow[p] = ta == Trans::no ? a[static_cast<long>(i) * lda + p] : a[static_cast<long>(p) * lda + i];
      T* crow = c + static_cast<long>(i) * ldc;
      for (int j = 0; j < n; ++j) {
        const T* brow = b + static_cast<long>(j) * ldb;
        T acc = 0;
        for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
        crow[j] += acc;
      }
    }
    return;
  }

  for (int i = 0; i < m; ++i) {
    T* crow = c + static_cast<long>(i) * ldc;
    for (int p = 0; p < k; ++p) {
      const T aip = ta == Trans::no ? a[static_cast<long>(i) * lda + p] : a[static_cast<long>(p) * lda + i];
      const T* brow = b + static_cast<long>(p) * ldb;
      for (int j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template void gemm<float>(Trans, Trans, int, int, int, const float*, int, const float*, int, float*, int, bool);
template void gemm<double>(Trans, Trans, int, int, int, const double*, int, const double*, int, double*, int,
                           bool);

}  // namespace pcle::simd::scalar
