#include "geomdn/kernels.hpp"

#include <cstring>
#include <immintrin.h>

namespace geomdn::kern::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

// crow[j] += av * brow[j] over n entries
inline void fma_row(std::size_t n, double av, const double* brow, double* crow) {
  const __m256d a = _mm256_set1_pd(av);
  std::size_t j = 0;
  for (; j + 16 <= n; j += 16) {
    __m256d c0 = _mm256_loadu_pd(crow + j);
    __m256d c1 = _mm256_loadu_pd(crow + j + 4);
    __m256d c2 = _mm256_loadu_pd(crow + j + 8);
    __m256d c3 = _mm256_loadu_pd(crow + j + 12);
    c0 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j), c0);
    c1 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j + 4), c1);
    c2 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j + 8), c2);
    c3 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j + 12), c3);
    _mm256_storeu_pd(crow + j, c0);
    _mm256_storeu_pd(crow + j + 4, c1);
    _mm256_storeu_pd(crow + j + 8, c2);
    _mm256_storeu_pd(crow + j + 12, c3);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_loadu_pd(crow + j);
    c0 = _mm256_fmadd_pd(a, _mm256_loadu_pd(brow + j), c0);
    _mm256_storeu_pd(crow + j, c0);
  }
  for (; j < n; ++j) crow[j] += av * brow[j];
}

}  // namespace

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) fma_row(n, arow[p], b + p * n, crow);
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      std::size_t p = 0;
      for (; p + 8 <= k; p += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p), _mm256_loadu_pd(brow + p), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(arow + p + 4), _mm256_loadu_pd(brow + p + 4), acc1);
      }
      double s = hsum(_mm256_add_pd(acc0, acc1));
      for (; p < k; ++p) s += arow[p] * brow[p];
      crow[j] = s;
    }
  }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c) {
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = a + p * m;
    const double* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      if (arow[i] == 0.0) continue;
      fma_row(n, arow[i], brow, c + i * n);
    }
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  fma_row(n, a, x, y);
}

double dot(std::size_t n, const double* x, const double* y) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc);
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i] * y[i];
  return s;
}

void add_bias_rows(std::size_t rows, std::size_t n, const double* bias, double* m) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = m + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4)
      _mm256_storeu_pd(row + j,
                       _mm256_add_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(bias + j)));
    for (; j < n; ++j) row[j] += bias[j];
  }
}

void col_sum_acc(std::size_t rows, std::size_t n, const double* m, double* out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = m + i * n;
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4)
      _mm256_storeu_pd(out + j,
                       _mm256_add_pd(_mm256_loadu_pd(out + j), _mm256_loadu_pd(row + j)));
    for (; j < n; ++j) out[j] += row[j];
  }
}

void relu(std::size_t n, double* x) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(x + i, _mm256_max_pd(_mm256_loadu_pd(x + i), zero));
  for (; i < n; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
}

void relu_backward(std::size_t n, const double* act, double* grad) {
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(act + i), zero, _CMP_GT_OQ);
    _mm256_storeu_pd(grad + i, _mm256_and_pd(_mm256_loadu_pd(grad + i), mask));
  }
  for (; i < n; ++i)
    if (act[i] <= 0.0) grad[i] = 0.0;
}

}  // namespace geomdn::kern::avx2
