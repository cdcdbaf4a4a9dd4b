#include "geomdn/kernels.hpp"

#include <cstring>

// Reference kernels. Plain loops, no intrinsics; the AVX2 variants are
// checked against these in the equivalence tests.

namespace geomdn::kern::scalar {

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  if (!accumulate) std::memset(c, 0, m * n * sizeof(double));
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = b + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
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
      const double av = arow[i];
      if (av == 0.0) continue;
      double* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double dot(std::size_t n, const double* x, const double* y) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

void add_bias_rows(std::size_t rows, std::size_t n, const double* bias, double* m) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* row = m + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += bias[j];
  }
}

void col_sum_acc(std::size_t rows, std::size_t n, const double* m, double* out) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double* row = m + i * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += row[j];
  }
}

void relu(std::size_t n, double* x) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] < 0.0) x[i] = 0.0;
}

void relu_backward(std::size_t n, const double* act, double* grad) {
  for (std::size_t i = 0; i < n; ++i)
    if (act[i] <= 0.0) grad[i] = 0.0;
}

}  // namespace geomdn::kern::scalar
