#pragma once
// Data-parallel inner loops used by the network forward/backward passes.
// Scalar reference implementations plus AVX2 variants selected at runtime.
// All matrices are dense row-major double precision.

#include <cstddef>

namespace geomdn::kern {

enum class Isa { scalar, avx2 };

// ISA actually in use (picked at startup from CPUID).
Isa active_isa();

// Override the dispatch, e.g. to force the scalar path in equivalence
// tests. Forcing avx2 on a machine without it is rejected.
void force_isa(Isa isa);

// C[m x n] = A[m x k] * B[k x n]            (beta = 0)
// C[m x n] += A[m x k] * B[k x n]           (beta = 1)
void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool accumulate);

// C[m x n] = A[m x k] * B^T, with B stored as [n x k]
void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c);

// C[m x n] += A^T * B, with A stored as [k x m], B as [k x n]
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c);

// y[i] += a * x[i]
void axpy(std::size_t n, double a, const double* x, double* y);

double dot(std::size_t n, const double* x, const double* y);

// Adds the bias row to every row of the [rows x n] matrix.
void add_bias_rows(std::size_t rows, std::size_t n, const double* bias, double* m);

// Sums the rows of the [rows x n] matrix into out[n] (accumulating).
void col_sum_acc(std::size_t rows, std::size_t n, const double* m, double* out);

void relu(std::size_t n, double* x);

// grad[i] = act[i] > 0 ? grad[i] : 0
void relu_backward(std::size_t n, const double* act, double* grad);

}  // namespace geomdn::kern
