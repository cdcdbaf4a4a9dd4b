#include "geomdn/kernels.hpp"

#include <stdexcept>

namespace geomdn::kern {

namespace scalar {
void gemm_nn(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
void gemm_nt(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
void gemm_tn_acc(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
void axpy(std::size_t, double, const double*, double*);
double dot(std::size_t, const double*, const double*);
void add_bias_rows(std::size_t, std::size_t, const double*, double*);
void col_sum_acc(std::size_t, std::size_t, const double*, double*);
void relu(std::size_t, double*);
void relu_backward(std::size_t, const double*, double*);
}  // namespace scalar

namespace avx2 {
void gemm_nn(std::size_t, std::size_t, std::size_t, const double*, const double*, double*, bool);
void gemm_nt(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
void gemm_tn_acc(std::size_t, std::size_t, std::size_t, const double*, const double*, double*);
void axpy(std::size_t, double, const double*, double*);
double dot(std::size_t, const double*, const double*);
void add_bias_rows(std::size_t, std::size_t, const double*, double*);
void col_sum_acc(std::size_t, std::size_t, const double*, double*);
void relu(std::size_t, double*);
void relu_backward(std::size_t, const double*, double*);
}  // namespace avx2

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa g_isa = cpu_has_avx2() ? Isa::avx2 : Isa::scalar;

}  // namespace

Isa active_isa() { return g_isa; }

void force_isa(Isa isa) {
  if (isa == Isa::avx2 && !cpu_has_avx2())
    throw std::runtime_error("AVX2 not available on this CPU");
  g_isa = isa;
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c, bool accumulate) {
  g_isa == Isa::avx2 ? avx2::gemm_nn(m, n, k, a, b, c, accumulate)
                     : scalar::gemm_nn(m, n, k, a, b, c, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k,
             const double* a, const double* b, double* c) {
  g_isa == Isa::avx2 ? avx2::gemm_nt(m, n, k, a, b, c)
                     : scalar::gemm_nt(m, n, k, a, b, c);
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t k,
                 const double* a, const double* b, double* c) {
  g_isa == Isa::avx2 ? avx2::gemm_tn_acc(m, n, k, a, b, c)
                     : scalar::gemm_tn_acc(m, n, k, a, b, c);
}

void axpy(std::size_t n, double a, const double* x, double* y) {
  g_isa == Isa::avx2 ? avx2::axpy(n, a, x, y) : scalar::axpy(n, a, x, y);
}

double dot(std::size_t n, const double* x, const double* y) {
  return g_isa == Isa::avx2 ? avx2::dot(n, x, y) : scalar::dot(n, x, y);
}

void add_bias_rows(std::size_t rows, std::size_t n, const double* bias, double* m) {
  g_isa == Isa::avx2 ? avx2::add_bias_rows(rows, n, bias, m)
                     : scalar::add_bias_rows(rows, n, bias, m);
}

void col_sum_acc(std::size_t rows, std::size_t n, const double* m, double* out) {
  g_isa == Isa::avx2 ? avx2::col_sum_acc(rows, n, m, out)
                     : scalar::col_sum_acc(rows, n, m, out);
}

void relu(std::size_t n, double* x) {
  g_isa == Isa::avx2 ? avx2::relu(n, x) : scalar::relu(n, x);
}

void relu_backward(std::size_t n, const double* act, double* grad) {
  g_isa == Isa::avx2 ? avx2::relu_backward(n, act, grad)
                     : scalar::relu_backward(n, act, grad);
}

}  // namespace geomdn::kern
