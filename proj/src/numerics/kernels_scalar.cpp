#include "kernels_impl.hpp"

namespace lunet::kernels::detail {

namespace {

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_rs,
          std::size_t a_cs, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * a_rs + p * a_cs];
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void gemm_abt(std::size_t m, std::size_t p, std::size_t n, const double* a, std::size_t lda,
              const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      const double* arow = a + i * lda;
      const double* brow = b + j * ldb;
      for (std::size_t q = 0; q < n; ++q) acc += arow[q] * brow[q];
      c[i * ldc + j] += acc;
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable kScalarTable{"scalar", gemm, gemm_abt, dot, axpy};

}  // namespace lunet::kernels::detail
