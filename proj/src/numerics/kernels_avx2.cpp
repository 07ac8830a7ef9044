#include <immintrin.h>

#include "kernels_impl.hpp"

namespace lunet::kernels::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 4 rows x 8 columns of C.
inline void block_4x8(std::size_t k, const double* a, std::size_t a_rs, std::size_t a_cs,
                      const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
  __m256d c10 = _mm256_loadu_pd(c + ldc), c11 = _mm256_loadu_pd(c + ldc + 4);
  __m256d c20 = _mm256_loadu_pd(c + 2 * ldc), c21 = _mm256_loadu_pd(c + 2 * ldc + 4);
  __m256d c30 = _mm256_loadu_pd(c + 3 * ldc), c31 = _mm256_loadu_pd(c + 3 * ldc + 4);
  for (std::size_t p = 0; p < k; ++p) {
    const double* brow = b + p * ldb;
    const __m256d b0 = _mm256_loadu_pd(brow);
    const __m256d b1 = _mm256_loadu_pd(brow + 4);
    const double* acol = a + p * a_cs;
    __m256d av = _mm256_broadcast_sd(acol);
    c00 = _mm256_fmadd_pd(av, b0, c00);
    c01 = _mm256_fmadd_pd(av, b1, c01);
    av = _mm256_broadcast_sd(acol + a_rs);
    c10 = _mm256_fmadd_pd(av, b0, c10);
    c11 = _mm256_fmadd_pd(av, b1, c11);
    av = _mm256_broadcast_sd(acol + 2 * a_rs);
    c20 = _mm256_fmadd_pd(av, b0, c20);
    c21 = _mm256_fmadd_pd(av, b1, c21);
    av = _mm256_broadcast_sd(acol + 3 * a_rs);
    c30 = _mm256_fmadd_pd(av, b0, c30);
    c31 = _mm256_fmadd_pd(av, b1, c31);
  }
  _mm256_storeu_pd(c, c00);
  _mm256_storeu_pd(c + 4, c01);
  _mm256_storeu_pd(c + ldc, c10);
  _mm256_storeu_pd(c + ldc + 4, c11);
  _mm256_storeu_pd(c + 2 * ldc, c20);
  _mm256_storeu_pd(c + 2 * ldc + 4, c21);
  _mm256_storeu_pd(c + 3 * ldc, c30);
  _mm256_storeu_pd(c + 3 * ldc + 4, c31);
}

// One row of C, columns [0, n).
inline void row_block(std::size_t n, std::size_t k, const double* a, std::size_t a_cs,
                      const double* b, std::size_t ldb, double* c) {
  std::size_t j = 0;
  for (; j + 8 <= n; j += 8) {
    __m256d c0 = _mm256_loadu_pd(c + j), c1 = _mm256_loadu_pd(c + j + 4);
    for (std::size_t p = 0; p < k; ++p) {
      const __m256d av = _mm256_broadcast_sd(a + p * a_cs);
      c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j), c0);
      c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b + p * ldb + j + 4), c1);
    }
    _mm256_storeu_pd(c + j, c0);
    _mm256_storeu_pd(c + j + 4, c1);
  }
  for (; j + 4 <= n; j += 4) {
    __m256d c0 = _mm256_loadu_pd(c + j);
    for (std::size_t p = 0; p < k; ++p)
      c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a + p * a_cs), _mm256_loadu_pd(b + p * ldb + j), c0);
    _mm256_storeu_pd(c + j, c0);
  }
  for (; j < n; ++j) {
    double acc = c[j];
    for (std::size_t p = 0; p < k; ++p) acc = __builtin_fma(a[p * a_cs], b[p * ldb + j], acc);
    c[j] = acc;
  }
}

void gemm(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t a_rs,
          std::size_t a_cs, const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t n8 = n - n % 8;
  const std::size_t m4 = m - m % 4;
  for (std::size_t j = 0; j < n8; j += 8)
    for (std::size_t i = 0; i < m4; i += 4)
      block_4x8(k, a + i * a_rs, a_rs, a_cs, b + j, ldb, c + i * ldc + j, ldc);
  if (n8 < n)
    for (std::size_t i = 0; i < m4; ++i)
      row_block(n - n8, k, a + i * a_rs, a_cs, b + n8, ldb, c + i * ldc + n8);
  for (std::size_t i = m4; i < m; ++i) row_block(n, k, a + i * a_rs, a_cs, b, ldb, c + i * ldc);
}

void gemm_abt(std::size_t m, std::size_t p, std::size_t n, const double* a, std::size_t lda,
              const double* b, std::size_t ldb, double* c, std::size_t ldc) {
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * lda;
    std::size_t j = 0;
    for (; j + 4 <= p; j += 4) {
      const double* b0 = b + j * ldb;
      const double* b1 = b0 + ldb;
      const double* b2 = b1 + ldb;
      const double* b3 = b2 + ldb;
      __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd(), s3 = _mm256_setzero_pd();
      for (std::size_t q = 0; q < n4; q += 4) {
        const __m256d av = _mm256_loadu_pd(arow + q);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + q), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + q), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + q), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + q), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (std::size_t q = n4; q < n; ++q) {
        r0 += arow[q] * b0[q];
        r1 += arow[q] * b1[q];
        r2 += arow[q] * b2[q];
        r3 += arow[q] * b3[q];
      }
      double* crow = c + i * ldc + j;
      crow[0] += r0;
      crow[1] += r1;
      crow[2] += r2;
      crow[3] += r3;
    }
    for (; j < p; ++j) {
      const double* brow = b + j * ldb;
      __m256d s = _mm256_setzero_pd();
      for (std::size_t q = 0; q < n4; q += 4)
        s = _mm256_fmadd_pd(_mm256_loadu_pd(arow + q), _mm256_loadu_pd(brow + q), s);
      double r = hsum(s);
      for (std::size_t q = n4; q < n; ++q) r += arow[q] * brow[q];
      c[i * ldc + j] += r;
    }
  }
}

double dot(const double* x, const double* y, std::size_t n) {
  __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    s0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), s0);
    s1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), s1);
  }
  double r = hsum(_mm256_add_pd(s0, s1));
  for (; i < n; ++i) r += x[i] * y[i];
  return r;
}

void axpy(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace

const KernelTable kAvx2Table{"avx2", gemm, gemm_abt, dot, axpy};

}  // namespace lunet::kernels::detail
