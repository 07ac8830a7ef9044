#pragma once

#include <cstddef>

// Dense inner-loop kernels. Every routine has a scalar reference and, where the
// build and the CPU allow it, an AVX2/FMA variant. The active table is chosen
// once at first use; LUNET_SIMD=scalar|avx2 overrides the choice.
namespace lunet::kernels {

// C[m x n] += A * B. Element (i, p) of A lives at a[i * a_rs + p * a_cs], so a
// transposed operand is passed by swapping the strides. B is row-major k x n.
using GemmFn = void (*)(std::size_t m, std::size_t n, std::size_t k, const double* a,
                        std::size_t a_rs, std::size_t a_cs, const double* b, std::size_t ldb,
                        double* c, std::size_t ldc);

// C[m x p] += A[m x n] * B[p x n]^T, both operands row-major.
using GemmAbtFn = void (*)(std::size_t m, std::size_t p, std::size_t n, const double* a,
                           std::size_t lda, const double* b, std::size_t ldb, double* c,
                           std::size_t ldc);

using DotFn = double (*)(const double* x, const double* y, std::size_t n);

// y += alpha * x
using AxpyFn = void (*)(std::size_t n, double alpha, const double* x, double* y);

struct KernelTable {
  const char* name;
  GemmFn gemm;
  GemmAbtFn gemm_abt;
  DotFn dot;
  AxpyFn axpy;
};

enum class Isa { scalar, avx2 };

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

const KernelTable& active();

// Throws lunet::Error when the requested variant is unavailable.
void select(Isa isa);

Isa active_isa();

}  // namespace lunet::kernels
