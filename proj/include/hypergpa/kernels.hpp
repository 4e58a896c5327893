#pragma once

// Dense f64 inner loops used by the autodiff ops. Every kernel has a scalar
// reference implementation; x86-64 builds also carry AVX2/FMA variants that
// are picked at runtime when the CPU supports them.
//
// All matrices are row-major and contiguous.

#include <cstddef>
#include <string_view>

namespace hypergpa::kernels {

struct KernelTable {
  std::string_view name;

  // C[m,n] (+)= A[m,k] * B[k,n]
  void (*matmul_nn)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                    const double* b, double* c, bool accumulate);
  // C[m,n] (+)= A[m,k] * B[n,k]^T
  void (*matmul_nt)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                    const double* b, double* c, bool accumulate);
  // C[m,n] (+)= A[k,m]^T * B[k,n]
  void (*matmul_tn)(std::size_t m, std::size_t k, std::size_t n, const double* a,
                    const double* b, double* c, bool accumulate);

  void (*add)(std::size_t n, const double* x, const double* y, double* out);
  void (*sub)(std::size_t n, const double* x, const double* y, double* out);
  void (*mul)(std::size_t n, const double* x, const double* y, double* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
  // y += x * z
  void (*mul_acc)(std::size_t n, const double* x, const double* z, double* y);
  void (*scale)(std::size_t n, double alpha, const double* x, double* out);
  double (*dot)(std::size_t n, const double* x, const double* y);
  double (*sum)(std::size_t n, const double* x);
};

const KernelTable& scalar_kernels();

// nullptr when the variant is not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();

// Active table. Chosen once: HYPERGPA_SIMD=scalar|avx2 forces a variant,
// otherwise the widest supported one wins.
const KernelTable& active();

// Test hook; the override applies to every later active() call.
void force(const KernelTable& table);

}  // namespace hypergpa::kernels
