#pragma once

#include <cstddef>

namespace gdl::ad::kernels {

// Row-major dense products accumulating into C. Work is split by rows of C
// so results do not depend on the worker count.

/// C[m,n] += A[m,k] B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);
/// C[m,k] += A[m,n] B[k,n]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k);
/// C[k,n] += A[m,k]^T B[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n);

}  // namespace gdl::ad::kernels
