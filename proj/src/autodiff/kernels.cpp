#include "kernels.hpp"

#include <vector>

#include "gdl/core/parallel.hpp"

namespace gdl::ad::kernels {

namespace {
constexpr std::size_t kMinRowsPerWorker = 16;
}

void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  parallel_for(m, kMinRowsPerWorker, [=](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      double* ci = c + i * n;
      const double* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const double av = ai[p];
        if (av == 0.0) continue;
        const double* bp = b + p * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += av * bp[j];
      }
    }
  });
}

void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t n,
             std::size_t k) {
  // b is [k, n]; its transpose turns the row dot products into axpy updates.
  std::vector<double> bt(n * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < n; ++j) bt[j * k + p] = b[p * n + j];
  const double* btp = bt.data();
  parallel_for(m, kMinRowsPerWorker, [=](std::size_t r0, std::size_t r1) {
    for (std::size_t i = r0; i < r1; ++i) {
      const double* ai = a + i * n;
      double* ci = c + i * k;
      for (std::size_t j = 0; j < n; ++j) {
        const double av = ai[j];
        if (av == 0.0) continue;
        const double* bj = btp + j * k;
        for (std::size_t p = 0; p < k; ++p) ci[p] += av * bj[p];
      }
    }
  });
}

void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  parallel_for(k, kMinRowsPerWorker, [=](std::size_t p0, std::size_t p1) {
    for (std::size_t i = 0; i < m; ++i) {
      const double* ai = a + i * k;
      const double* bi = b + i * n;
      for (std::size_t p = p0; p < p1; ++p) {
        const double av = ai[p];
        if (av == 0.0) continue;
        double* cp = c + p * n;
        for (std::size_t j = 0; j < n; ++j) cp[j] += av * bi[j];
      }
    }
  });
}

}  // namespace gdl::ad::kernels
