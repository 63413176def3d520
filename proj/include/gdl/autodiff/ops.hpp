#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "gdl/autodiff/tensor.hpp"

namespace gdl::ad {

// Elementwise. Operands must share a shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor add_scalar(const Tensor& x, double value);
/// |x|; the subgradient at 0 is 0.
Tensor abs(const Tensor& x);
/// max(0, x); the subgradient at 0 is 0.
Tensor relu(const Tensor& x);
Tensor square(const Tensor& x);

// Reductions to a single-element tensor.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// [m, k] x [k, n] -> [m, n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// y = x W + b for x [batch, in], W [in, out], b [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor reshape(const Tensor& x, Shape shape);
Tensor transpose(const Tensor& x);

/// Horizontal concatenation of row-aligned rank-2 tensors.
Tensor concat_cols(std::span<const Tensor> parts);
/// Vertical concatenation of column-aligned rank-2 tensors.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

/// Row gather from [n, d]; an index of -1 yields a zero row.
Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index);

enum class PoolMode { Max, Mean };

/// Columnwise max or mean of [n, d] -> [d]. Max routes gradient to the first
/// row attaining the maximum.
Tensor set_pool(const Tensor& x, PoolMode mode);

/// Pools consecutive blocks of `group_size` rows: [n * g, d] -> [n, d].
Tensor segment_pool(const Tensor& x, std::size_t group_size, PoolMode mode);

/// Compressed sparse row matrix used as a constant operator.
struct SparseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col_index;
  std::vector<double> values;
  bool symmetric = false;

  struct Triplet {
    std::size_t row;
    std::size_t col;
    double value;
  };
  /// Duplicate entries are summed; columns within a row end up sorted.
  static SparseMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> entries);
  SparseMatrix transposed() const;
  std::size_t nnz() const { return values.size(); }
  /// Dense row-major copy.
  std::vector<double> to_dense() const;
};

/// S X for a constant sparse S [r, c] and X [c, d].
Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> matrix, const Tensor& x);

}  // namespace gdl::ad
