#include "gdl/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gdl/autodiff/tape.hpp"
#include "gdl/core/error.hpp"
#include "kernels.hpp"

namespace gdl::ad {

using detail::accumulate_grad;
using detail::grad_buffer;
using detail::make_result;

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_rank(const Tensor& x, std::size_t rank, const char* op) {
  if (x.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_string(x.shape()));
  }
}

template <typename Fn>
Tensor unary(const Tensor& x, Fn value_and_slope) {
  const auto src = x.data();
  std::vector<double> out(src.size());
  std::vector<double> slope(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto [v, d] = value_and_slope(src[i]);
    out[i] = v;
    slope[i] = d;
  }
  auto xi = x.impl();
  return make_result(x.shape(), std::move(out), {x},
                     [xi, slope = std::move(slope)](std::span<const double> g) {
                       if (!xi->requires_grad) return;
                       auto& gx = grad_buffer(*xi);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * slope[i];
                     });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](std::span<const double> g) {
    accumulate_grad(*ai, g);
    accumulate_grad(*bi, g);
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](std::span<const double> g) {
    accumulate_grad(*ai, g);
    if (bi->requires_grad) {
      auto& gb = grad_buffer(*bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result(a.shape(), std::move(out), {a, b}, [ai, bi](std::span<const double> g) {
    if (ai->requires_grad) {
      auto& ga = grad_buffer(*ai);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bi->data[i];
    }
    if (bi->requires_grad) {
      auto& gb = grad_buffer(*bi);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ai->data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  auto xi = x.impl();
  return make_result(x.shape(), std::move(out), {x}, [xi, factor](std::span<const double> g) {
    if (!xi->requires_grad) return;
    auto& gx = grad_buffer(*xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * factor;
  });
}

Tensor add_scalar(const Tensor& x, double value) {
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + value;
  auto xi = x.impl();
  return make_result(x.shape(), std::move(out), {x},
                     [xi](std::span<const double> g) { accumulate_grad(*xi, g); });
}

Tensor abs(const Tensor& x) {
  return unary(x, [](double v) {
    return std::pair{std::abs(v), v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0)};
  });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? std::pair{v, 1.0} : std::pair{0.0, 0.0}; });
}

Tensor square(const Tensor& x) {
  return unary(x, [](double v) { return std::pair{v * v, 2.0 * v}; });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto xi = x.impl();
  return make_result({1}, {total}, {x}, [xi](std::span<const double> g) {
    if (!xi->requires_grad) return;
    auto& gx = grad_buffer(*xi);
    for (auto& v : gx) v += g[0];
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto xi = x.impl();
  return make_result({1}, {total / n}, {x}, [xi, n](std::span<const double> g) {
    if (!xi->requires_grad) return;
    auto& gx = grad_buffer(*xi);
    for (auto& v : gx) v += g[0] / n;
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  kernels::gemm_nn(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result({m, n}, std::move(out), {a, b}, [ai, bi, m, k, n](std::span<const double> g) {
    if (ai->requires_grad) {
      kernels::gemm_nt(g.data(), bi->data.data(), grad_buffer(*ai).data(), m, n, k);
    }
    if (bi->requires_grad) {
      kernels::gemm_tn(ai->data.data(), g.data(), grad_buffer(*bi).data(), m, k, n);
    }
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_rank(x, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t batch = x.dim(0), in = x.dim(1), out_w = weight.dim(1);
  if (weight.dim(0) != in) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != out_w) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  std::vector<double> out(batch * out_w);
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy(bias.data().begin(), bias.data().end(), out.begin() + i * out_w);
  }
  kernels::gemm_nn(x.data().data(), weight.data().data(), out.data(), batch, in, out_w);
  auto xi = x.impl();
  auto wi = weight.impl();
  auto bi = bias.impl();
  return make_result(
      {batch, out_w}, std::move(out), {x, weight, bias},
      [xi, wi, bi, batch, in, out_w](std::span<const double> g) {
        if (xi->requires_grad) {
          kernels::gemm_nt(g.data(), wi->data.data(), grad_buffer(*xi).data(), batch, out_w, in);
        }
        if (wi->requires_grad) {
          kernels::gemm_tn(xi->data.data(), g.data(), grad_buffer(*wi).data(), batch, in, out_w);
        }
        if (bi->requires_grad) {
          auto& gb = grad_buffer(*bi);
          for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t j = 0; j < out_w; ++j) gb[j] += g[i * out_w + j];
          }
        }
      });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " +
                         shape_string(shape));
  }
  auto xi = x.impl();
  return make_result(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()), {x},
                     [xi](std::span<const double> g) { accumulate_grad(*xi, g); });
}

Tensor transpose(const Tensor& x) {
  require_rank(x, 2, "transpose");
  const std::size_t r = x.dim(0), c = x.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x[i * c + j];
  }
  auto xi = x.impl();
  return make_result({c, r}, std::move(out), {x}, [xi, r, c](std::span<const double> g) {
    if (!xi->requires_grad) return;
    auto& gx = grad_buffer(*xi);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += g[j * r + i];
    }
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  const std::size_t rows = parts.front().dim(0);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_cols");
    if (p.dim(0) != rows) {
      throw DimensionError("concat_cols: row counts differ (" + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()) + ")");
    }
    widths.push_back(p.dim(1));
    total += p.dim(1);
  }
  std::vector<double> out(rows * total);
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto src = parts[k].data();
    for (std::size_t i = 0; i < rows; ++i) {
      std::copy_n(src.begin() + i * widths[k], widths[k], out.begin() + i * total + offset);
    }
    offset += widths[k];
  }
  std::vector<std::shared_ptr<TensorImpl>> handles;
  for (const auto& p : parts) handles.push_back(p.impl());
  return make_result({rows, total}, std::move(out), {parts.begin(), parts.end()},
                     [handles, widths, rows, total](std::span<const double> g) {
                       std::size_t off = 0;
                       for (std::size_t k = 0; k < handles.size(); ++k) {
                         if (handles[k]->requires_grad) {
                           auto& gp = grad_buffer(*handles[k]);
                           for (std::size_t i = 0; i < rows; ++i) {
                             for (std::size_t j = 0; j < widths[k]; ++j) {
                               gp[i * widths[k] + j] += g[i * total + off + j];
                             }
                           }
                         }
                         off += widths[k];
                       }
                     });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no inputs");
  const std::size_t cols = parts.front().dim(1);
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_rank(p, 2, "concat_rows");
    if (p.dim(1) != cols) {
      throw DimensionError("concat_rows: widths differ (" + shape_string(parts.front().shape()) +
                           " vs " + shape_string(p.shape()) + ")");
    }
    rows += p.dim(0);
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  std::vector<std::shared_ptr<TensorImpl>> handles;
  for (const auto& p : parts) {
    out.insert(out.end(), p.data().begin(), p.data().end());
    handles.push_back(p.impl());
  }
  return make_result({rows, cols}, std::move(out), {parts.begin(), parts.end()},
                     [handles](std::span<const double> g) {
                       std::size_t off = 0;
                       for (const auto& h : handles) {
                         const std::size_t n = h->data.size();
                         accumulate_grad(*h, g.subspan(off, n));
                         off += n;
                       }
                     });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows: bad range [" + std::to_string(begin) + ", " +
                         std::to_string(end) + ") for shape " + shape_string(x.shape()));
  }
  const std::size_t cols = x.dim(1);
  std::vector<double> out(x.data().begin() + begin * cols, x.data().begin() + end * cols);
  auto xi = x.impl();
  return make_result({end - begin, cols}, std::move(out), {x},
                     [xi, begin, cols](std::span<const double> g) {
                       if (!xi->requires_grad) return;
                       auto& gx = grad_buffer(*xi);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[begin * cols + i] += g[i];
                     });
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index) {
  require_rank(x, 2, "gather_rows");
  const std::size_t n = x.dim(0), cols = x.dim(1);
  std::vector<double> out(index.size() * cols, 0.0);
  for (std::size_t r = 0; r < index.size(); ++r) {
    const auto src = index[r];
    if (src < 0) continue;
    if (static_cast<std::size_t>(src) >= n) {
      throw DimensionError("gather_rows: index " + std::to_string(src) + " out of range for " +
                           shape_string(x.shape()));
    }
    std::copy_n(x.data().begin() + src * cols, cols, out.begin() + r * cols);
  }
  auto xi = x.impl();
  std::vector<std::int64_t> idx(index.begin(), index.end());
  return make_result({index.size(), cols}, std::move(out), {x},
                     [xi, idx = std::move(idx), cols](std::span<const double> g) {
                       if (!xi->requires_grad) return;
                       auto& gx = grad_buffer(*xi);
                       for (std::size_t r = 0; r < idx.size(); ++r) {
                         if (idx[r] < 0) continue;
                         double* dst = gx.data() + idx[r] * cols;
                         const double* src = g.data() + r * cols;
                         for (std::size_t j = 0; j < cols; ++j) dst[j] += src[j];
                       }
                     });
}

Tensor segment_pool(const Tensor& x, std::size_t group_size, PoolMode mode) {
  require_rank(x, 2, "segment_pool");
  if (group_size == 0) throw EmptySetError("segment_pool: empty groups");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (rows % group_size != 0) {
    throw DimensionError("segment_pool: " + std::to_string(rows) + " rows not divisible into groups of " +
                         std::to_string(group_size));
  }
  const std::size_t groups = rows / group_size;
  const auto src = x.data();
  std::vector<double> out(groups * cols);
  auto xi = x.impl();
  if (mode == PoolMode::Mean) {
    const double inv = 1.0 / static_cast<double>(group_size);
    for (std::size_t s = 0; s < groups; ++s) {
      for (std::size_t j = 0; j < cols; ++j) {
        double acc = 0.0;
        for (std::size_t r = 0; r < group_size; ++r) acc += src[(s * group_size + r) * cols + j];
        out[s * cols + j] = acc * inv;
      }
    }
    return make_result({groups, cols}, std::move(out), {x},
                       [xi, group_size, groups, cols, inv](std::span<const double> g) {
                         if (!xi->requires_grad) return;
                         auto& gx = grad_buffer(*xi);
                         for (std::size_t s = 0; s < groups; ++s) {
                           for (std::size_t r = 0; r < group_size; ++r) {
                             for (std::size_t j = 0; j < cols; ++j) {
                               gx[(s * group_size + r) * cols + j] += g[s * cols + j] * inv;
                             }
                           }
                         }
                       });
  }
  std::vector<std::size_t> argmax(groups * cols);
  for (std::size_t s = 0; s < groups; ++s) {
    for (std::size_t j = 0; j < cols; ++j) {
      std::size_t best = s * group_size;
      for (std::size_t r = 1; r < group_size; ++r) {
        const std::size_t row = s * group_size + r;
        if (src[row * cols + j] > src[best * cols + j]) best = row;  // strict: first wins ties
      }
      argmax[s * cols + j] = best;
      out[s * cols + j] = src[best * cols + j];
    }
  }
  return make_result({groups, cols}, std::move(out), {x},
                     [xi, argmax = std::move(argmax), cols](std::span<const double> g) {
                       if (!xi->requires_grad) return;
                       auto& gx = grad_buffer(*xi);
                       for (std::size_t k = 0; k < argmax.size(); ++k) {
                         gx[argmax[k] * cols + k % cols] += g[k];
                       }
                     });
}

Tensor set_pool(const Tensor& x, PoolMode mode) {
  require_rank(x, 2, "set_pool");
  if (x.dim(0) == 0) throw EmptySetError("set_pool: empty set");
  const std::size_t cols = x.dim(1);
  return reshape(segment_pool(x, x.dim(0), mode), {cols});
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> entries) {
  std::sort(entries.begin(), entries.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  SparseMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.row_ptr.assign(rows + 1, 0);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = entries[i];
    if (t.row >= rows || t.col >= cols) throw DimensionError("sparse entry out of range");
    if (!m.values.empty() && i > 0 && entries[i - 1].row == t.row && entries[i - 1].col == t.col) {
      m.values.back() += t.value;
      continue;
    }
    m.col_index.push_back(t.col);
    m.values.push_back(t.value);
    m.row_ptr[t.row + 1] = m.values.size();
  }
  for (std::size_t r = 1; r <= rows; ++r) m.row_ptr[r] = std::max(m.row_ptr[r], m.row_ptr[r - 1]);
  return m;
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<Triplet> entries;
  entries.reserve(nnz());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
      entries.push_back({col_index[k], r, values[k]});
    }
  }
  auto t = from_triplets(cols, rows, std::move(entries));
  t.symmetric = symmetric;
  return t;
}

std::vector<double> SparseMatrix::to_dense() const {
  std::vector<double> dense(rows * cols, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k) dense[r * cols + col_index[k]] += values[k];
  }
  return dense;
}

namespace {

void spmm_accumulate(const SparseMatrix& m, const double* x, double* out, std::size_t d) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    double* dst = out + r * d;
    for (std::size_t k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
      const double v = m.values[k];
      const double* src = x + m.col_index[k] * d;
      for (std::size_t j = 0; j < d; ++j) dst[j] += v * src[j];
    }
  }
}

}  // namespace

Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> matrix, const Tensor& x) {
  require_rank(x, 2, "sparse_matmul");
  if (x.dim(0) != matrix->cols) {
    throw DimensionError("sparse_matmul: operator has " + std::to_string(matrix->cols) +
                         " columns but input is " + shape_string(x.shape()));
  }
  const std::size_t d = x.dim(1);
  std::vector<double> out(matrix->rows * d, 0.0);
  spmm_accumulate(*matrix, x.data().data(), out.data(), d);
  auto xi = x.impl();
  return make_result({matrix->rows, d}, std::move(out), {x},
                     [xi, matrix, d](std::span<const double> g) {
                       if (!xi->requires_grad) return;
                       auto& gx = grad_buffer(*xi);
                       if (matrix->symmetric) {
                         spmm_accumulate(*matrix, g.data(), gx.data(), d);
                       } else {
                         spmm_accumulate(matrix->transposed(), g.data(), gx.data(), d);
                       }
                     });
}

}  // namespace gdl::ad
