#include "gdl/autodiff/layers.hpp"

#include <algorithm>
#include <cmath>

#include "gdl/autodiff/ops.hpp"
#include "gdl/autodiff/tape.hpp"
#include "gdl/core/error.hpp"
#include "gdl/core/parallel.hpp"

namespace gdl::ad {

using detail::grad_buffer;
using detail::make_result;

LinearLayer::LinearLayer(std::size_t in, std::size_t out)
    : weight(Tensor::zeros({in, out}, true)), bias(Tensor::zeros({out}, true)) {}

Tensor LinearLayer::forward(const Tensor& x) const { return linear(x, weight, bias); }

void LinearLayer::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

NormState::NormState(std::size_t channels)
    : running_mean(channels, 0.0),
      running_var(channels, 1.0),
      gamma(Tensor::full({channels}, 1.0, true)),
      beta(Tensor::zeros({channels}, true)) {}

void NormState::collect(const std::string& prefix, std::vector<NamedTensor>& params) const {
  params.push_back({prefix + ".gamma", gamma});
  params.push_back({prefix + ".beta", beta});
}

void NormState::collect_buffers(const std::string& prefix, std::vector<NamedTensor>& buffers) const {
  buffers.push_back({prefix + ".running_mean", Tensor::vector(running_mean)});
  buffers.push_back({prefix + ".running_var", Tensor::vector(running_var)});
}

void NormState::load_buffers(std::span<const double> mean, std::span<const double> var) {
  if (mean.size() != channels() || var.size() != channels()) {
    throw DimensionError("normalization buffers do not match channel count");
  }
  running_mean.assign(mean.begin(), mean.end());
  running_var.assign(var.begin(), var.end());
}

namespace {

// Visits [B, C, S] in memory order as fn(flat offset, channel). Each
// channel still sees its offsets in ascending order.
template <typename Fn>
void for_each_channel_entry(std::size_t batch, std::size_t channels, std::size_t spatial, Fn fn) {
  std::size_t i = 0;
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t s = 0; s < spatial; ++s, ++i) fn(i, c);
}

}  // namespace

Tensor normalize_features(const Tensor& x, NormMode mode, std::size_t groups, NormState& state,
                          bool training) {
  if (x.rank() < 2) {
    throw DimensionError("normalize_features: expected [B, C, ...], got " + shape_string(x.shape()));
  }
  if (!(state.epsilon > 0.0)) throw ConfigError("normalize_features: epsilon must be positive");
  const std::size_t batch = x.dim(0);
  const std::size_t channels = x.dim(1);
  const std::size_t spatial = x.numel() / (batch * channels);
  if (state.channels() != channels) {
    throw DimensionError("normalize_features: state has " + std::to_string(state.channels()) +
                         " channels but input is " + shape_string(x.shape()));
  }
  const auto src = x.data();
  const auto gamma = state.gamma.data();
  const auto beta = state.beta.data();
  std::vector<double> xhat(x.numel());
  std::vector<double> out(x.numel());

  if (mode == NormMode::Batch) {
    const double count = static_cast<double>(batch * spatial);
    std::vector<double> mu(channels), inv_std(channels);
    if (training) {
      std::vector<double> sq(channels, 0.0);
      for_each_channel_entry(batch, channels, spatial, [&](std::size_t i, std::size_t c) { mu[c] += src[i]; });
      for (auto& m : mu) m /= count;
      for_each_channel_entry(batch, channels, spatial, [&](std::size_t i, std::size_t c) {
        const double d = src[i] - mu[c];
        sq[c] += d * d;
      });
      for (std::size_t c = 0; c < channels; ++c) {
        const double var = sq[c] / count;
        const double unbiased = count > 1.0 ? sq[c] / (count - 1.0) : var;
        state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu[c];
        state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        inv_std[c] = 1.0 / std::sqrt(var + state.epsilon);
      }
    } else {
      for (std::size_t c = 0; c < channels; ++c) {
        mu[c] = state.running_mean[c];
        inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.epsilon);
      }
    }
    for_each_channel_entry(batch, channels, spatial, [&](std::size_t i, std::size_t c) {
      xhat[i] = (src[i] - mu[c]) * inv_std[c];
      out[i] = gamma[c] * xhat[i] + beta[c];
    });
    auto xi = x.impl();
    auto gi = state.gamma.impl();
    auto bi = state.beta.impl();
    return make_result(
        x.shape(), std::move(out), {x, state.gamma, state.beta},
        [xi, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std), batch, channels, spatial,
         count, training](std::span<const double> g) {
          std::vector<double> sum_g(channels, 0.0), sum_gx(channels, 0.0);
          for_each_channel_entry(batch, channels, spatial, [&](std::size_t i, std::size_t c) {
            sum_g[c] += g[i];
            sum_gx[c] += g[i] * xhat[i];
          });
          if (gi->requires_grad) {
            auto& gg = grad_buffer(*gi);
            for (std::size_t c = 0; c < channels; ++c) gg[c] += sum_gx[c];
          }
          if (bi->requires_grad) {
            auto& gb = grad_buffer(*bi);
            for (std::size_t c = 0; c < channels; ++c) gb[c] += sum_g[c];
          }
          if (!xi->requires_grad) return;
          auto& gx = grad_buffer(*xi);
          std::vector<double> scale(channels), mean_g(channels, 0.0), mean_gx(channels, 0.0);
          for (std::size_t c = 0; c < channels; ++c) {
            scale[c] = gi->data[c] * inv_std[c];
            if (training) {
              mean_g[c] = sum_g[c] / count;
              mean_gx[c] = sum_gx[c] / count;
            }
          }
          for_each_channel_entry(batch, channels, spatial, [&](std::size_t i, std::size_t c) {
            gx[i] += scale[c] * (g[i] - mean_g[c] - xhat[i] * mean_gx[c]);
          });
        });
  }

  if (groups == 0 || channels % groups != 0) {
    throw ConfigError("normalize_features: " + std::to_string(groups) +
                      " groups do not divide " + std::to_string(channels) + " channels");
  }
  const std::size_t per_group = channels / groups;
  const std::size_t block = per_group * spatial;  // contiguous in [B, C, S]
  std::vector<double> inv_std(batch * groups);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t grp = 0; grp < groups; ++grp) {
      const std::size_t base = (b * channels + grp * per_group) * spatial;
      double acc = 0.0;
      for (std::size_t i = 0; i < block; ++i) acc += src[base + i];
      const double mu = acc / static_cast<double>(block);
      double sq = 0.0;
      for (std::size_t i = 0; i < block; ++i) {
        const double d = src[base + i] - mu;
        sq += d * d;
      }
      const double is = 1.0 / std::sqrt(sq / static_cast<double>(block) + state.epsilon);
      inv_std[b * groups + grp] = is;
      for (std::size_t i = 0; i < block; ++i) {
        const std::size_t c = grp * per_group + i / spatial;
        xhat[base + i] = (src[base + i] - mu) * is;
        out[base + i] = gamma[c] * xhat[base + i] + beta[c];
      }
    }
  }
  auto xi = x.impl();
  auto gi = state.gamma.impl();
  auto bi = state.beta.impl();
  return make_result(
      x.shape(), std::move(out), {x, state.gamma, state.beta},
      [xi, gi, bi, xhat = std::move(xhat), inv_std = std::move(inv_std), batch, channels, spatial,
       groups, per_group, block](std::span<const double> g) {
        if (gi->requires_grad || bi->requires_grad) {
          auto& gg = grad_buffer(*gi);
          auto& gb = grad_buffer(*bi);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t c = (i / spatial) % channels;
            gg[c] += g[i] * xhat[i];
            gb[c] += g[i];
          }
        }
        if (!xi->requires_grad) return;
        auto& gx = grad_buffer(*xi);
        const double n = static_cast<double>(block);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t grp = 0; grp < groups; ++grp) {
            const std::size_t base = (b * channels + grp * per_group) * spatial;
            double mean_d = 0.0, mean_dx = 0.0;
            for (std::size_t i = 0; i < block; ++i) {
              const std::size_t c = grp * per_group + i / spatial;
              const double d = g[base + i] * gi->data[c];
              mean_d += d;
              mean_dx += d * xhat[base + i];
            }
            mean_d /= n;
            mean_dx /= n;
            const double is = inv_std[b * groups + grp];
            for (std::size_t i = 0; i < block; ++i) {
              const std::size_t c = grp * per_group + i / spatial;
              const double d = g[base + i] * gi->data[c];
              gx[base + i] += is * (d - mean_d - xhat[base + i] * mean_dx);
            }
          }
        }
      });
}

Tensor dropout(const Tensor& x, double p, bool training, Rng& rng) {
  if (!(p >= 0.0) || p >= 1.0) {
    throw ConfigError("dropout: probability must lie in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) {
    auto xi = x.impl();
    return make_result(x.shape(), std::vector<double>(x.data().begin(), x.data().end()), {x},
                       [xi](std::span<const double> g) { detail::accumulate_grad(*xi, g); });
  }
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<double> mask(x.numel());
  std::vector<double> out(x.numel());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    mask[i] = rng.uniform() < p ? 0.0 : keep_scale;
    out[i] = x[i] * mask[i];
  }
  auto xi = x.impl();
  return make_result(x.shape(), std::move(out), {x},
                     [xi, mask = std::move(mask)](std::span<const double> g) {
                       if (!xi->requires_grad) return;
                       auto& gx = grad_buffer(*xi);
                       for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
                     });
}

std::size_t conv_output_extent(std::size_t input, std::size_t kernel, std::size_t stride,
                               std::size_t padding) {
  if (stride == 0) throw ConfigError("conv3d: stride must be positive");
  if (kernel > input + 2 * padding) {
    throw DimensionError("conv3d: kernel extent " + std::to_string(kernel) +
                         " exceeds padded input extent " + std::to_string(input + 2 * padding));
  }
  return (input + 2 * padding - kernel) / stride + 1;
}

namespace {

struct ConvGeometry {
  std::size_t batch, cin, cout;
  std::array<std::size_t, 3> in, k, out, stride, pad;

  std::size_t in_volume() const { return in[0] * in[1] * in[2]; }
  std::size_t out_volume() const { return out[0] * out[1] * out[2]; }
  std::size_t k_volume() const { return k[0] * k[1] * k[2]; }

  // Range of output positions o along `axis` for which o*stride - pad + tap
  // lands inside the input.
  std::pair<std::size_t, std::size_t> valid(std::size_t axis, std::size_t tap) const {
    const long s = static_cast<long>(stride[axis]);
    const long p = static_cast<long>(pad[axis]);
    const long t = static_cast<long>(tap);
    const long n = static_cast<long>(in[axis]);
    long lo = p - t > 0 ? (p - t + s - 1) / s : 0;
    long hi = (n - 1 + p - t) >= 0 ? (n - 1 + p - t) / s + 1 : 0;
    hi = std::min<long>(hi, static_cast<long>(out[axis]));
    if (lo > hi) lo = hi;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
  }
};

// Visits every (output position, input position) pair touched by kernel tap
// (a, b, c), calling fn(out_offset, in_offset) in a fixed order.
template <typename Fn>
void for_tap(const ConvGeometry& g, std::size_t a, std::size_t b, std::size_t c, Fn&& fn) {
  const auto [x0, x1] = g.valid(0, a);
  const auto [y0, y1] = g.valid(1, b);
  const auto [z0, z1] = g.valid(2, c);
  for (std::size_t ox = x0; ox < x1; ++ox) {
    const std::size_t ix = ox * g.stride[0] + a - g.pad[0];
    for (std::size_t oy = y0; oy < y1; ++oy) {
      const std::size_t iy = oy * g.stride[1] + b - g.pad[1];
      const std::size_t out_row = (ox * g.out[1] + oy) * g.out[2];
      const std::size_t in_row = (ix * g.in[1] + iy) * g.in[2];
      fn(out_row, in_row, z0, z1, c);
    }
  }
}

}  // namespace

Tensor conv3d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              std::array<std::size_t, 3> stride, std::array<std::size_t, 3> padding) {
  const bool batched = input.rank() == 5;
  if (!batched && input.rank() != 4) {
    throw DimensionError("conv3d: expected [C, X, Y, Z] or [B, C, X, Y, Z], got " +
                         shape_string(input.shape()));
  }
  if (weight.rank() != 5) {
    throw DimensionError("conv3d: expected weight [C_out, C_in, A, B, C], got " +
                         shape_string(weight.shape()));
  }
  ConvGeometry g{};
  g.batch = batched ? input.dim(0) : 1;
  const std::size_t off = batched ? 1 : 0;
  g.cin = input.dim(off);
  g.cout = weight.dim(0);
  if (weight.dim(1) != g.cin) {
    throw DimensionError("conv3d: input " + shape_string(input.shape()) + " has " +
                         std::to_string(g.cin) + " channels but weight is " +
                         shape_string(weight.shape()));
  }
  if (bias.rank() != 1 || bias.dim(0) != g.cout) {
    throw DimensionError("conv3d: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  for (std::size_t a = 0; a < 3; ++a) {
    g.in[a] = input.dim(off + 1 + a);
    g.k[a] = weight.dim(2 + a);
    g.stride[a] = stride[a];
    g.pad[a] = padding[a];
    g.out[a] = conv_output_extent(g.in[a], g.k[a], stride[a], padding[a]);
  }
  const std::size_t in_vol = g.in_volume(), out_vol = g.out_volume(), k_vol = g.k_volume();
  const double* src = input.data().data();
  const double* w = weight.data().data();
  std::vector<double> out(g.batch * g.cout * out_vol);

  parallel_for(g.batch * g.cout, 1, [&](std::size_t j0, std::size_t j1) {
    for (std::size_t job = j0; job < j1; ++job) {
      const std::size_t b = job / g.cout, co = job % g.cout;
      double* dst = out.data() + job * out_vol;
      std::fill(dst, dst + out_vol, bias[co]);
      for (std::size_t ci = 0; ci < g.cin; ++ci) {
        const double* plane = src + (b * g.cin + ci) * in_vol;
        const double* wk = w + (co * g.cin + ci) * k_vol;
        for (std::size_t a = 0; a < g.k[0]; ++a)
          for (std::size_t bb = 0; bb < g.k[1]; ++bb)
            for (std::size_t c = 0; c < g.k[2]; ++c) {
              const double wv = wk[(a * g.k[1] + bb) * g.k[2] + c];
              if (wv == 0.0) continue;
              for_tap(g, a, bb, c,
                      [&](std::size_t orow, std::size_t irow, std::size_t z0, std::size_t z1,
                          std::size_t tap) {
                        const std::size_t sz = g.stride[2];
                        const double* ip = plane + irow;
                        const std::size_t pz = g.pad[2];
                        for (std::size_t oz = z0; oz < z1; ++oz) dst[orow + oz] += wv * ip[oz * sz + tap - pz];
                      });
            }
      }
    }
  });

  Shape out_shape = batched ? Shape{g.batch, g.cout, g.out[0], g.out[1], g.out[2]}
                            : Shape{g.cout, g.out[0], g.out[1], g.out[2]};
  auto xi = input.impl();
  auto wi = weight.impl();
  auto bi = bias.impl();
  return make_result(
      std::move(out_shape), std::move(out), {input, weight, bias},
      [xi, wi, bi, g](std::span<const double> grad) {
        const std::size_t in_vol = g.in_volume(), out_vol = g.out_volume(), k_vol = g.k_volume();
        if (bi->requires_grad) {
          auto& gb = grad_buffer(*bi);
          for (std::size_t b = 0; b < g.batch; ++b)
            for (std::size_t co = 0; co < g.cout; ++co) {
              const double* gp = grad.data() + (b * g.cout + co) * out_vol;
              double acc = 0.0;
              for (std::size_t i = 0; i < out_vol; ++i) acc += gp[i];
              gb[co] += acc;
            }
        }
        if (wi->requires_grad) {
          double* gw = grad_buffer(*wi).data();
          const double* src = xi->data.data();
          parallel_for(g.cout, 1, [&](std::size_t c0, std::size_t c1) {
            for (std::size_t co = c0; co < c1; ++co)
              for (std::size_t ci = 0; ci < g.cin; ++ci)
                for (std::size_t a = 0; a < g.k[0]; ++a)
                  for (std::size_t bb = 0; bb < g.k[1]; ++bb)
                    for (std::size_t c = 0; c < g.k[2]; ++c) {
                      double acc = 0.0;
                      for (std::size_t b = 0; b < g.batch; ++b) {
                        const double* plane = src + (b * g.cin + ci) * in_vol;
                        const double* gp = grad.data() + (b * g.cout + co) * out_vol;
                        for_tap(g, a, bb, c,
                                [&](std::size_t orow, std::size_t irow, std::size_t z0,
                                    std::size_t z1, std::size_t tap) {
                                  const std::size_t sz = g.stride[2];
                                  const double* ip = plane + irow;
                        const std::size_t pz = g.pad[2];
                                  for (std::size_t oz = z0; oz < z1; ++oz)
                                    acc += gp[orow + oz] * ip[oz * sz + tap - pz];
                                });
                      }
                      gw[((co * g.cin + ci) * g.k[0] + a) * g.k[1] * g.k[2] + bb * g.k[2] + c] += acc;
                    }
          });
        }
        if (xi->requires_grad) {
          double* gx = grad_buffer(*xi).data();
          const double* w = wi->data.data();
          parallel_for(g.batch * g.cin, 1, [&](std::size_t j0, std::size_t j1) {
            for (std::size_t job = j0; job < j1; ++job) {
              const std::size_t b = job / g.cin, ci = job % g.cin;
              double* plane = gx + job * in_vol;
              for (std::size_t co = 0; co < g.cout; ++co) {
                const double* gp = grad.data() + (b * g.cout + co) * out_vol;
                const double* wk = w + (co * g.cin + ci) * k_vol;
                for (std::size_t a = 0; a < g.k[0]; ++a)
                  for (std::size_t bb = 0; bb < g.k[1]; ++bb)
                    for (std::size_t c = 0; c < g.k[2]; ++c) {
                      const double wv = wk[(a * g.k[1] + bb) * g.k[2] + c];
                      if (wv == 0.0) continue;
                      for_tap(g, a, bb, c,
                              [&](std::size_t orow, std::size_t irow, std::size_t z0,
                                  std::size_t z1, std::size_t tap) {
                                const std::size_t sz = g.stride[2];
                                double* ip = plane + irow;
                                const std::size_t pz = g.pad[2];
                                for (std::size_t oz = z0; oz < z1; ++oz)
                                  ip[oz * sz + tap - pz] += wv * gp[orow + oz];
                              });
                    }
              }
            }
          });
        }
      });
}

}  // namespace gdl::ad
