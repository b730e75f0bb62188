#include "hyperking/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hyperking/parallel.hpp"

namespace hyperking::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StridedRowMap = Eigen::Map<RowMat, 0, Eigen::OuterStride<>>;
using ConstStridedRowMap = Eigen::Map<const RowMat, 0, Eigen::OuterStride<>>;

// Upper bound on im2col buffer size (elements) per chunk.
constexpr std::size_t kMaxColumnElements = std::size_t{1} << 22;

struct Dims {
  std::size_t batch, channels, height, width;
  bool batched;

  std::size_t plane() const { return height * width; }
  std::size_t item() const { return channels * height * width; }

  Shape shape_with(std::size_t c, std::size_t h, std::size_t w) const {
    return batched ? Shape{batch, c, h, w} : Shape{c, h, w};
  }
};

Dims spatial_dims(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2], false};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3], true};
  throw ShapeError(std::string(op) + ": expected C x H x W or B x C x H x W input, got " +
                   shape_to_string(s));
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                     " vs " + shape_to_string(b.shape()));
  }
}

std::size_t rows_per_chunk(std::size_t column_rows, std::size_t out_w, std::size_t out_h) {
  const std::size_t per_row = std::max<std::size_t>(1, column_rows * out_w);
  return std::clamp<std::size_t>(kMaxColumnElements / per_row, 1, out_h);
}

// Builds the K x N column matrix (K = C*s*s, N = (y1-y0)*Wo) for output rows [y0, y1).
void im2col(const double* x, std::size_t channels, std::size_t h, std::size_t w, std::size_t s,
            std::size_t pad, std::size_t y0, std::size_t y1, std::size_t out_w,
            std::vector<double>& cols) {
  const std::size_t n = (y1 - y0) * out_w;
  cols.assign(channels * s * s * n, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = x + c * h * w;
    for (std::size_t ky = 0; ky < s; ++ky) {
      for (std::size_t kx = 0; kx < s; ++kx) {
        double* row = cols.data() + ((c * s + ky) * s + kx) * n;
        for (std::size_t oy = y0; oy < y1; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          const double* src = plane + static_cast<std::size_t>(iy) * w;
          double* dst = row + (oy - y0) * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ox] = src[ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<double>& cols, std::size_t channels, std::size_t h, std::size_t w,
                std::size_t s, std::size_t pad, std::size_t y0, std::size_t y1, std::size_t out_w,
                double* dx) {
  const std::size_t n = (y1 - y0) * out_w;
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = dx + c * h * w;
    for (std::size_t ky = 0; ky < s; ++ky) {
      for (std::size_t kx = 0; kx < s; ++kx) {
        const double* row = cols.data() + ((c * s + ky) * s + kx) * n;
        for (std::size_t oy = y0; oy < y1; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy + ky) - static_cast<std::ptrdiff_t>(pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(iy) * w;
          const double* src = row + (oy - y0) * out_w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox + kx) - static_cast<std::ptrdiff_t>(pad);
            if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(w)) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct ConvGeometry {
  Dims in;
  std::size_t out_channels, kernel, pad, out_h, out_w;

  std::size_t column_rows() const { return in.channels * kernel * kernel; }
  std::size_t out_plane() const { return out_h * out_w; }
};

void conv_forward_item(const ConvGeometry& g, const double* x, const double* w, const double* bias,
                       double* y) {
  const std::size_t k = g.column_rows();
  const std::size_t chunk = rows_per_chunk(k, g.out_w, g.out_h);
  std::vector<double> cols;
  Eigen::Map<const RowMat> wm(w, static_cast<Eigen::Index>(g.out_channels), static_cast<Eigen::Index>(k));
  for (std::size_t y0 = 0; y0 < g.out_h; y0 += chunk) {
    const std::size_t y1 = std::min(g.out_h, y0 + chunk);
    const std::size_t n = (y1 - y0) * g.out_w;
    im2col(x, g.in.channels, g.in.height, g.in.width, g.kernel, g.pad, y0, y1, g.out_w, cols);
    Eigen::Map<const RowMat> cm(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    StridedRowMap ym(y + y0 * g.out_w, static_cast<Eigen::Index>(g.out_channels),
                     static_cast<Eigen::Index>(n), Eigen::OuterStride<>(static_cast<Eigen::Index>(g.out_plane())));
    ym.noalias() = wm * cm;
  }
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    double* plane = y + o * g.out_plane();
    for (std::size_t i = 0; i < g.out_plane(); ++i) plane[i] += bias[o];
  }
}

// Accumulates the kernel gradient of one item into dw (O x K) and, if dx is
// non-null, the input gradient into dx.
void conv_backward_item(const ConvGeometry& g, const double* x, const double* w, const double* dy,
                        double* dw, double* dx) {
  const std::size_t k = g.column_rows();
  const std::size_t chunk = rows_per_chunk(k, g.out_w, g.out_h);
  std::vector<double> cols;
  std::vector<double> dcols;
  Eigen::Map<const RowMat> wm(w, static_cast<Eigen::Index>(g.out_channels), static_cast<Eigen::Index>(k));
  Eigen::Map<RowMat> dwm(dw, static_cast<Eigen::Index>(g.out_channels), static_cast<Eigen::Index>(k));
  for (std::size_t y0 = 0; y0 < g.out_h; y0 += chunk) {
    const std::size_t y1 = std::min(g.out_h, y0 + chunk);
    const std::size_t n = (y1 - y0) * g.out_w;
    ConstStridedRowMap dym(dy + y0 * g.out_w, static_cast<Eigen::Index>(g.out_channels),
                           static_cast<Eigen::Index>(n), Eigen::OuterStride<>(static_cast<Eigen::Index>(g.out_plane())));
    if (dw) {
      im2col(x, g.in.channels, g.in.height, g.in.width, g.kernel, g.pad, y0, y1, g.out_w, cols);
      Eigen::Map<const RowMat> cm(cols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
      dwm.noalias() += dym * cm.transpose();
    }
    if (dx) {
      dcols.resize(k * n);
      Eigen::Map<RowMat> dcm(dcols.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
      dcm.noalias() = wm.transpose() * dym;
      col2im_add(dcols, g.in.channels, g.in.height, g.in.width, g.kernel, g.pad, y0, y1, g.out_w, dx);
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Convolution

Var conv2d(Var input, Var kernel, Var bias, std::size_t padding) {
  const Dims in = spatial_dims(input.shape(), "conv2d");
  const Shape& ks = kernel.shape();
  if (ks.size() != 4 || ks[2] != ks[3]) {
    throw ShapeError("conv2d: kernel must be C_out x C_in x s x s, got " + shape_to_string(ks));
  }
  if (ks[1] != in.channels) {
    throw ShapeError("conv2d: kernel expects " + std::to_string(ks[1]) + " input channels but input " +
                     shape_to_string(input.shape()) + " has " + std::to_string(in.channels));
  }
  const std::size_t s = ks[2];
  if (s % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(s));
  if (bias.shape() != Shape{ks[0]}) {
    throw ShapeError("conv2d: bias shape " + shape_to_string(bias.shape()) + " does not match " +
                     std::to_string(ks[0]) + " output channels");
  }
  if (in.height + 2 * padding < s || in.width + 2 * padding < s) {
    throw ShapeError("conv2d: padded input " + shape_to_string(input.shape()) +
                     " is smaller than the kernel");
  }
  ConvGeometry g{in, ks[0], s, padding, in.height + 2 * padding - s + 1, in.width + 2 * padding - s + 1};

  Tensor out(in.shape_with(g.out_channels, g.out_h, g.out_w));
  {
    const double* x = input.value().data().data();
    const double* w = kernel.value().data().data();
    const double* b = bias.value().data().data();
    double* y = out.data().data();
    parallel_for(in.batch, [&](std::size_t item) {
      conv_forward_item(g, x + item * in.item(), w, b, y + item * g.out_channels * g.out_plane());
    });
  }

  Tape* tape = input.tape();
  return tape->record(std::move(out), {input, kernel, bias},
                      [g, input, kernel](const Tensor& dy, std::span<Tensor* const> grads) {
                        const double* x = input.value().data().data();
                        const double* w = kernel.value().data().data();
                        const std::size_t kw = g.out_channels * g.column_rows();
                        const bool want_w = grads[1] != nullptr;
                        std::vector<double> partial(want_w ? g.in.batch * kw : 0, 0.0);
                        double* dx = grads[0] ? grads[0]->data().data() : nullptr;
                        parallel_for(g.in.batch, [&](std::size_t item) {
                          conv_backward_item(g, x + item * g.in.item(), w,
                                             dy.data().data() + item * g.out_channels * g.out_plane(),
                                             want_w ? partial.data() + item * kw : nullptr,
                                             dx ? dx + item * g.in.item() : nullptr);
                        });
                        if (want_w) {
                          double* dw = grads[1]->data().data();
                          for (std::size_t item = 0; item < g.in.batch; ++item) {
                            for (std::size_t i = 0; i < kw; ++i) dw[i] += partial[item * kw + i];
                          }
                        }
                        if (grads[2]) {
                          double* db = grads[2]->data().data();
                          for (std::size_t item = 0; item < g.in.batch; ++item) {
                            for (std::size_t o = 0; o < g.out_channels; ++o) {
                              const double* plane = dy.data().data() + (item * g.out_channels + o) * g.out_plane();
                              double acc = 0.0;
                              for (std::size_t i = 0; i < g.out_plane(); ++i) acc += plane[i];
                              db[o] += acc;
                            }
                          }
                        }
                      });
}

Var transposed_conv2d(Var input, Var kernel, Var bias) {
  const Dims in = spatial_dims(input.shape(), "transposed_conv2d");
  const Shape& ks = kernel.shape();
  if (ks.size() != 4 || ks[2] != ks[3]) {
    throw ShapeError("transposed_conv2d: kernel must be C_in x C_out x s x s, got " + shape_to_string(ks));
  }
  if (ks[0] != in.channels) {
    throw ShapeError("transposed_conv2d: kernel expects " + std::to_string(ks[0]) +
                     " input channels but input " + shape_to_string(input.shape()) + " has " +
                     std::to_string(in.channels));
  }
  const std::size_t c_in = ks[0], c_out = ks[1], s = ks[2];
  // Transposed, spatially flipped kernel turns the operation into a fully
  // padded correlation.
  std::vector<std::size_t> index(c_out * c_in * s * s);
  for (std::size_t o = 0; o < c_out; ++o)
    for (std::size_t c = 0; c < c_in; ++c)
      for (std::size_t ky = 0; ky < s; ++ky)
        for (std::size_t kx = 0; kx < s; ++kx)
          index[((o * c_in + c) * s + ky) * s + kx] =
              ((c * c_out + o) * s + (s - 1 - ky)) * s + (s - 1 - kx);
  Var flipped = gather(kernel, std::move(index), Shape{c_out, c_in, s, s});
  return conv2d(input, flipped, bias, s - 1);
}

// ---------------------------------------------------------------------------
// Batch normalization

Var batch_norm_2d(Var input, Var gamma, Var beta, NormMode mode, BatchNormState& state,
                  bool update_running) {
  const Dims d = spatial_dims(input.shape(), "batch_norm_2d");
  const Shape cshape{d.channels};
  if (gamma.shape() != cshape || beta.shape() != cshape || state.running_mean.shape() != cshape ||
      state.running_var.shape() != cshape) {
    throw ShapeError("batch_norm_2d: parameters must have " + std::to_string(d.channels) + " channels");
  }
  const std::size_t count = d.batch * d.plane();
  if (mode == NormMode::Train && count < 2) {
    throw ShapeError("batch_norm_2d: train mode needs at least 2 values per channel");
  }

  const auto& x = input.value().data();
  const auto& g = gamma.value().data();
  const auto& b = beta.value().data();
  Tensor out(input.shape());
  Tensor xhat(input.shape());
  std::vector<double> inv_std(d.channels);

  for (std::size_t c = 0; c < d.channels; ++c) {
    double mu, var;
    if (mode == NormMode::Train) {
      double acc = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) {
        const double* p = x.data() + (n * d.channels + c) * d.plane();
        for (std::size_t i = 0; i < d.plane(); ++i) acc += p[i];
      }
      mu = acc / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) {
        const double* p = x.data() + (n * d.channels + c) * d.plane();
        for (std::size_t i = 0; i < d.plane(); ++i) sq += (p[i] - mu) * (p[i] - mu);
      }
      var = sq / static_cast<double>(count);
      if (update_running) {
        const double unbiased = sq / static_cast<double>(count - 1);
        state.running_mean[c] = (1.0 - kBatchNormMomentum) * state.running_mean[c] + kBatchNormMomentum * mu;
        state.running_var[c] = (1.0 - kBatchNormMomentum) * state.running_var[c] + kBatchNormMomentum * unbiased;
      }
    } else {
      mu = state.running_mean[c];
      var = state.running_var[c];
    }
    inv_std[c] = 1.0 / std::sqrt(var + kBatchNormEpsilon);
    for (std::size_t n = 0; n < d.batch; ++n) {
      const std::size_t off = (n * d.channels + c) * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) {
        const double h = (x[off + i] - mu) * inv_std[c];
        xhat[off + i] = h;
        out[off + i] = g[c] * h + b[c];
      }
    }
  }

  Tape* tape = input.tape();
  return tape->record(
      std::move(out), {input, gamma, beta},
      [d, mode, gamma, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          const Tensor& dy, std::span<Tensor* const> grads) {
        const auto& g = gamma.value().data();
        const double count = static_cast<double>(d.batch * d.plane());
        for (std::size_t c = 0; c < d.channels; ++c) {
          double sum_dy = 0.0, sum_dy_xhat = 0.0;
          for (std::size_t n = 0; n < d.batch; ++n) {
            const std::size_t off = (n * d.channels + c) * d.plane();
            for (std::size_t i = 0; i < d.plane(); ++i) {
              sum_dy += dy[off + i];
              sum_dy_xhat += dy[off + i] * xhat[off + i];
            }
          }
          if (grads[1]) (*grads[1])[c] += sum_dy_xhat;
          if (grads[2]) (*grads[2])[c] += sum_dy;
          if (!grads[0]) continue;
          Tensor& dx = *grads[0];
          const double k = g[c] * inv_std[c];
          for (std::size_t n = 0; n < d.batch; ++n) {
            const std::size_t off = (n * d.channels + c) * d.plane();
            for (std::size_t i = 0; i < d.plane(); ++i) {
              if (mode == NormMode::Train) {
                dx[off + i] += k * (dy[off + i] - sum_dy / count - xhat[off + i] * sum_dy_xhat / count);
              } else {
                dx[off + i] += k * dy[off + i];
              }
            }
          }
        }
      });
}

// ---------------------------------------------------------------------------
// Activations

Var leaky_relu(Var x, double slope) {
  Tensor out(x.shape());
  const auto& v = x.value().data();
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] >= 0.0 ? v[i] : slope * v[i];
  return x.tape()->record(std::move(out), {x}, [x, slope](const Tensor& dy, std::span<Tensor* const> grads) {
    const auto& v = x.value().data();
    Tensor& dx = *grads[0];
    for (std::size_t i = 0; i < v.size(); ++i) dx[i] += v[i] >= 0.0 ? dy[i] : slope * dy[i];
  });
}

Var sigmoid(Var x) {
  Tensor out(x.shape());
  const auto& v = x.value().data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    // Branches keep exp() from overflowing for large |v|.
    if (v[i] >= 0.0) {
      out[i] = 1.0 / (1.0 + std::exp(-v[i]));
    } else {
      const double e = std::exp(v[i]);
      out[i] = e / (1.0 + e);
    }
  }
  Tensor saved = out;
  return x.tape()->record(std::move(out), {x},
                          [saved = std::move(saved)](const Tensor& dy, std::span<Tensor* const> grads) {
                            Tensor& dx = *grads[0];
                            for (std::size_t i = 0; i < saved.numel(); ++i) {
                              dx[i] += dy[i] * saved[i] * (1.0 - saved[i]);
                            }
                          });
}

// ---------------------------------------------------------------------------
// Pooling and resampling

Var max_pool_2x2(Var x) {
  const Dims d = spatial_dims(x.shape(), "max_pool_2x2");
  if (d.height % 2 != 0 || d.width % 2 != 0) {
    throw ShapeError("max_pool_2x2: spatial extents must be even, got " + shape_to_string(x.shape()));
  }
  const std::size_t oh = d.height / 2, ow = d.width / 2;
  Tensor out(d.shape_with(d.channels, oh, ow));
  std::vector<std::size_t> argmax(out.numel());
  const auto& v = x.value().data();
  for (std::size_t p = 0; p < d.batch * d.channels; ++p) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        std::size_t best = p * d.plane() + 2 * oy * d.width + 2 * ox;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = p * d.plane() + (2 * oy + dy) * d.width + 2 * ox + dx;
            if (v[idx] > v[best]) best = idx;
          }
        }
        const std::size_t o = p * oh * ow + oy * ow + ox;
        out[o] = v[best];
        argmax[o] = best;
      }
    }
  }
  return x.tape()->record(std::move(out), {x},
                          [argmax = std::move(argmax)](const Tensor& dy, std::span<Tensor* const> grads) {
                            Tensor& dx = *grads[0];
                            for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += dy[o];
                          });
}

Var adaptive_dual_pool(Var x, std::size_t out_h, std::size_t out_w) {
  const Dims d = spatial_dims(x.shape(), "adaptive_dual_pool");
  if (out_h == 0 || out_w == 0 || out_h > d.height || out_w > d.width) {
    throw ShapeError("adaptive_dual_pool: output grid " + std::to_string(out_h) + "x" +
                     std::to_string(out_w) + " exceeds input " + shape_to_string(x.shape()));
  }
  const auto cell_begin = [](std::size_t i, std::size_t in, std::size_t out) { return i * in / out; };
  const auto cell_end = [](std::size_t i, std::size_t in, std::size_t out) {
    return ((i + 1) * in + out - 1) / out;
  };

  Tensor out(d.shape_with(2, out_h, out_w));
  const std::size_t cells = out_h * out_w;
  std::vector<std::size_t> argmax(d.batch * cells);
  const auto& v = x.value().data();
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t cy = 0; cy < out_h; ++cy) {
      const std::size_t y0 = cell_begin(cy, d.height, out_h), y1 = cell_end(cy, d.height, out_h);
      for (std::size_t cx = 0; cx < out_w; ++cx) {
        const std::size_t x0 = cell_begin(cx, d.width, out_w), x1 = cell_end(cx, d.width, out_w);
        std::size_t best = n * d.item() + y0 * d.width + x0;
        double acc = 0.0;
        for (std::size_t c = 0; c < d.channels; ++c) {
          for (std::size_t yy = y0; yy < y1; ++yy) {
            for (std::size_t xx = x0; xx < x1; ++xx) {
              const std::size_t idx = n * d.item() + c * d.plane() + yy * d.width + xx;
              acc += v[idx];
              if (v[idx] > v[best]) best = idx;
            }
          }
        }
        const double count = static_cast<double>(d.channels * (y1 - y0) * (x1 - x0));
        out[n * 2 * cells + cy * out_w + cx] = v[best];
        out[n * 2 * cells + cells + cy * out_w + cx] = acc / count;
        argmax[n * cells + cy * out_w + cx] = best;
      }
    }
  }
  return x.tape()->record(
      std::move(out), {x},
      [d, out_h, out_w, cells, argmax = std::move(argmax), cell_begin, cell_end](
          const Tensor& dy, std::span<Tensor* const> grads) {
        Tensor& dx = *grads[0];
        for (std::size_t n = 0; n < d.batch; ++n) {
          for (std::size_t cy = 0; cy < out_h; ++cy) {
            const std::size_t y0 = cell_begin(cy, d.height, out_h), y1 = cell_end(cy, d.height, out_h);
            for (std::size_t cx = 0; cx < out_w; ++cx) {
              const std::size_t x0 = cell_begin(cx, d.width, out_w), x1 = cell_end(cx, d.width, out_w);
              const std::size_t cell = cy * out_w + cx;
              dx[argmax[n * cells + cell]] += dy[n * 2 * cells + cell];
              const double share = dy[n * 2 * cells + cells + cell] /
                                   static_cast<double>(d.channels * (y1 - y0) * (x1 - x0));
              for (std::size_t c = 0; c < d.channels; ++c)
                for (std::size_t yy = y0; yy < y1; ++yy)
                  for (std::size_t xx = x0; xx < x1; ++xx)
                    dx[n * d.item() + c * d.plane() + yy * d.width + xx] += share;
            }
          }
        }
      });
}

namespace {

struct Tap {
  std::size_t lo, hi;
  double frac;
};

// Half-pixel source coordinates for a 2x upsample along one axis.
std::vector<Tap> upsample_taps(std::size_t in) {
  std::vector<Tap> taps(2 * in);
  for (std::size_t o = 0; o < 2 * in; ++o) {
    double src = (static_cast<double>(o) + 0.5) * 0.5 - 0.5;
    if (src < 0.0) src = 0.0;
    const auto lo = static_cast<std::size_t>(src);
    const std::size_t hi = std::min(lo + 1, in - 1);
    taps[o] = {lo, hi, src - static_cast<double>(lo)};
  }
  return taps;
}

}  // namespace

Var bilinear_up_2x(Var x) {
  const Dims d = spatial_dims(x.shape(), "bilinear_up_2x");
  const auto ty = upsample_taps(d.height);
  const auto tx = upsample_taps(d.width);
  const std::size_t oh = 2 * d.height, ow = 2 * d.width;
  Tensor out(d.shape_with(d.channels, oh, ow));
  const auto& v = x.value().data();
  for (std::size_t p = 0; p < d.batch * d.channels; ++p) {
    const double* src = v.data() + p * d.plane();
    double* dst = out.data().data() + p * oh * ow;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      const Tap& a = ty[oy];
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const Tap& b = tx[ox];
        const double top = (1.0 - b.frac) * src[a.lo * d.width + b.lo] + b.frac * src[a.lo * d.width + b.hi];
        const double bot = (1.0 - b.frac) * src[a.hi * d.width + b.lo] + b.frac * src[a.hi * d.width + b.hi];
        dst[oy * ow + ox] = (1.0 - a.frac) * top + a.frac * bot;
      }
    }
  }
  return x.tape()->record(std::move(out), {x},
                          [d, ty, tx, oh, ow](const Tensor& dy, std::span<Tensor* const> grads) {
                            Tensor& dx = *grads[0];
                            for (std::size_t p = 0; p < d.batch * d.channels; ++p) {
                              double* dst = dx.data().data() + p * d.plane();
                              const double* g = dy.data().data() + p * oh * ow;
                              for (std::size_t oy = 0; oy < oh; ++oy) {
                                const Tap& a = ty[oy];
                                for (std::size_t ox = 0; ox < ow; ++ox) {
                                  const Tap& b = tx[ox];
                                  const double v = g[oy * ow + ox];
                                  dst[a.lo * d.width + b.lo] += (1.0 - a.frac) * (1.0 - b.frac) * v;
                                  dst[a.lo * d.width + b.hi] += (1.0 - a.frac) * b.frac * v;
                                  dst[a.hi * d.width + b.lo] += a.frac * (1.0 - b.frac) * v;
                                  dst[a.hi * d.width + b.hi] += a.frac * b.frac * v;
                                }
                              }
                            }
                          });
}

// ---------------------------------------------------------------------------
// Dense

Var affine(Var x, Var weight, Var bias) {
  const Shape& xs = x.shape();
  const Shape& ws = weight.shape();
  if (ws.size() != 2) throw ShapeError("affine: weight must be m x n, got " + shape_to_string(ws));
  const std::size_t m = ws[0], n = ws[1];
  std::size_t batch;
  if (xs.size() == 1) {
    batch = 1;
  } else if (xs.size() == 2) {
    batch = xs[0];
  } else {
    throw ShapeError("affine: input must be [n] or [B, n], got " + shape_to_string(xs));
  }
  if (xs.back() != n) {
    throw ShapeError("affine: input width " + std::to_string(xs.back()) + " does not match weight " +
                     shape_to_string(ws));
  }
  if (bias.shape() != Shape{m}) {
    throw ShapeError("affine: bias shape " + shape_to_string(bias.shape()) + " does not match " +
                     std::to_string(m) + " outputs");
  }
  Tensor out(xs.size() == 1 ? Shape{m} : Shape{batch, m});
  const auto& xv = x.value().data();
  const auto& wv = weight.value().data();
  const auto& bv = bias.value().data();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = bv[i];
      for (std::size_t j = 0; j < n; ++j) acc += wv[i * n + j] * xv[b * n + j];
      out[b * m + i] = acc;
    }
  }
  return x.tape()->record(std::move(out), {x, weight, bias},
                          [x, weight, batch, m, n](const Tensor& dy, std::span<Tensor* const> grads) {
                            const auto& xv = x.value().data();
                            const auto& wv = weight.value().data();
                            for (std::size_t b = 0; b < batch; ++b) {
                              for (std::size_t i = 0; i < m; ++i) {
                                const double g = dy[b * m + i];
                                if (grads[2]) (*grads[2])[i] += g;
                                for (std::size_t j = 0; j < n; ++j) {
                                  if (grads[0]) (*grads[0])[b * n + j] += wv[i * n + j] * g;
                                  if (grads[1]) (*grads[1])[i * n + j] += xv[b * n + j] * g;
                                }
                              }
                            }
                          });
}

// ---------------------------------------------------------------------------
// Shape manipulation

Var reshape(Var x, Shape shape) {
  if (shape_numel(shape) != x.value().numel()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(x.shape()) + " as " + shape_to_string(shape));
  }
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape()->record(std::move(out), {x}, [](const Tensor& dy, std::span<Tensor* const> grads) {
    Tensor& dx = *grads[0];
    for (std::size_t i = 0; i < dy.numel(); ++i) dx[i] += dy[i];
  });
}

Var gather(Var x, std::vector<std::size_t> index, Shape shape) {
  if (shape_numel(shape) != index.size()) {
    throw ShapeError("gather: index count does not match shape " + shape_to_string(shape));
  }
  const auto& v = x.value().data();
  Tensor out(std::move(shape));
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= v.size()) throw ShapeError("gather: index out of range");
    out[i] = v[index[i]];
  }
  return x.tape()->record(std::move(out), {x},
                          [index = std::move(index)](const Tensor& dy, std::span<Tensor* const> grads) {
                            Tensor& dx = *grads[0];
                            for (std::size_t i = 0; i < index.size(); ++i) dx[index[i]] += dy[i];
                          });
}

// ---------------------------------------------------------------------------
// Elementwise and reductions

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] + b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [](const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      if (grads[0]) (*grads[0])[i] += dy[i];
      if (grads[1]) (*grads[1])[i] += dy[i];
    }
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] - b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [](const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      if (grads[0]) (*grads[0])[i] += dy[i];
      if (grads[1]) (*grads[1])[i] -= dy[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = a.value()[i] * b.value()[i];
  return a.tape()->record(std::move(out), {a, b}, [a, b](const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t i = 0; i < dy.numel(); ++i) {
      if (grads[0]) (*grads[0])[i] += dy[i] * b.value()[i];
      if (grads[1]) (*grads[1])[i] += dy[i] * a.value()[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = factor * x.value()[i];
  return x.tape()->record(std::move(out), {x}, [factor](const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t i = 0; i < dy.numel(); ++i) (*grads[0])[i] += factor * dy[i];
  });
}

Var add_scalar(Var x, double value) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = x.value()[i] + value;
  return x.tape()->record(std::move(out), {x}, [](const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t i = 0; i < dy.numel(); ++i) (*grads[0])[i] += dy[i];
  });
}

Var log(Var x) {
  Tensor out(x.shape());
  for (std::size_t i = 0; i < out.numel(); ++i) out[i] = std::log(x.value()[i]);
  return x.tape()->record(std::move(out), {x}, [x](const Tensor& dy, std::span<Tensor* const> grads) {
    for (std::size_t i = 0; i < dy.numel(); ++i) (*grads[0])[i] += dy[i] / x.value()[i];
  });
}

Var sum(Var x) {
  const auto& v = x.value().data();
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  return x.tape()->record(Tensor::scalar(total), {x}, [](const Tensor& dy, std::span<Tensor* const> grads) {
    Tensor& dx = *grads[0];
    for (std::size_t i = 0; i < dx.numel(); ++i) dx[i] += dy[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().numel())); }

Var smooth_l1_mean(Var a, Var b) {
  require_same_shape(a, b, "smooth_l1_mean");
  const std::size_t n = a.value().numel();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = a.value()[i] - b.value()[i];
    total += std::abs(r) < 1.0 ? 0.5 * r * r : std::abs(r) - 0.5;
  }
  return a.tape()->record(Tensor::scalar(total / static_cast<double>(n)), {a, b},
                          [a, b, n](const Tensor& dy, std::span<Tensor* const> grads) {
                            const double k = dy[0] / static_cast<double>(n);
                            for (std::size_t i = 0; i < n; ++i) {
                              const double r = a.value()[i] - b.value()[i];
                              const double g = k * (std::abs(r) < 1.0 ? r : (r > 0.0 ? 1.0 : -1.0));
                              if (grads[0]) (*grads[0])[i] += g;
                              if (grads[1]) (*grads[1])[i] -= g;
                            }
                          });
}

}  // namespace hyperking::ops
