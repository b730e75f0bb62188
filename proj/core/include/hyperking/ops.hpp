#pragma once

#include <cstddef>
#include <vector>

#include "hyperking/autodiff.hpp"
#include "hyperking/tensor.hpp"

/// Differentiable operations recorded on a Tape.
///
/// Spatial operations accept either a single item (C x H x W) or a batch
/// (B x C x H x W) and return a result of the same rank. All convolutions
/// are stride 1.
namespace hyperking::ops {

// Convolution ---------------------------------------------------------------

/// kernel: C_out x C_in x s x s with s odd; bias: C_out.
Var conv2d(Var input, Var kernel, Var bias, std::size_t padding);

/// Stride-1, unpadded transposed convolution; kernel: C_in x C_out x s x s.
/// Output extent is H + s - 1. This is the adjoint of an unpadded conv2d
/// with the same kernel.
Var transposed_conv2d(Var input, Var kernel, Var bias);

// Normalization -------------------------------------------------------------

enum class NormMode { Train, Eval };

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;

  static BatchNormState fresh(std::size_t channels) {
    return {Tensor({channels}, 0.0), Tensor({channels}, 1.0)};
  }
};

/// Train mode normalizes with batch moments and, when `update_running` is
/// set, folds them into `state` (unbiased variance, momentum 0.1). Eval mode
/// normalizes with the running moments.
Var batch_norm_2d(Var input, Var gamma, Var beta, NormMode mode, BatchNormState& state,
                  bool update_running = true);

// Activations ---------------------------------------------------------------

Var leaky_relu(Var x, double slope);
Var sigmoid(Var x);

// Pooling and resampling ----------------------------------------------------

Var max_pool_2x2(Var x);

/// Pools jointly over channels and space onto a 1 x out_h x out_w cell grid.
/// Channel 0 of the result holds each cell's maximum, channel 1 its mean.
Var adaptive_dual_pool(Var x, std::size_t out_h, std::size_t out_w);

/// Bilinear 2x upsampling with half-pixel (align-corners disabled) sampling.
Var bilinear_up_2x(Var x);

// Dense ---------------------------------------------------------------------

/// weight * x + bias for x of shape [n] or [B, n]; weight m x n, bias m.
Var affine(Var x, Var weight, Var bias);

// Shape manipulation -------------------------------------------------------

Var reshape(Var x, Shape shape);

/// out[i] = x[index[i]] with the given output shape.
Var gather(Var x, std::vector<std::size_t> index, Shape shape);

// Elementwise and reductions -----------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_scalar(Var x, double value);
Var log(Var x);
Var sum(Var x);
Var mean(Var x);

/// Mean over elements of h(a - b), h(r) = r^2/2 for |r| < 1, |r| - 1/2 otherwise.
Var smooth_l1_mean(Var a, Var b);

}  // namespace hyperking::ops
