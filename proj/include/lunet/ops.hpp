#pragma once

#include <cstddef>

#include "lunet/tape.hpp"
#include "lunet/tensor.hpp"

// Differentiable operations over NC(D)HW tensors with 2 or 3 spatial axes.
namespace lunet::ops {

struct ConvOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

// Cross-correlation. input [B, Cin, S...], weight [Cout, Cin, k...], bias [Cout].
Var conv(Tape& tape, Var input, Var weight, Var bias, ConvOptions opt = {});

Var relu(Tape& tape, Var x);

// 2x max pooling along every spatial axis; extents must be even.
Var maxpool2(Tape& tape, Var x);

// Repeats every voxel 2^d times.
Var upsample_nearest2(Tape& tape, Var x);

// Stacks along the channel axis, `first` occupying the lower channel indices.
Var concat_channels(Tape& tape, Var first, Var second);

Var sigmoid(Tape& tape, Var x);

// Softmax across the channel axis at every voxel.
Var softmax_channels(Tape& tape, Var x);

// Per-sample, per-channel normalization over spatial axes with affine gamma/beta [C].
Var instance_norm(Tape& tape, Var x, Var gamma, Var beta, double eps = 1e-5);

// y[b, c, ...] = x[b, c, ...] * scale[b, c]; scale is a constant [B, C] tensor.
Var channel_scale(Tape& tape, Var x, Tensor scale);

Var sum(Tape& tape, Var x);
Var square(Tape& tape, Var x);

enum class LossKind { soft_dice, cross_entropy };

inline constexpr double kDiceEpsilon = 1e-6;

// Mean over channels of 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps).
Var soft_dice_loss(Tape& tape, Var prediction, Var target);

// Binary cross-entropy for one channel, categorical otherwise; mean per voxel.
Var cross_entropy_loss(Tape& tape, Var prediction, Var target);

// Dispatches on kind. Throws NanError for non-finite inputs and ShapeError on mismatch.
Var loss(Tape& tape, Var prediction, Var target, LossKind kind);

// Non-differentiable forward convolution, used by tests and inference helpers.
Tensor conv_forward(const Tensor& input, const Tensor& weight, const Tensor& bias, ConvOptions opt = {});

}  // namespace lunet::ops
