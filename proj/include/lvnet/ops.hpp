#pragma once

#include <span>

#include "lvnet/tape.hpp"

namespace lvnet {

struct Conv2dParams {
  std::size_t stride = 1;
  std::size_t padding = 0;
};

/// Output extent of a strided, padded window sweep: floor((in + 2p - k) / s) + 1.
/// Throws when the window does not fit.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

/// Cross-correlation of input [N,C,H,W] with kernels [J,C,k,k] -> [N,J,H',W'].
Var conv2d(Tape& tape, Var input, Var kernels, Conv2dParams params = {});

/// Adds bias[c] to every element of channel c of a [N,C,...] tensor.
Var add_channel_bias(Tape& tape, Var input, Var bias);

/// input [N,D] * weights [D,K] + bias [K].
Var dense(Tape& tape, Var input, Var weights, Var bias);

Var relu(Tape& tape, Var input);

/// Max over window x window patches of a [N,C,H,W] tensor. Ties go to the first
/// element in row-major window order.
Var max_pool2d(Tape& tape, Var input, std::size_t window = 2, std::size_t stride = 2);

/// [N, ...] -> [N, prod(...)].
Var flatten(Tape& tape, Var input);

/// Mean over the batch of -log softmax(logits)[label]. Returns shape [1].
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels);

Var sum(Tape& tape, Var input);
Var add(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);

}  // namespace lvnet
