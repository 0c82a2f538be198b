#pragma once

#include <span>
#include <vector>

#include "yieldnet/autodiff.hpp"

// Differentiable primitives. Operations that take a "sample" accept an
// optional leading batch axis: conv1d/avgpool1d take [C, L] or [B, C, L],
// affine takes [n] or [B, n]; concat/slice act on the last axis.

namespace yieldnet::ad {

/// Length-preserving 1-D cross-correlation with zero padding (k-1)/2.
/// kernels: [C_out, C_in, k] with k odd; bias: [C_out].
Var conv1d(Var input, Var kernels, Var bias);

/// Average pooling, window 2, stride 2. A trailing odd element is dropped.
Var avgpool1d(Var input);

/// weights · input + bias. weights: [m, n]; bias: [m].
Var affine(Var input, Var weights, Var bias);

Var relu(Var x);
Var sigmoid(Var x);
Var tanh(Var x);

Var add(Var a, Var b);
Var mul(Var a, Var b);
/// scale * x + shift, with constant scale/shift.
Var scale_shift(Var x, double scale, double shift);

/// Concatenation along the last axis. Leading extents must agree.
Var concat(std::span<const Var> parts);
Var concat(std::initializer_list<Var> parts);
/// Elements [offset, offset + length) of the last axis.
Var slice(Var x, std::size_t offset, std::size_t length);
Var reshape(Var x, Shape shape);

/// Σ weights[i] * x[i] as a scalar. Used for projections in gradient checks.
Var dot(Var x, std::span<const double> weights);
Var sum(Var x);

/// Mean squared difference between a prediction vector and constant targets.
Var mse_loss(Var predictions, std::span<const double> targets);

struct LstmParams {
  /// Stacked gate weights [4H, d + H] in gate order input, forget, cell, output.
  Var weight;
  /// Stacked gate biases [4H].
  Var bias;
};

struct LstmState {
  Var h;
  Var c;
};

/// One LSTM step: gates from [x; h_prev], c = f*c_prev + i*g, h = o*tanh(c).
LstmState lstm_cell_step(Var x, Var h_prev, Var c_prev, const LstmParams& params);

struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> variance;
};

/// Training-mode batch normalization over the batch axis of x [B, m] using
/// population statistics. Writes the batch statistics to `stats` if given.
Var batch_norm_train(Var x, Var gamma, Var beta, double eps, BatchNormStats* stats = nullptr);

/// Inference-mode batch normalization with fixed running statistics.
Var batch_norm_infer(Var x, Var gamma, Var beta, std::span<const double> running_mean,
                     std::span<const double> running_var, double eps);

}  // namespace yieldnet::ad
