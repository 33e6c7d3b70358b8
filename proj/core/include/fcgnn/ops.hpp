#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fcgnn/param.hpp"
#include "fcgnn/rng.hpp"
#include "fcgnn/tensor.hpp"

namespace fcgnn {

// Differentiable building blocks. Each forward has a paired backward that
// accumulates parameter gradients into Param::grad and returns the gradient
// with respect to the input.

// out = x w + b, with b (1 x m) broadcast over rows.
Tensor2 affine_forward(const Tensor2& x, const Param& w, const Param& b);
Tensor2 affine_backward(const Tensor2& x, const Tensor2& dout, Param& w, Param& b);

Tensor2 relu_forward(const Tensor2& x);
// Gradient passes where the forward input was strictly positive.
Tensor2 relu_backward(const Tensor2& x, const Tensor2& dout);
void relu_inplace(Tensor2& x);

// Inverted dropout. `scale` holds 0 or 1/(1-rate) per entry in training mode
// and is empty otherwise (identity).
struct DropoutMask {
  Tensor2 scale;
};

Tensor2 dropout_forward(const Tensor2& x, double rate, Rng& rng, bool training, DropoutMask& mask);
Tensor2 dropout_backward(const DropoutMask& mask, const Tensor2& dout);

struct BatchNormState {
  Tensor2 running_mean;  // 1 x m
  Tensor2 running_var;   // 1 x m, biased
  explicit BatchNormState(std::size_t width = 0)
      : running_mean(1, width, 0.0), running_var(1, width, 1.0) {}
};

struct BatchNormCache {
  Tensor2 normalized;  // x_hat
  Tensor2 inv_std;     // 1 x m
  bool training = false;
};

inline constexpr double kBatchNormEpsilon = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

// Training mode standardizes each column with batch statistics (biased
// variance) and, when `update_running` is set, blends them into `state` with
// momentum 0.1. Eval mode uses the running statistics.
Tensor2 batch_norm_forward(const Tensor2& x, const Param& gamma, const Param& beta, bool training,
                           BatchNormState& state, BatchNormCache& cache, bool update_running = true);
Tensor2 batch_norm_backward(const BatchNormCache& cache, const Tensor2& dout, Param& gamma, Param& beta);

Tensor2 softmax(const Tensor2& logits);

struct LossAndGrad {
  double loss = 0.0;
  Tensor2 dlogits;
};

// Mean negative log-likelihood of the targets under a row-wise softmax.
LossAndGrad softmax_cross_entropy(const Tensor2& logits, std::span<const std::size_t> targets);

std::vector<std::size_t> argmax_rows(const Tensor2& a);

}  // namespace fcgnn
