#include "fcgnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fcgnn/error.hpp"

namespace fcgnn {

Tensor2 affine_forward(const Tensor2& x, const Param& w, const Param& b) {
  if (x.cols() != w.value.rows() || b.value.rows() != 1 || b.value.cols() != w.value.cols()) {
    throw std::invalid_argument("affine: shape mismatch x " + x.shape_string() + ", w " +
                                w.value.shape_string() + ", b " + b.value.shape_string());
  }
  Tensor2 out(x.rows(), w.value.cols());
  for (std::size_t i = 0; i < out.rows(); ++i) {
    std::copy(b.value.values().begin(), b.value.values().end(), out.row(i).begin());
  }
  gemm_accumulate(x, w.value, out);
  return out;
}

Tensor2 affine_backward(const Tensor2& x, const Tensor2& dout, Param& w, Param& b) {
  if (dout.rows() != x.rows() || dout.cols() != w.value.cols()) {
    throw std::invalid_argument("affine backward: shape mismatch dout " + dout.shape_string() +
                                " for x " + x.shape_string() + ", w " + w.value.shape_string());
  }
  gemm_accumulate(transpose(x), dout, w.grad);
  add_inplace(b.grad, column_sums(dout));
  return matmul_nt(dout, w.value);
}

Tensor2 relu_forward(const Tensor2& x) {
  Tensor2 out = x;
  relu_inplace(out);
  return out;
}

void relu_inplace(Tensor2& x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
}

Tensor2 relu_backward(const Tensor2& x, const Tensor2& dout) {
  require_same_shape(x, dout, "relu backward");
  Tensor2 dx(x.rows(), x.cols());
  auto xv = x.values();
  auto dv = dout.values();
  auto out = dx.values();
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? dv[i] : 0.0;
  return dx;
}

Tensor2 dropout_forward(const Tensor2& x, double rate, Rng& rng, bool training, DropoutMask& mask) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ConfigError("dropout rate must lie in [0, 1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) {
    mask.scale = Tensor2();
    return x;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  mask.scale = Tensor2(x.rows(), x.cols());
  for (double& s : mask.scale.values()) s = rng.uniform() < rate ? 0.0 : keep_scale;
  Tensor2 out = x;
  auto ov = out.values();
  auto sv = mask.scale.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] *= sv[i];
  return out;
}

Tensor2 dropout_backward(const DropoutMask& mask, const Tensor2& dout) {
  if (mask.scale.empty()) return dout;
  require_same_shape(mask.scale, dout, "dropout backward");
  Tensor2 dx = dout;
  auto dv = dx.values();
  auto sv = mask.scale.values();
  for (std::size_t i = 0; i < dv.size(); ++i) dv[i] *= sv[i];
  return dx;
}

Tensor2 batch_norm_forward(const Tensor2& x, const Param& gamma, const Param& beta, bool training,
                           BatchNormState& state, BatchNormCache& cache, bool update_running) {
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  if (gamma.value.rows() != 1 || gamma.value.cols() != m || !gamma.value.same_shape(beta.value) ||
      state.running_mean.cols() != m) {
    throw std::invalid_argument("batch norm: shape mismatch x " + x.shape_string() + ", gamma " +
                                gamma.value.shape_string());
  }
  cache.training = training;
  cache.inv_std = Tensor2(1, m);
  Tensor2 mean(1, m);
  Tensor2 var(1, m);
  if (training) {
    if (n < 2) throw ConfigError("batch norm training requires at least 2 rows, got " + std::to_string(n));
    const auto order = lexicographic_row_order(x);
    for (std::size_t i : order) {
      auto r = x.row(i);
      for (std::size_t j = 0; j < m; ++j) mean(0, j) += r[j];
    }
    for (std::size_t j = 0; j < m; ++j) mean(0, j) /= static_cast<double>(n);
    for (std::size_t i : order) {
      auto r = x.row(i);
      for (std::size_t j = 0; j < m; ++j) {
        const double d = r[j] - mean(0, j);
        var(0, j) += d * d;
      }
    }
    for (std::size_t j = 0; j < m; ++j) var(0, j) /= static_cast<double>(n);
    if (update_running) {
      for (std::size_t j = 0; j < m; ++j) {
        state.running_mean(0, j) =
            (1.0 - kBatchNormMomentum) * state.running_mean(0, j) + kBatchNormMomentum * mean(0, j);
        state.running_var(0, j) =
            (1.0 - kBatchNormMomentum) * state.running_var(0, j) + kBatchNormMomentum * var(0, j);
      }
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }
  for (std::size_t j = 0; j < m; ++j) cache.inv_std(0, j) = 1.0 / std::sqrt(var(0, j) + kBatchNormEpsilon);

  cache.normalized = Tensor2(n, m);
  Tensor2 out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    auto xh = cache.normalized.row(i);
    auto o = out.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      xh[j] = (r[j] - mean(0, j)) * cache.inv_std(0, j);
      o[j] = gamma.value(0, j) * xh[j] + beta.value(0, j);
    }
  }
  return out;
}

Tensor2 batch_norm_backward(const BatchNormCache& cache, const Tensor2& dout, Param& gamma, Param& beta) {
  require_same_shape(cache.normalized, dout, "batch norm backward");
  const std::size_t n = dout.rows();
  const std::size_t m = dout.cols();
  Tensor2 sum_dxhat(1, m);
  Tensor2 sum_dxhat_xhat(1, m);
  for (std::size_t i = 0; i < n; ++i) {
    auto d = dout.row(i);
    auto xh = cache.normalized.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      gamma.grad(0, j) += d[j] * xh[j];
      beta.grad(0, j) += d[j];
      const double dxhat = d[j] * gamma.value(0, j);
      sum_dxhat(0, j) += dxhat;
      sum_dxhat_xhat(0, j) += dxhat * xh[j];
    }
  }
  Tensor2 dx(n, m);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto d = dout.row(i);
    auto xh = cache.normalized.row(i);
    auto o = dx.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double dxhat = d[j] * gamma.value(0, j);
      if (cache.training) {
        o[j] = cache.inv_std(0, j) * (dxhat - inv_n * sum_dxhat(0, j) - xh[j] * inv_n * sum_dxhat_xhat(0, j));
      } else {
        o[j] = cache.inv_std(0, j) * dxhat;
      }
    }
  }
  return dx;
}

Tensor2 softmax(const Tensor2& logits) {
  Tensor2 out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    auto o = out.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) {
      o[j] = std::exp(r[j] - mx);
      z += o[j];
    }
    for (double& v : o) v /= z;
  }
  return out;
}

LossAndGrad softmax_cross_entropy(const Tensor2& logits, std::span<const std::size_t> targets) {
  const std::size_t n = logits.rows();
  if (n == 0) throw std::invalid_argument("softmax cross entropy: empty batch");
  if (targets.size() != n) throw std::invalid_argument("softmax cross entropy: target count mismatch");
  LossAndGrad out;
  out.dlogits = Tensor2(n, logits.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] >= logits.cols()) {
      throw std::out_of_range("target class " + std::to_string(targets[i]) + " out of range for " +
                              std::to_string(logits.cols()) + " classes");
    }
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double log_z = mx + std::log(z);
    out.loss += (log_z - r[targets[i]]) * inv_n;
    auto d = out.dlogits.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) d[j] = std::exp(r[j] - log_z) * inv_n;
    d[targets[i]] -= inv_n;
  }
  if (!std::isfinite(out.loss)) throw NumericalError("softmax cross entropy produced a non-finite loss");
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor2& a) {
  std::vector<std::size_t> out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto r = a.row(i);
    out[i] = static_cast<std::size_t>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

}  // namespace fcgnn
