#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcgnn/rng.hpp"
#include "fcgnn/tensor.hpp"

namespace fcgnn {

// A trainable tensor together with its gradient slot and Adam moments. All
// four tensors always share one shape.
struct Param {
  std::string name;
  Tensor2 value;
  Tensor2 grad;
  Tensor2 adam_m;
  Tensor2 adam_v;
  std::int64_t step_count = 0;

  Param(std::string name, Tensor2 init);
  void zero_grad() { grad.fill(0.0); }
};

using ParamId = std::size_t;

// Append-only owner of a model's parameters. Ids stay valid for the store's
// lifetime; iteration order is insertion order.
class ParamStore {
 public:
  ParamId add(std::string name, Tensor2 init);

  Param& operator[](ParamId id) { return params_.at(id); }
  const Param& operator[](ParamId id) const { return params_.at(id); }

  std::size_t size() const { return params_.size(); }
  std::span<Param> all() { return params_; }
  std::span<const Param> all() const { return params_; }

  std::size_t scalar_count() const;
  void zero_grad();

  // Values only; used to retain and restore the best parameters.
  std::vector<Tensor2> snapshot() const;
  void restore(const std::vector<Tensor2>& values);

 private:
  std::vector<Param> params_;
};

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled: value *= 1 - lr * wd before the step
};

// Bias-corrected Adam over every parameter in the store, then zeroes grads.
// Throws NumericalError naming the parameter on a non-finite gradient; no
// parameter is modified in that case.
void adam_step(ParamStore& params, const AdamOptions& options);

// Uniform in +-sqrt(6 / (rows + cols)).
Tensor2 glorot_init(std::size_t rows, std::size_t cols, Rng& rng);

}  // namespace fcgnn
