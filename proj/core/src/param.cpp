#include "fcgnn/param.hpp"

#include <cmath>
#include <stdexcept>

#include "fcgnn/error.hpp"

namespace fcgnn {

Param::Param(std::string name_, Tensor2 init)
    : name(std::move(name_)),
      value(std::move(init)),
      grad(value.rows(), value.cols()),
      adam_m(value.rows(), value.cols()),
      adam_v(value.rows(), value.cols()) {}

ParamId ParamStore::add(std::string name, Tensor2 init) {
  params_.emplace_back(std::move(name), std::move(init));
  return params_.size() - 1;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

std::vector<Tensor2> ParamStore::snapshot() const {
  std::vector<Tensor2> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.value);
  return out;
}

void ParamStore::restore(const std::vector<Tensor2>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    require_same_shape(params_[i].value, values[i], "restore");
    params_[i].value = values[i];
  }
}

void adam_step(ParamStore& params, const AdamOptions& options) {
  for (const auto& p : params.all()) {
    if (!p.grad.all_finite()) throw NumericalError("non-finite gradient in parameter '" + p.name + "'");
  }
  const double lr = options.learning_rate;
  for (auto& p : params.all()) {
    p.step_count += 1;
    const double t = static_cast<double>(p.step_count);
    const double correction1 = 1.0 - std::pow(options.beta1, t);
    const double correction2 = 1.0 - std::pow(options.beta2, t);
    const double decay = 1.0 - lr * options.weight_decay;
    auto value = p.value.values();
    auto grad = p.grad.values();
    auto m = p.adam_m.values();
    auto v = p.adam_v.values();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double g = grad[i];
      m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g;
      v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      if (options.weight_decay != 0.0) value[i] *= decay;
      value[i] -= lr * m_hat / (std::sqrt(v_hat) + options.epsilon);
    }
    p.zero_grad();
  }
}

Tensor2 glorot_init(std::size_t rows, std::size_t cols, Rng& rng) {
  if (rows == 0 || cols == 0) throw ConfigError("glorot_init requires positive dimensions");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor2 out(rows, cols);
  for (double& v : out.values()) v = rng.uniform(-bound, bound);
  return out;
}

}  // namespace fcgnn
