#pragma once

#include <cstdint>
#include <functional>

#include "fcgnn/param.hpp"

namespace fcgnn {

struct GradCheckOptions {
  double step = 1e-5;
  // Tensors with more entries than this are checked on a random sample of
  // max(1, entries / 100) positions.
  std::size_t full_check_limit = 200;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t entries_checked = 0;
};

// `loss_fn(true)` must compute the loss and accumulate analytic gradients into
// the store; `loss_fn(false)` computes the loss only. The closure must be
// deterministic. Relative error per entry is
// |analytic - fd| / max(|analytic|, |fd|, 1e-8) with central differences.
GradCheckResult grad_check(const std::function<double(bool)>& loss_fn, ParamStore& params,
                           const GradCheckOptions& options = {});

}  // namespace fcgnn
