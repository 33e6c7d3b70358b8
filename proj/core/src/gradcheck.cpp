#include "fcgnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fcgnn/rng.hpp"

namespace fcgnn {

GradCheckResult grad_check(const std::function<double(bool)>& loss_fn, ParamStore& params,
                           const GradCheckOptions& options) {
  GradCheckResult result;
  if (params.size() == 0) return result;

  params.zero_grad();
  loss_fn(true);
  std::vector<Tensor2> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params.all()) analytic.push_back(p.grad);
  params.zero_grad();

  Rng rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param& p = params[pi];
    const std::size_t count = p.value.size();
    std::vector<std::size_t> positions(count);
    std::iota(positions.begin(), positions.end(), std::size_t{0});
    if (count > options.full_check_limit) {
      rng.shuffle(std::span<std::size_t>(positions));
      positions.resize(std::max<std::size_t>(1, count / 100));
    }
    for (std::size_t idx : positions) {
      double& slot = p.value.values()[idx];
      const double original = slot;
      slot = original + options.step;
      const double plus = loss_fn(false);
      slot = original - options.step;
      const double minus = loss_fn(false);
      slot = original;
      const double fd = (plus - minus) / (2.0 * options.step);
      const double an = analytic[pi].values()[idx];
      const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(an - fd) / denom);
      ++result.entries_checked;
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace fcgnn
