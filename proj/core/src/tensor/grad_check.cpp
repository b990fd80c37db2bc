#include "modlab/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "modlab/errors.hpp"

namespace modlab {

GradCheckResult grad_check(const std::function<Tensor()>& objective, std::span<const Tensor> inputs,
                           const GradCheckOptions& options) {
  if (!(options.h >= 1e-7 && options.h <= 1e-3)) {
    throw ContractError("grad_check step h must lie in [1e-7, 1e-3]");
  }
  for (const auto& t : inputs) {
    if (!t.is_leaf() || !t.requires_grad()) throw ContractError("grad_check inputs must be variable leaves");
    t.zero_grad();
  }
  Tensor out = objective();
  if (out.size() != 1) {
    throw ContractError("grad_check needs a scalar objective, got " + shape_to_string(out.shape()));
  }
  out.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& t : inputs) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    analytic.back().resize(t.size(), 0.0);
  }

  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    const Tensor& t = inputs[ti];
    std::vector<std::size_t> coords(t.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (coords.size() > options.coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_tensor);
    }
    auto values = t.mutable_values();
    for (std::size_t idx : coords) {
      const double orig = values[idx];
      values[idx] = orig + options.h;
      const double fp = objective().item();
      values[idx] = orig - options.h;
      const double fm = objective().item();
      values[idx] = orig;
      const double numeric = (fp - fm) / (2.0 * options.h);
      const double a = analytic[ti][idx];
      const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
      ++result.coords_checked;
      if (!(rel <= result.max_rel_error)) {
        result.max_rel_error = std::isnan(rel) ? INFINITY : rel;
        result.worst_tensor = ti;
        result.worst_index = idx;
        result.worst_analytic = a;
        result.worst_numeric = numeric;
      }
    }
  }
  for (const auto& t : inputs) t.zero_grad();
  return result;
}

}  // namespace modlab
