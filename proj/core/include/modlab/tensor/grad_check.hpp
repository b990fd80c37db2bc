#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "modlab/tensor/tensor.hpp"

namespace modlab {

struct GradCheckOptions {
  double h = 1e-5;
  // Coordinates sampled per tensor; tensors at or below this size are checked exhaustively.
  std::size_t coords_per_tensor = 8;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

// Compares reverse-mode gradients of a scalar objective with central
// differences. `objective` must rebuild the graph from the current values of
// `inputs` on every call. Relative error per coordinate is
// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
GradCheckResult grad_check(const std::function<Tensor()>& objective, std::span<const Tensor> inputs,
                           const GradCheckOptions& options = {});

}  // namespace modlab
