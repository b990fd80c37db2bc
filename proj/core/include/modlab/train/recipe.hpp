#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "modlab/tensor/parameter.hpp"

namespace modlab::train {

// One optimizer recipe shared by every method.
struct RecipeConfig {
  double lr_peak = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.95;
  double adam_eps = 1e-8;
  double weight_decay = 0.1;
  double clip_norm = 1.0;
  long warmup_steps = 2000;
  long total_steps = 44000;
  double final_lr_fraction = 0.1;
  long tokens_per_step = 128;
  // Metrics are logged every `log_every` steps (and always at the last step).
  long log_every = 1;

  void validate() const;
  // Desk-scale recipe for toy runs: same shape, shorter and hotter.
  static RecipeConfig toy();
};

// Linear warmup from 0 to lr_peak, then cosine decay to
// final_lr_fraction * lr_peak exactly at total_steps.
double lr_at_step(long step, const RecipeConfig& r);

struct AdamState {
  long t = 0;
  std::vector<std::vector<double>> m, v;
};

// Decoupled AdamW on every parameter: decay-flagged parameters are first
// scaled by (1 - lr * wd), then moved by lr * m_hat / (sqrt(v_hat) + eps).
// Throws DivergenceError (leaving parameters and state untouched) if any
// gradient is not finite.
void adamw_step(ParameterSet& params, AdamState& state, double lr, const RecipeConfig& r);

// Scales all gradients by max_norm / norm when the global L2 norm exceeds
// max_norm. Returns the pre-clip norm.
double clip_grad(std::span<const Tensor> tensors, double max_norm);
double clip_grad(ParameterSet& params, double max_norm);
double global_grad_norm(std::span<const Tensor> tensors);

}  // namespace modlab::train
