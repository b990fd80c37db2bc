#include "modlab/train/recipe.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "modlab/errors.hpp"

namespace modlab::train {

void RecipeConfig::validate() const {
  if (!(lr_peak > 0.0)) throw ConfigError("lr_peak must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  if (warmup_steps <= 0 || total_steps <= 0) throw ConfigError("warmup_steps and total_steps must be positive");
  if (warmup_steps >= total_steps) {
    throw ConfigError("warmup_steps (" + std::to_string(warmup_steps) + ") must be below total_steps (" +
                      std::to_string(total_steps) + ")");
  }
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) throw ConfigError("final_lr_fraction must lie in (0, 1]");
  if (tokens_per_step <= 0) throw ConfigError("tokens_per_step must be positive");
  if (log_every <= 0) throw ConfigError("log_every must be positive");
}

RecipeConfig RecipeConfig::toy() {
  RecipeConfig r;
  r.lr_peak = 3e-3;
  r.warmup_steps = 20;
  r.total_steps = 200;
  r.tokens_per_step = 128;
  return r;
}

double lr_at_step(long step, const RecipeConfig& r) {
  if (step < 0 || step > r.total_steps) {
    throw ContractError("step " + std::to_string(step) + " outside [0, " + std::to_string(r.total_steps) + "]");
  }
  if (step <= r.warmup_steps) return r.lr_peak * static_cast<double>(step) / static_cast<double>(r.warmup_steps);
  const double progress =
      static_cast<double>(step - r.warmup_steps) / static_cast<double>(r.total_steps - r.warmup_steps);
  const double floor = r.final_lr_fraction * r.lr_peak;
  return floor + (r.lr_peak - floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adamw_step(ParameterSet& params, AdamState& st, double lr, const RecipeConfig& r) {
  for (const Parameter& p : params) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw DivergenceError("non-finite gradient in " + p.name);
    }
  }
  if (st.m.empty()) {
    for (const Parameter& p : params) {
      st.m.emplace_back(p.tensor.size(), 0.0);
      st.v.emplace_back(p.tensor.size(), 0.0);
    }
  }
  if (st.m.size() != params.size()) throw ContractError("optimizer state does not match the parameter set");
  ++st.t;
  const double bc1 = 1.0 - std::pow(r.beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(r.beta2, static_cast<double>(st.t));
  std::size_t i = 0;
  for (Parameter& p : params) {
    auto w = p.tensor.mutable_values();
    auto g = p.tensor.mutable_grad();
    auto& m = st.m[i];
    auto& v = st.v[i];
    ++i;
    const double decay = p.decay ? 1.0 - lr * r.weight_decay : 1.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = r.beta1 * m[k] + (1.0 - r.beta1) * g[k];
      v[k] = r.beta2 * v[k] + (1.0 - r.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      w[k] = w[k] * decay - lr * mhat / (std::sqrt(vhat) + r.adam_eps);
    }
  }
}

double global_grad_norm(std::span<const Tensor> tensors) {
  double ss = 0.0;
  for (const Tensor& t : tensors) {
    for (double g : t.grad()) ss += g * g;
  }
  return std::sqrt(ss);
}

double clip_grad(std::span<const Tensor> tensors, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad: max_norm must be positive");
  const double norm = global_grad_norm(tensors);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (const Tensor& t : tensors) {
      for (double& g : t.mutable_grad()) g *= s;
    }
  }
  return norm;
}

double clip_grad(ParameterSet& params, double max_norm) {
  const auto ts = params.tensors();
  return clip_grad(ts, max_norm);
}

}  // namespace modlab::train
