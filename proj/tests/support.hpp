#pragma once

#include <cmath>
#include <optional>

#include "modlab/model/config.hpp"
#include "modlab/model/method.hpp"
#include "modlab/train/packing.hpp"
#include "modlab/train/run.hpp"

namespace modlab::fixture {

inline train::TrainData toy_data(std::size_t seq_len = 32, std::size_t n_validation = 8) {
  train::SyntheticCorpusOptions so;
  const auto packed = train::pack_corpus(train::synthetic_corpus(so), seq_len);
  return train::split_validation(packed.sequences, n_validation);
}

inline train::RecipeConfig toy_recipe(long total_steps) {
  auto r = train::RecipeConfig::toy();
  r.total_steps = total_steps;
  r.warmup_steps = std::min<long>(r.warmup_steps, total_steps / 4);
  return r;
}

enum class Trajectory { spike, collapse, rise };

// Faults that reproduce the three pre-NaN grad-norm shapes: a 6x jump right
// before the NaN, a NaN out of a quiet stretch, and a doubling ramp.
inline train::FaultInjection make_fault(Trajectory t, long nan_step) {
  train::FaultInjection f;
  f.nan_at_step = nan_step;
  switch (t) {
    case Trajectory::spike:
      f.grad_scale = [nan_step](long s) { return s == nan_step - 1 ? 6.0 : 1.0; };
      break;
    case Trajectory::collapse:
      break;
    case Trajectory::rise:
      f.grad_scale = [nan_step](long s) {
        const long start = nan_step - 12;
        return s >= start && s < nan_step ? std::pow(2.0, static_cast<double>(s - start + 1)) : 1.0;
      };
      break;
  }
  return f;
}

inline train::RunRecord faulted_run(Trajectory t, long nan_step, const train::TrainData& data,
                                    model::MethodTag method = model::MethodTag::baseline) {
  train::TrainOptions opt;
  opt.fault = make_fault(t, nan_step);
  opt.monitor_window = 64;
  return train::train_run(model::ModelConfig::toy(), model::MethodSpec::from_tag(method), toy_recipe(nan_step + 20),
                          data, opt);
}

// First-quarter mean against last-quarter mean of the logged losses.
inline bool loss_trend_decreasing(const train::RunRecord& r) {
  const std::size_t n = r.steps.size();
  if (n < 8) return false;
  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < n / 4; ++i) head += r.steps[i].loss;
  for (std::size_t i = n - n / 4; i < n; ++i) tail += r.steps[i].loss;
  return tail < head;
}

inline bool all_losses_finite(const train::RunRecord& r) {
  for (const auto& s : r.steps) {
    if (!std::isfinite(s.loss)) return false;
  }
  return !r.steps.empty();
}

}  // namespace modlab::fixture
