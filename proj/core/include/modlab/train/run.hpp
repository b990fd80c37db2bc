#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "modlab/model/config.hpp"
#include "modlab/model/method.hpp"
#include "modlab/train/divergence.hpp"
#include "modlab/train/recipe.hpp"

namespace modlab::model {
class Decoder;
}

namespace modlab::train {

struct StepMetrics {
  long step = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // pre-clip
  double lr = 0.0;
  bool operator==(const StepMetrics&) const = default;
};

struct RunRecord {
  std::string method;
  std::string scale = "toy";
  std::uint64_t seed = 0;
  std::vector<StepMetrics> steps;
  std::optional<double> initial_val_loss;
  std::optional<double> final_val_loss;
  bool diverged = false;
  std::optional<long> nan_step;
  Signature signature = Signature::none;

  // One JSON object per logged step, then one footer object.
  std::string to_jsonl() const;
  static RunRecord from_jsonl(const std::string& text);
  bool operator==(const RunRecord&) const = default;
};

struct TrainData {
  std::vector<std::vector<int>> train;
  std::vector<std::vector<int>> validation;
};

// Splits the first `n_validation` packed sequences off as a held-out pack.
TrainData split_validation(std::vector<std::vector<int>> sequences, std::size_t n_validation);

// Test hooks for constructing divergence trajectories.
struct FaultInjection {
  // The loss at this step is replaced by NaN.
  std::optional<long> nan_at_step;
  // Gradients are multiplied by grad_scale(step) before clipping.
  std::function<double(long)> grad_scale;
};

struct TrainOptions {
  std::uint64_t seed = 42;  // model initialization only
  std::string scale = "toy";
  std::size_t monitor_window = 64;
  SignatureThresholds thresholds;
  FaultInjection fault;
  // Called after every logged step.
  std::function<void(const StepMetrics&)> on_step;
  // Called with the trained model when a run completes without diverging.
  std::function<void(const model::Decoder&)> on_complete;
};

// Trains from scratch on `data.train` with the shared recipe. Batches take
// tokens_per_step / seq_len sequences in packed order, cycling. A non-finite
// loss or gradient ends the run: the record is marked diverged with the NaN
// step and the grad-norm signature, and is still returned.
RunRecord train_run(const model::ModelConfig& cfg, const model::MethodSpec& method, const RecipeConfig& recipe,
                    const TrainData& data, const TrainOptions& options = {});

}  // namespace modlab::train
