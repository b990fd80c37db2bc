#include "modlab/train/run.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>

#include "modlab/errors.hpp"
#include "modlab/model/decoder.hpp"

namespace modlab::train {

using nlohmann::json;

namespace {

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

double validation_loss(const model::Decoder& model, const std::vector<std::vector<int>>& val) {
  if (val.empty()) return std::nan("");
  return model.loss(std::span<const std::vector<int>>(val)).item();
}

}  // namespace

std::string RunRecord::to_jsonl() const {
  std::ostringstream os;
  for (const auto& s : steps) {
    os << json{{"step", s.step}, {"loss", s.loss}, {"grad_norm_pre_clip", s.grad_norm}, {"lr", s.lr}}.dump() << '\n';
  }
  json footer = {{"footer", true},
                 {"method", method},
                 {"scale", scale},
                 {"seed", seed},
                 {"initial_val_loss", opt_json(initial_val_loss)},
                 {"final_val_loss", opt_json(final_val_loss)},
                 {"diverged", diverged},
                 {"nan_step", opt_json(nan_step)},
                 {"signature", std::string(to_string(signature))}};
  os << footer.dump() << '\n';
  return os.str();
}

RunRecord RunRecord::from_jsonl(const std::string& text) {
  RunRecord r;
  std::istringstream is(text);
  std::string line;
  bool footer_seen = false;
  try {
    while (std::getline(is, line)) {
      if (line.empty()) continue;
      if (footer_seen) throw ContractError("metrics stream has records after the footer");
      const json j = json::parse(line);
      if (j.value("footer", false)) {
        footer_seen = true;
        r.method = j.at("method");
        r.scale = j.at("scale");
        r.seed = j.at("seed");
        r.initial_val_loss = opt_from<double>(j, "initial_val_loss");
        r.final_val_loss = opt_from<double>(j, "final_val_loss");
        r.diverged = j.at("diverged");
        r.nan_step = opt_from<long>(j, "nan_step");
        const auto sig = parse_signature(j.at("signature").get<std::string>());
        if (!sig) throw ContractError("unknown signature in metrics footer");
        r.signature = *sig;
        continue;
      }
      r.steps.push_back({j.at("step"), j.at("loss"), j.at("grad_norm_pre_clip"), j.at("lr")});
    }
  } catch (const json::exception& e) {
    throw ContractError(std::string("malformed metrics stream: ") + e.what());
  }
  if (!footer_seen) throw ContractError("metrics stream has no footer");
  return r;
}

TrainData split_validation(std::vector<std::vector<int>> sequences, std::size_t n_validation) {
  if (n_validation >= sequences.size()) {
    throw ConfigError("validation pack (" + std::to_string(n_validation) + ") leaves no training sequences out of " +
                      std::to_string(sequences.size()));
  }
  TrainData d;
  d.validation.assign(sequences.begin(), sequences.begin() + static_cast<std::ptrdiff_t>(n_validation));
  d.train.assign(sequences.begin() + static_cast<std::ptrdiff_t>(n_validation), sequences.end());
  return d;
}

RunRecord train_run(const model::ModelConfig& cfg, const model::MethodSpec& method, const RecipeConfig& recipe,
                    const TrainData& data, const TrainOptions& opt) {
  recipe.validate();
  if (data.train.empty()) throw ContractError("train_run: no training sequences");
  const std::size_t seq_len = data.train.front().size();
  for (const auto& s : data.train) {
    if (s.size() != seq_len) throw ContractError("train_run: packed sequences differ in length");
  }
  if (static_cast<std::size_t>(recipe.tokens_per_step) % seq_len != 0) {
    throw ConfigError("tokens_per_step (" + std::to_string(recipe.tokens_per_step) +
                      ") is not a multiple of the sequence length (" + std::to_string(seq_len) + ")");
  }
  const std::size_t batch = static_cast<std::size_t>(recipe.tokens_per_step) / seq_len;

  model::Decoder model(cfg, method, opt.seed);
  AdamState adam;
  DivergenceSignal monitor(opt.monitor_window);

  RunRecord rec;
  rec.method = std::string(method.name());
  rec.scale = opt.scale;
  rec.seed = opt.seed;
  rec.initial_val_loss = validation_loss(model, data.validation);
  if (rec.initial_val_loss && std::isnan(*rec.initial_val_loss)) rec.initial_val_loss.reset();

  auto diverge = [&](long step) {
    rec.diverged = true;
    rec.nan_step = step;
    monitor.nan_step = step;
    auto window = monitor.values();
    window.push_back(std::nan(""));
    std::size_t finite = 0;
    for (double v : window) finite += std::isfinite(v);
    monitor.signature = finite >= 2 ? classify_signature(window, opt.thresholds) : Signature::none;
    rec.signature = monitor.signature;
  };

  std::size_t cursor = 0;
  std::vector<std::vector<int>> mb(batch);
  for (long step = 1; step <= recipe.total_steps; ++step) {
    for (auto& s : mb) {
      s = data.train[cursor];
      cursor = (cursor + 1) % data.train.size();
    }
    const double lr = lr_at_step(step, recipe);
    model.params().zero_grad();

    double loss_value;
    double norm;
    try {
      Tensor loss = model.loss(std::span<const std::vector<int>>(mb));
      loss_value = loss.item();
      if (opt.fault.nan_at_step && *opt.fault.nan_at_step == step) loss_value = std::nan("");
      if (!std::isfinite(loss_value)) {
        diverge(step);
        return rec;
      }
      loss.backward();
      if (opt.fault.grad_scale) {
        const double gs = opt.fault.grad_scale(step);
        for (Parameter& p : model.params()) {
          for (double& g : p.tensor.mutable_grad()) g *= gs;
        }
      }
      norm = clip_grad(model.params(), recipe.clip_norm);
      if (!std::isfinite(norm)) {
        diverge(step);
        return rec;
      }
      adamw_step(model.params(), adam, lr, recipe);
    } catch (const DivergenceError&) {
      diverge(step);
      return rec;
    }

    if (step % recipe.log_every == 0 || step == recipe.total_steps) {
      StepMetrics m{step, loss_value, norm, lr};
      rec.steps.push_back(m);
      monitor.record(step, norm);
      if (opt.on_step) opt.on_step(m);
    }
  }

  const double val = validation_loss(model, data.validation);
  if (std::isfinite(val)) rec.final_val_loss = val;
  if (monitor.window.size() >= 2) rec.signature = classify_signature(monitor.values(), opt.thresholds);
  if (opt.on_complete) opt.on_complete(model);
  return rec;
}

}  // namespace modlab::train
