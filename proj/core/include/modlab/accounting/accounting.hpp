#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "modlab/model/config.hpp"
#include "modlab/model/method.hpp"

namespace modlab::acct {

// Three-term decomposition of one layer's forward cost.
struct LayerFlops {
  std::int64_t attn_score = 0;  // 2 s^2 d, per sequence
  std::int64_t attn_proj = 0;   // 2 (2 d^2 + 2 d d_kv), per token
  std::int64_t ffn = 0;         // 2 k_ffn d d_inter, per token
};

struct CostBreakdown {
  std::int64_t params_total = 0;
  // embeddings, attention, ffn, norms, method_extras
  std::map<std::string, std::int64_t> params_by_component;

  LayerFlops layer;
  std::int64_t flops_per_sequence = 0;  // forward only, summed over layers
  std::int64_t flops_per_step = 0;      // x3, scaled to batch_tokens
  // Per-step contributions of attn_score / attn_proj / ffn; they sum to flops_per_step.
  std::map<std::string, std::int64_t> flops_by_term;
  // Operation-level work outside the three-term model (gate projection,
  // skipped output-projection slices), per step. Reported, never folded in.
  std::int64_t extra_flops_per_step = 0;
};

// k_ffn: 3 for gated FFNs, 2 for relu_squared.
int k_ffn(model::FfnKind kind);

// Exact parameter count of the decoder built for (cfg, method).
CostBreakdown count_params(const model::ModelConfig& cfg, const model::MethodSpec& method);
// Per-step training FLOPs; also fills the parameter fields.
CostBreakdown step_flops(const model::ModelConfig& cfg, const model::MethodSpec& method, std::int64_t batch_tokens);

struct DeltaRow {
  model::MethodTag method;
  model::Category category;
  std::int64_t params = 0;
  double delta_params_pct = 0.0;
  double delta_flops_pct = 0.0;
  double extra_flops_pct = 0.0;  // operation-level extras vs baseline step FLOPs
};

// Rows in canonical order; the baseline is always included and is the reference.
std::vector<DeltaRow> delta_table(std::span<const model::MethodTag> methods, const model::ModelConfig& cfg,
                                  std::int64_t batch_tokens);
std::vector<DeltaRow> delta_table(const model::ModelConfig& cfg, std::int64_t batch_tokens);

// Aligned text, percentages to two decimals, params in billions.
std::string format_delta_text(std::span<const DeltaRow> rows);
// method,category,params,delta_p_pct,delta_f_pct
std::string format_delta_csv(std::span<const DeltaRow> rows);

}  // namespace modlab::acct
