#include "modlab/accounting/accounting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "modlab/errors.hpp"
#include "modlab/model/layers.hpp"

namespace modlab::acct {

using model::AttnStructure;
using model::FfnKind;
using model::Mixing;
using model::NormPlacement;
using model::ResidualKind;

namespace {

using i64 = std::int64_t;

i64 mul(i64 a, i64 b) {
  i64 r;
  if (__builtin_mul_overflow(a, b, &r)) throw ContractError("FLOPs count overflows 64-bit integers");
  return r;
}

i64 mul(std::initializer_list<i64> xs) {
  i64 r = 1;
  for (i64 x : xs) r = mul(r, x);
  return r;
}

i64 sum_values(const std::map<std::string, i64>& m) {
  i64 s = 0;
  for (const auto& [_, v] : m) s += v;
  return s;
}

}  // namespace

int k_ffn(FfnKind kind) { return static_cast<int>(model::ffn_matrices(kind)); }

CostBreakdown count_params(const model::ModelConfig& cfg, const model::MethodSpec& method) {
  cfg.validate();
  const i64 L = static_cast<i64>(cfg.n_layers);
  const i64 d = static_cast<i64>(cfg.d_model);
  const i64 dh = static_cast<i64>(cfg.d_head());
  const i64 H = static_cast<i64>(cfg.n_heads);
  const i64 dkv = static_cast<i64>(cfg.d_kv());
  const i64 A = H - static_cast<i64>(method.mask_heads(cfg.n_heads));
  const i64 width = static_cast<i64>(model::ffn_width(method.ffn, cfg.d_inter, method.params.relu_squared_width));

  CostBreakdown c;
  auto& p = c.params_by_component;
  p["embeddings"] = static_cast<i64>(cfg.vocab) * d * (cfg.tied_embeddings ? 1 : 2);
  p["attention"] = L * (d * H * dh + 2 * d * dkv + A * dh * d);
  p["ffn"] = L * k_ffn(method.ffn) * d * width;
  p["norms"] = L * 2 * d + d;

  i64 extra = 0;
  if (method.qk_norm) extra += L * 2 * dh;
  switch (method.structure) {
    case AttnStructure::gated: extra += L * d * H; break;
    case AttnStructure::diff: extra += L * (1 + A * dh); break;
    case AttnStructure::value_residual: extra += L - 1; break;
    default: break;
  }
  if (method.mixing == Mixing::sigmoid) extra += L;
  if (method.mixing == Mixing::ssmax) extra += L * H;
  if (method.norm == NormPlacement::sandwich) extra += L * 2 * d;
  if (method.norm == NormPlacement::hybrid) extra += L * d;
  switch (method.residual) {
    case ResidualKind::denseformer: extra += L * (L + 1) / 2; break;
    case ResidualKind::layerscale: extra += L * 2 * d; break;
    case ResidualKind::hyper: extra += L * 4; break;
    case ResidualKind::attnres: extra += L * 2 * d; break;
    case ResidualKind::identity: break;
  }
  p["method_extras"] = extra;
  c.params_total = sum_values(p);
  return c;
}

CostBreakdown step_flops(const model::ModelConfig& cfg, const model::MethodSpec& method, i64 batch_tokens) {
  if (batch_tokens <= 0) throw ContractError("batch_tokens must be positive");
  CostBreakdown c = count_params(cfg, method);
  const i64 L = static_cast<i64>(cfg.n_layers);
  const i64 s = static_cast<i64>(cfg.context);
  const i64 d = static_cast<i64>(cfg.d_model);
  const i64 dkv = static_cast<i64>(cfg.d_kv());
  const i64 width = static_cast<i64>(model::ffn_width(method.ffn, cfg.d_inter, method.params.relu_squared_width));

  c.layer.attn_score = mul({2, s, s, d});
  c.layer.attn_proj = mul(2, mul(2, mul(d, d)) + mul({2, d, dkv}));
  c.layer.ffn = mul({2, k_ffn(method.ffn), d, width});
  c.flops_per_sequence = mul(L, c.layer.attn_score + mul(s, c.layer.attn_proj + c.layer.ffn));

  // Per token, the score term is 2 s d per layer (2 s^2 d spread over s tokens).
  c.flops_by_term["attn_score"] = mul({3, L, 2, s, d, batch_tokens});
  c.flops_by_term["attn_proj"] = mul({3, L, c.layer.attn_proj, batch_tokens});
  c.flops_by_term["ffn"] = mul({3, L, c.layer.ffn, batch_tokens});
  c.flops_per_step = sum_values(c.flops_by_term);

  i64 extra_per_token = 0;
  if (method.structure == AttnStructure::gated) extra_per_token += 2 * d * static_cast<i64>(cfg.n_heads);
  const i64 m = static_cast<i64>(method.mask_heads(cfg.n_heads));
  if (m > 0) extra_per_token -= 2 * m * static_cast<i64>(cfg.d_head()) * d;
  c.extra_flops_per_step = mul({3, L, extra_per_token, batch_tokens});
  return c;
}

std::vector<DeltaRow> delta_table(std::span<const model::MethodTag> methods, const model::ModelConfig& cfg,
                                  i64 batch_tokens) {
  const auto base = step_flops(cfg, model::MethodSpec::from_tag(model::MethodTag::baseline), batch_tokens);
  std::vector<model::MethodTag> tags(methods.begin(), methods.end());
  if (std::find(tags.begin(), tags.end(), model::MethodTag::baseline) == tags.end()) {
    tags.push_back(model::MethodTag::baseline);
  }
  std::sort(tags.begin(), tags.end());
  tags.erase(std::unique(tags.begin(), tags.end()), tags.end());

  std::vector<DeltaRow> rows;
  for (auto tag : tags) {
    const auto spec = model::MethodSpec::from_tag(tag);
    const auto c = step_flops(cfg, spec, batch_tokens);
    DeltaRow r;
    r.method = tag;
    r.category = spec.category();
    r.params = c.params_total;
    r.delta_params_pct = 100.0 * static_cast<double>(c.params_total - base.params_total) /
                         static_cast<double>(base.params_total);
    r.delta_flops_pct = 100.0 * static_cast<double>(c.flops_per_step - base.flops_per_step) /
                        static_cast<double>(base.flops_per_step);
    r.extra_flops_pct = 100.0 * static_cast<double>(c.extra_flops_per_step) / static_cast<double>(base.flops_per_step);
    rows.push_back(r);
  }
  return rows;
}

std::vector<DeltaRow> delta_table(const model::ModelConfig& cfg, i64 batch_tokens) {
  return delta_table(model::all_methods(), cfg, batch_tokens);
}

namespace {

std::string pct(double v) {
  // Round half away from zero at two decimals; never print -0.00.
  char buf[32];
  double r = std::round(v * 100.0) / 100.0;
  if (r == 0.0) r = 0.0;
  std::snprintf(buf, sizeof buf, "%+.2f%%", r);
  return buf;
}

}  // namespace

std::string format_delta_text(std::span<const DeltaRow> rows) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %-10s %10s %9s %9s   %s\n", "Method", "Category", "Params", "dP", "dF",
                "op-level extra dF");
  os << line;
  for (const auto& r : rows) {
    char params[32];
    std::snprintf(params, sizeof params, "%.3f B", static_cast<double>(r.params) / 1e9);
    std::snprintf(line, sizeof line, "%-20s %-10s %10s %9s %9s   %s\n", std::string(model::to_string(r.method)).c_str(),
                  std::string(model::to_string(r.category)).c_str(), params, pct(r.delta_params_pct).c_str(),
                  pct(r.delta_flops_pct).c_str(), r.extra_flops_pct == 0.0 ? "" : pct(r.extra_flops_pct).c_str());
    os << line;
  }
  return os.str();
}

std::string format_delta_csv(std::span<const DeltaRow> rows) {
  std::ostringstream os;
  os << "method,category,params,delta_p_pct,delta_f_pct\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f,%.2f", std::round(r.delta_params_pct * 100.0) / 100.0 + 0.0,
                  std::round(r.delta_flops_pct * 100.0) / 100.0 + 0.0);
    os << model::to_string(r.method) << ',' << model::to_string(r.category) << ',' << r.params << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace modlab::acct
