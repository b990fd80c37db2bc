#include <cmath>

#include <gtest/gtest.h>

#include "modlab/accounting/accounting.hpp"
#include "modlab/errors.hpp"
#include "modlab/model/decoder.hpp"

using namespace modlab;
using namespace modlab::model;

namespace {

// Weight matrices and norm vectors of a Llama-style block written out one by
// one, kept apart from the library's own formula.
std::int64_t hand_count_llama(std::int64_t L, std::int64_t d, std::int64_t H, std::int64_t kv, std::int64_t inter,
                              std::int64_t vocab) {
  const std::int64_t dh = d / H;
  const std::int64_t wq = d * (H * dh), wk = d * (kv * dh), wv = d * (kv * dh), wo = (H * dh) * d;
  const std::int64_t gate = d * inter, up = d * inter, down = inter * d;
  const std::int64_t norms = d + d;
  const std::int64_t per_layer = wq + wk + wv + wo + gate + up + down + norms;
  return vocab * d + L * per_layer + d;
}

ModelConfig tiny() {
  ModelConfig c;
  c.n_layers = 1;
  c.d_model = 4;
  c.n_heads = 2;
  c.n_kv_heads = 2;
  c.d_inter = 8;
  c.context = 2;
  c.vocab = 5;
  return c;
}

}  // namespace

TEST(Params, Baseline1p2bMatchesHandCount) {
  const auto cfg = ModelConfig::llama_1p2b();
  const auto c = acct::count_params(cfg, MethodSpec{});
  EXPECT_EQ(c.params_total, hand_count_llama(24, 2048, 32, 8, 5632, 65664));
  EXPECT_EQ(c.params_total, 1216710656);
  EXPECT_LT(std::fabs(static_cast<double>(c.params_total) - 1.217e9) / 1.217e9, 0.005);
  std::int64_t parts = 0;
  for (const auto& [_, v] : c.params_by_component) parts += v;
  EXPECT_EQ(parts, c.params_total);
}

TEST(Params, DenseFormerAddsExactly300AtTwentyFourLayers) {
  const auto cfg = ModelConfig::llama_1p2b();
  const auto base = acct::count_params(cfg, MethodSpec{}).params_total;
  const auto dense = acct::count_params(cfg, MethodSpec::from_tag(MethodTag::denseformer)).params_total;
  EXPECT_EQ(dense - base, 300);
  EXPECT_EQ(dense - base, 24 * 25 / 2);
}

TEST(Params, MethodExtrasAt1p2b) {
  const auto cfg = ModelConfig::llama_1p2b();
  const auto base = acct::count_params(cfg, MethodSpec{}).params_total;
  auto extra = [&](MethodTag t) { return acct::count_params(cfg, MethodSpec::from_tag(t)).params_total - base; };
  EXPECT_EQ(extra(MethodTag::softpick), 0);
  EXPECT_EQ(extra(MethodTag::qknorm), 24 * 2 * 64);
  EXPECT_EQ(extra(MethodTag::layerscale), 24 * 2 * 2048);
  EXPECT_EQ(extra(MethodTag::sandwich_norm), 24 * 2 * 2048);
  EXPECT_EQ(extra(MethodTag::hyper), 24 * 4);
  EXPECT_EQ(extra(MethodTag::gated_attn_qknorm), 24 * (2048 * 32 + 2 * 64));
  // A quarter of the heads only produce masks: their O-projection rows are gone.
  EXPECT_EQ(extra(MethodTag::selective_attn), -24 * 8 * 64 * 2048);
  EXPECT_EQ(extra(MethodTag::relu_squared), 24 * (2 * 2048 * 8448 - 3 * 2048 * 5632));
}

TEST(Params, AccountantAgreesWithConstructedDecoders) {
  ModelConfig cfg = ModelConfig::toy();
  for (bool tied : {true, false}) {
    cfg.tied_embeddings = tied;
    for (MethodTag t : all_methods()) {
      const auto spec = MethodSpec::from_tag(t);
      Decoder m(cfg, spec, 1);
      EXPECT_EQ(acct::count_params(cfg, spec).params_total, static_cast<std::int64_t>(m.params().total_elements()))
          << to_string(t) << (tied ? " tied" : " untied");
    }
  }
}

TEST(Flops, TinyConfigHandDerivation) {
  // s=2, d=4, d_kv=4, d_inter=8, k=3, one layer:
  // score 2 s^2 d = 32; proj 2 (2 d^2 + 2 d d_kv) = 128; ffn 2 k d d_inter = 192;
  // per sequence (32 + 2 (128 + 192)) x 3 = 2016.
  const auto c = acct::step_flops(tiny(), MethodSpec{}, 2);
  EXPECT_EQ(c.layer.attn_score, 32);
  EXPECT_EQ(c.layer.attn_proj, 128);
  EXPECT_EQ(c.layer.ffn, 192);
  EXPECT_EQ(c.flops_per_step, 2016);
  std::int64_t parts = 0;
  for (const auto& [_, v] : c.flops_by_term) parts += v;
  EXPECT_EQ(parts, c.flops_per_step);
}

TEST(Flops, ScalesLinearlyInSequences) {
  const auto one = acct::step_flops(tiny(), MethodSpec{}, 2).flops_per_step;
  EXPECT_EQ(acct::step_flops(tiny(), MethodSpec{}, 8).flops_per_step, 4 * one);
  EXPECT_THROW(acct::step_flops(tiny(), MethodSpec{}, 0), ContractError);
}

TEST(Flops, ReluSquaredFfnEqualsSwiglu) {
  const auto cfg = ModelConfig::llama_1p2b();
  const auto a = acct::step_flops(cfg, MethodSpec{}, 1024);
  const auto b = acct::step_flops(cfg, MethodSpec::from_tag(MethodTag::relu_squared), 1024);
  EXPECT_EQ(a.layer.ffn, b.layer.ffn);
  EXPECT_EQ(a.flops_by_term.at("ffn"), b.flops_by_term.at("ffn"));
}

TEST(Flops, AllDeltasWithinPointThirteenPercent) {
  const auto rows = acct::delta_table(ModelConfig::llama_1p2b(), 1024);
  ASSERT_EQ(rows.size(), 20u);
  for (const auto& r : rows) EXPECT_LE(std::fabs(r.delta_flops_pct), 0.13) << to_string(r.method);
}

TEST(Flops, GateExtraIsReportedSeparately) {
  const auto cfg = ModelConfig::llama_1p2b();
  const auto base = acct::step_flops(cfg, MethodSpec{}, 1024);
  const auto gated = acct::step_flops(cfg, MethodSpec::from_tag(MethodTag::gated_attn_qknorm), 1024);
  EXPECT_EQ(gated.flops_per_step, base.flops_per_step);
  // d x H gate projection, forward + backward, every token and layer.
  EXPECT_EQ(gated.extra_flops_per_step, std::int64_t{3} * 2 * 2048 * 32 * 1024 * 24);
}

TEST(DeltaTable, FormatsAndOrder) {
  const auto rows = acct::delta_table(ModelConfig::llama_1p2b(), 1024);
  EXPECT_EQ(rows.front().method, MethodTag::baseline);
  const auto csv = acct::format_delta_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "method,category,params,delta_p_pct,delta_f_pct");
  EXPECT_NE(csv.find("selective_attn,attention,1191544832,-2.07,0.00"), std::string::npos);
  const auto text = acct::format_delta_text(rows);
  EXPECT_NE(text.find("1.217 B"), std::string::npos);
}
