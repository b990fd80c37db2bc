#include "modlab/model/method.hpp"

#include <array>
#include <cmath>

#include "modlab/errors.hpp"

namespace modlab::model {

namespace {

struct Row {
  MethodTag tag;
  std::string_view name;
  std::string_view display;
  Category category;
  Mixing mixing;
  AttnStructure structure;
  bool qk_norm;
  FfnKind ffn;
  NormPlacement norm;
  ResidualKind residual;
};

using enum MethodTag;
using M = Mixing;
using A = AttnStructure;
using F = FfnKind;
using N = NormPlacement;
using R = ResidualKind;

constexpr std::array<Row, 20> kTable{{
    {baseline, "baseline", "Baseline", Category::ref, M::softmax, A::plain, false, F::swiglu, N::pre, R::identity},
    {softpick, "softpick", "Softpick", Category::attention, M::softpick, A::plain, false, F::swiglu, N::pre, R::identity},
    {qknorm, "qknorm", "QK-Norm", Category::attention, M::softmax, A::plain, true, F::swiglu, N::pre, R::identity},
    {selective_attn, "selective_attn", "Selective Attention", Category::attention, M::softmax, A::selective, false, F::swiglu, N::pre, R::identity},
    {selective_qknorm, "selective_qknorm", "Selective + QK-Norm", Category::attention, M::softmax, A::selective, true, F::swiglu, N::pre, R::identity},
    {value_residual, "value_residual", "Value-Residual", Category::attention, M::softmax, A::value_residual, false, F::swiglu, N::pre, R::identity},
    {diff_attn, "diff_attn", "Diff-Attn", Category::attention, M::softmax, A::diff, false, F::swiglu, N::pre, R::identity},
    {sigmoid_attn, "sigmoid_attn", "Sigmoid Attention", Category::attention, M::sigmoid, A::plain, false, F::swiglu, N::pre, R::identity},
    {ssmax, "ssmax", "SSMax", Category::attention, M::ssmax, A::plain, false, F::swiglu, N::pre, R::identity},
    {softmax_cap, "softmax_cap", "Softmax-Cap", Category::attention, M::cap, A::plain, false, F::swiglu, N::pre, R::identity},
    {gated_attn_qknorm, "gated_attn_qknorm", "Gated + QK-Norm", Category::attention, M::softmax, A::gated, true, F::swiglu, N::pre, R::identity},
    {geglu_ffn, "geglu_ffn", "GeGLU", Category::ffn, M::softmax, A::plain, false, F::geglu, N::pre, R::identity},
    {qknorm_geglu, "qknorm_geglu", "QK-Norm + GeGLU", Category::ffn, M::softmax, A::plain, true, F::geglu, N::pre, R::identity},
    {relu_squared, "relu_squared", "ReLU^2", Category::ffn, M::softmax, A::plain, false, F::relu_squared, N::pre, R::identity},
    {sandwich_norm, "sandwich_norm", "Sandwich Norm", Category::norm, M::softmax, A::plain, false, F::swiglu, N::sandwich, R::identity},
    {hybrid_norm, "hybrid_norm", "HybridNorm", Category::norm, M::softmax, A::plain, false, F::swiglu, N::hybrid, R::identity},
    {denseformer, "denseformer", "DenseFormer", Category::residual, M::softmax, A::plain, false, F::swiglu, N::pre, R::denseformer},
    {layerscale, "layerscale", "LayerScale", Category::residual, M::softmax, A::plain, false, F::swiglu, N::pre, R::layerscale},
    {hyper, "hyper", "HyperConnections", Category::residual, M::softmax, A::plain, false, F::swiglu, N::pre, R::hyper},
    {attnres, "attnres", "AttnRes", Category::residual, M::softmax, A::plain, false, F::swiglu, N::pre, R::attnres},
}};

constexpr std::array<MethodTag, 20> kOrder = [] {
  std::array<MethodTag, 20> out{};
  for (std::size_t i = 0; i < kTable.size(); ++i) out[i] = kTable[i].tag;
  return out;
}();

const Row& row(MethodTag tag) { return kTable[static_cast<std::size_t>(tag)]; }

}  // namespace

MethodSpec MethodSpec::from_tag(MethodTag tag) {
  const Row& r = row(tag);
  MethodSpec s;
  s.tag = tag;
  s.mixing = r.mixing;
  s.structure = r.structure;
  s.qk_norm = r.qk_norm;
  s.ffn = r.ffn;
  s.norm = r.norm;
  s.residual = r.residual;
  return s;
}

MethodSpec MethodSpec::parse(std::string_view name) {
  auto tag = parse_tag(name);
  if (!tag) throw ConfigError("unknown method tag: " + std::string(name));
  return from_tag(*tag);
}

std::string_view MethodSpec::name() const { return row(tag).name; }
Category MethodSpec::category() const { return row(tag).category; }

std::optional<SoftHard> MethodSpec::soft_hard() const {
  if (category() != Category::attention) return std::nullopt;
  // Hard: the mixing weights stop being a row-stochastic softmax output.
  const bool hard = mixing == Mixing::softpick || mixing == Mixing::sigmoid || structure == AttnStructure::diff;
  return hard ? SoftHard::hard : SoftHard::soft;
}

std::size_t MethodSpec::mask_heads(std::size_t n_heads) const {
  if (structure != AttnStructure::selective) return 0;
  const std::size_t m = params.mask_heads ? params.mask_heads : std::max<std::size_t>(1, n_heads / 4);
  if (m >= n_heads) {
    throw ConfigError("selective attention needs fewer masking heads (" + std::to_string(m) + ") than heads (" +
                      std::to_string(n_heads) + ")");
  }
  return m;
}

std::span<const MethodTag> all_methods() { return kOrder; }

std::string_view to_string(MethodTag tag) { return row(tag).name; }
std::string_view display_name(MethodTag tag) { return row(tag).display; }

std::string_view to_string(Category c) {
  switch (c) {
    case Category::ref: return "ref";
    case Category::attention: return "attention";
    case Category::ffn: return "ffn";
    case Category::norm: return "norm";
    case Category::residual: return "residual";
  }
  return "?";
}

std::string_view to_string(SoftHard s) { return s == SoftHard::soft ? "soft" : "hard"; }

std::optional<MethodTag> parse_tag(std::string_view name) {
  for (const auto& r : kTable) {
    if (r.name == name) return r.tag;
  }
  return std::nullopt;
}

double diff_lambda_init(std::size_t layer) {
  if (layer == 0) throw ContractError("diff_lambda_init takes a 1-based layer index");
  return 0.8 - 0.6 * std::exp(-0.3 * (static_cast<double>(layer) - 1.0));
}

}  // namespace modlab::model
