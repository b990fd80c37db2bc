#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace modlab::model {

// The reference decoder plus the nineteen modifications, in the canonical
// report order.
enum class MethodTag {
  baseline,
  softpick,
  qknorm,
  selective_attn,
  selective_qknorm,
  value_residual,
  diff_attn,
  sigmoid_attn,
  ssmax,
  softmax_cap,
  gated_attn_qknorm,
  geglu_ffn,
  qknorm_geglu,
  relu_squared,
  sandwich_norm,
  hybrid_norm,
  denseformer,
  layerscale,
  hyper,
  attnres,
};

enum class Mixing { softmax, softpick, sigmoid, ssmax, cap };
enum class AttnStructure { plain, selective, diff, value_residual, gated };
enum class FfnKind { swiglu, geglu, relu_squared };
enum class NormPlacement { pre, sandwich, hybrid };
enum class ResidualKind { identity, denseformer, layerscale, hyper, attnres };
enum class Category { ref, attention, ffn, norm, residual };
enum class SoftHard { soft, hard };

// Method-specific constants and initial values.
struct MethodParams {
  double sigmoid_bias_init = 0.0;
  double ssmax_logit_init = 0.0;
  double ssmax_offset = 0.5;
  double cap = 50.0;
  // Masking heads for selective attention; 0 selects max(1, n_heads / 4).
  std::size_t mask_heads = 0;
  double value_lambda_init = 0.5;
  double layerscale_init = 1e-4;
  double hyper_alpha_init = 0.0;
  double hyper_beta_logit_init = -2.2;
  double attnres_query_std = 0.02;
  double relu_squared_width = 1.5;
  double groupnorm_eps = 1e-5;
};

struct MethodSpec {
  MethodTag tag = MethodTag::baseline;
  Mixing mixing = Mixing::softmax;
  AttnStructure structure = AttnStructure::plain;
  bool qk_norm = false;
  FfnKind ffn = FfnKind::swiglu;
  NormPlacement norm = NormPlacement::pre;
  ResidualKind residual = ResidualKind::identity;
  MethodParams params;

  // The tag fully determines the five interchange slots.
  static MethodSpec from_tag(MethodTag tag);
  // Snake-case tag name; throws ConfigError on an unknown name.
  static MethodSpec parse(std::string_view name);

  std::string_view name() const;
  Category category() const;
  // Only defined for attention-category methods.
  std::optional<SoftHard> soft_hard() const;
  std::size_t mask_heads(std::size_t n_heads) const;
};

std::span<const MethodTag> all_methods();
std::string_view to_string(MethodTag tag);
std::string_view to_string(Category c);
std::string_view to_string(SoftHard s);
std::optional<MethodTag> parse_tag(std::string_view name);
// Human-readable label ("QK-Norm + GeGLU", ...).
std::string_view display_name(MethodTag tag);

// Depth schedule for the differential-attention lambda, layer index 1-based.
double diff_lambda_init(std::size_t layer);

}  // namespace modlab::model
