#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "modlab/model/config.hpp"
#include "modlab/model/layers.hpp"
#include "modlab/model/method.hpp"
#include "modlab/tensor/parameter.hpp"

namespace modlab::model {

struct ForwardOptions {
  bool keep_attention = false;
  bool keep_layer_outputs = false;
};

struct DecoderOutput {
  Tensor logits;  // (len, vocab)
  Tensor hidden;  // (len, d) after the final norm
  // [layer][head] mixing weights, when requested.
  std::vector<std::vector<Tensor>> attention_weights;
  // Output of every block, when requested.
  std::vector<Tensor> layer_outputs;
};

// Llama-style decoder with every interchange slot dispatched from a
// MethodSpec. Parameters are registered at construction and initialized from
// `seed`.
class Decoder {
 public:
  Decoder(ModelConfig cfg, MethodSpec method, std::uint64_t seed);
  // Parameters are graph leaves; copies would alias them.
  Decoder(const Decoder&) = delete;
  Decoder& operator=(const Decoder&) = delete;
  Decoder(Decoder&&) = default;
  Decoder& operator=(Decoder&&) = default;

  // Token ids must be < vocab and at most `context` long.
  DecoderOutput forward(std::span<const int> tokens, const ForwardOptions& options = {}) const;
  // Mean next-token cross-entropy: predicts tokens[1..] from tokens[..n-1].
  Tensor loss(std::span<const int> sequence) const;
  // Mean of per-sequence losses.
  Tensor loss(std::span<const std::vector<int>> batch) const;

  const ModelConfig& config() const { return cfg_; }
  const MethodSpec& method() const { return method_; }
  std::uint64_t seed() const { return seed_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  struct Layer {
    AttentionWeights attn;
    FfnWeights ffn;
    Tensor attn_norm, ffn_norm;            // pre-sublayer RMSNorm scales
    Tensor attn_post_norm, ffn_post_norm;  // sandwich / hybrid
    Tensor dense_alpha;                    // (1, layer + 1)
    Tensor attn_gamma, ffn_gamma;          // layerscale
    Tensor hyper_attn_alpha, hyper_attn_beta, hyper_ffn_alpha, hyper_ffn_beta;
    Tensor attnres_query, attnres_norm;
  };

  void build();

  ModelConfig cfg_;
  MethodSpec method_;
  std::uint64_t seed_;
  ParameterSet params_;
  Tensor embed_, lm_head_, final_norm_;
  std::vector<Layer> layers_;
};

}  // namespace modlab::model
