#include "modlab/model/decoder.hpp"

#include <numeric>
#include <string>

#include "modlab/errors.hpp"

namespace modlab::model {

Decoder::Decoder(ModelConfig cfg, MethodSpec method, std::uint64_t seed)
    : cfg_(cfg), method_(method), seed_(seed) {
  cfg_.validate();
  // Resolves the masking-head split early so a bad split fails before compute.
  (void)method_.mask_heads(cfg_.n_heads);
  build();
  params_.initialize(seed_);
}

void Decoder::build() {
  const std::size_t d = cfg_.d_model;
  const std::size_t dh = cfg_.d_head();
  const std::size_t H = cfg_.n_heads;
  const std::size_t A = H - method_.mask_heads(H);
  const MethodParams& mp = method_.params;
  const InitSpec w_init = InitSpec::normal(0.0, cfg_.init_std);
  const InitSpec ones = InitSpec::constant(1.0);

  auto matrix = [&](const std::string& name, std::size_t r, std::size_t c) {
    return params_.add(name, {r, c}, w_init, true);
  };
  auto vec = [&](const std::string& name, std::size_t n, InitSpec init) {
    return params_.add(name, {n}, init, false);
  };
  auto scalar = [&](const std::string& name, double v) {
    return params_.add(name, {1}, InitSpec::constant(v), false);
  };

  embed_ = matrix("embed.weight", cfg_.vocab, d);
  if (!cfg_.tied_embeddings) lm_head_ = matrix("lm_head.weight", cfg_.vocab, d);

  layers_.resize(cfg_.n_layers);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
    Layer& L = layers_[i];
    const std::string p = "layers." + std::to_string(i) + ".";

    L.attn_norm = vec(p + "attn_norm.scale", d, ones);
    L.attn.wq = matrix(p + "attn.wq", d, H * dh);
    L.attn.wk = matrix(p + "attn.wk", d, cfg_.d_kv());
    L.attn.wv = matrix(p + "attn.wv", d, cfg_.d_kv());
    L.attn.wo = matrix(p + "attn.wo", A * dh, d);
    if (method_.qk_norm) {
      L.attn.q_norm = vec(p + "attn.q_norm", dh, ones);
      L.attn.k_norm = vec(p + "attn.k_norm", dh, ones);
    }
    switch (method_.structure) {
      case AttnStructure::gated: L.attn.gate = matrix(p + "attn.gate", d, H); break;
      case AttnStructure::diff:
        L.attn.diff_lambda = scalar(p + "attn.diff_lambda", diff_lambda_init(i + 1));
        L.attn.diff_norm = vec(p + "attn.diff_norm", A * dh, ones);
        break;
      case AttnStructure::value_residual:
        if (i > 0) L.attn.value_lambda = scalar(p + "attn.value_lambda", mp.value_lambda_init);
        break;
      default: break;
    }
    if (method_.mixing == Mixing::sigmoid) L.attn.sigmoid_bias = scalar(p + "attn.sigmoid_bias", mp.sigmoid_bias_init);
    if (method_.mixing == Mixing::ssmax) {
      L.attn.ssmax_logit = vec(p + "attn.ssmax_logit", H, InitSpec::constant(mp.ssmax_logit_init));
    }

    L.ffn_norm = vec(p + "ffn_norm.scale", d, ones);
    const std::size_t width = ffn_width(method_.ffn, cfg_.d_inter, mp.relu_squared_width);
    if (method_.ffn != FfnKind::relu_squared) L.ffn.w_gate = matrix(p + "ffn.w_gate", d, width);
    L.ffn.w_up = matrix(p + "ffn.w_up", d, width);
    L.ffn.w_down = matrix(p + "ffn.w_down", width, d);

    if (method_.norm == NormPlacement::sandwich) L.attn_post_norm = vec(p + "attn_post_norm.scale", d, ones);
    if (method_.norm != NormPlacement::pre) L.ffn_post_norm = vec(p + "ffn_post_norm.scale", d, ones);

    switch (method_.residual) {
      case ResidualKind::denseformer:
        L.dense_alpha = params_.add(p + "dense.alpha", {1, i + 1}, InitSpec::identity(), false);
        break;
      case ResidualKind::layerscale:
        L.attn_gamma = vec(p + "attn_scale.gamma", d, InitSpec::constant(mp.layerscale_init));
        L.ffn_gamma = vec(p + "ffn_scale.gamma", d, InitSpec::constant(mp.layerscale_init));
        break;
      case ResidualKind::hyper:
        L.hyper_attn_alpha = scalar(p + "hyper.attn_alpha", mp.hyper_alpha_init);
        L.hyper_attn_beta = scalar(p + "hyper.attn_beta_logit", mp.hyper_beta_logit_init);
        L.hyper_ffn_alpha = scalar(p + "hyper.ffn_alpha", mp.hyper_alpha_init);
        L.hyper_ffn_beta = scalar(p + "hyper.ffn_beta_logit", mp.hyper_beta_logit_init);
        break;
      case ResidualKind::attnres:
        L.attnres_query = params_.add(p + "attnres.query", {d, 1}, InitSpec::normal(0.0, mp.attnres_query_std), false);
        L.attnres_norm = vec(p + "attnres.norm", d, ones);
        break;
      case ResidualKind::identity: break;
    }
  }
  final_norm_ = vec("final_norm.scale", d, ones);
}

DecoderOutput Decoder::forward(std::span<const int> tokens, const ForwardOptions& options) const {
  if (tokens.empty()) throw ContractError("decoder forward: empty token sequence");
  if (tokens.size() > cfg_.context) {
    throw ContractError("sequence length " + std::to_string(tokens.size()) + " exceeds context " +
                        std::to_string(cfg_.context));
  }
  for (int t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab) {
      throw ContractError("token id " + std::to_string(t) + " outside vocab of " + std::to_string(cfg_.vocab));
    }
  }
  std::vector<int> positions(tokens.size());
  std::iota(positions.begin(), positions.end(), 0);

  DecoderOutput out;
  const double eps = cfg_.norm_eps;
  const NormPlacement np = method_.norm;

  Tensor h = embedding(embed_, tokens);
  Tensor v_first;
  Tensor slow;                   // hyper-connection slow lane
  std::vector<Tensor> blocks;    // block outputs, for denseformer
  std::vector<Tensor> history;   // embedding + block outputs, for attnres
  if (method_.residual == ResidualKind::attnres) history.push_back(h);

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Layer& L = layers_[i];

    AttentionTrace trace;
    const bool want_trace = options.keep_attention || method_.structure == AttnStructure::value_residual;
    Sublayer attn_f = [&](const Tensor& xn) {
      return attention(xn, L.attn, cfg_, method_, positions, v_first, want_trace ? &trace : nullptr);
    };
    Tensor a = sublayer_branch(np, attn_f, h, L.attn_norm, L.attn_post_norm, eps);
    if (i == 0 && method_.structure == AttnStructure::value_residual) v_first = trace.values;
    if (options.keep_attention) out.attention_weights.push_back(std::move(trace.weights));

    switch (method_.residual) {
      case ResidualKind::layerscale: h = layerscale_residual(h, a, L.attn_gamma); break;
      case ResidualKind::hyper: h = hyper_residual(h, a, L.hyper_attn_alpha, L.hyper_attn_beta, slow); break;
      case ResidualKind::attnres: {
        std::vector<Tensor> cands = history;
        cands.push_back(a);
        h = attnres_mix(cands, L.attnres_query, L.attnres_norm, eps);
        break;
      }
      default: h = add(h, a); break;
    }

    Sublayer ffn_f = [&](const Tensor& xn) { return ffn(method_.ffn, xn, L.ffn); };
    Tensor f = sublayer_branch(np, ffn_f, h, L.ffn_norm, L.ffn_post_norm, eps);
    switch (method_.residual) {
      case ResidualKind::layerscale: h = layerscale_residual(h, f, L.ffn_gamma); break;
      case ResidualKind::hyper: h = hyper_residual(h, f, L.hyper_ffn_alpha, L.hyper_ffn_beta, slow); break;
      default: h = add(h, f); break;
    }
    if (np == NormPlacement::hybrid) h = rmsnorm(h, L.ffn_post_norm, eps);

    if (method_.residual == ResidualKind::denseformer) {
      blocks.push_back(h);
      h = dense_average(blocks, L.dense_alpha);
    }
    if (method_.residual == ResidualKind::attnres) history.push_back(h);
    if (options.keep_layer_outputs) out.layer_outputs.push_back(h);
  }

  out.hidden = rmsnorm(h, final_norm_, eps);
  out.logits = matmul_nt(out.hidden, cfg_.tied_embeddings ? embed_ : lm_head_);
  return out;
}

Tensor Decoder::loss(std::span<const int> sequence) const {
  if (sequence.size() < 2) throw ContractError("loss needs at least two tokens");
  DecoderOutput o = forward(sequence.first(sequence.size() - 1));
  return cross_entropy(o.logits, sequence.subspan(1));
}

Tensor Decoder::loss(std::span<const std::vector<int>> batch) const {
  if (batch.empty()) throw ContractError("loss: empty batch");
  Tensor total = loss(std::span<const int>(batch[0]));
  for (std::size_t b = 1; b < batch.size(); ++b) total = add(total, loss(std::span<const int>(batch[b])));
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

}  // namespace modlab::model
