#include "modlab/model/layers.hpp"

#include <cmath>
#include <string>

#include "modlab/errors.hpp"
#include "modlab/model/mixing.hpp"

namespace modlab::model {

namespace {

Tensor head_cols(const Tensor& t, std::size_t head, std::size_t d_head) {
  return slice_cols(t, head * d_head, d_head);
}

Tensor check_finite(Tensor w, std::size_t head) {
  if (!all_finite(w)) {
    throw DivergenceError("non-finite attention weights in head " + std::to_string(head));
  }
  return w;
}

Tensor one_minus(const Tensor& t) { return add_scalar(neg(t), 1.0); }

}  // namespace

Tensor selective_mask(const Tensor& raw, std::size_t d_head) {
  const std::size_t r = raw.rows(), c = raw.cols();
  std::vector<double> keep(r * c, 1.0);
  for (std::size_t i = 0; i < r; ++i) {
    keep[i * c] = 0.0;
    if (i < c) keep[i * c + i] = 0.0;
  }
  Tensor m = relu(scale(raw, 1.0 / std::sqrt(static_cast<double>(d_head))));
  return mul(m, Tensor::constant({r, c}, std::move(keep)));
}

Tensor attention(const Tensor& x, const AttentionWeights& w, const ModelConfig& cfg, const MethodSpec& method,
                 std::span<const int> positions, const Tensor& v_first, AttentionTrace* trace) {
  const std::size_t s = x.rows();
  if (positions.size() != s) throw ContractError("attention: one position per row required");
  const std::size_t dh = cfg.d_head();
  const std::size_t H = cfg.n_heads;
  const std::size_t group = cfg.group_size();
  const std::size_t m = method.mask_heads(H);
  const std::size_t A = H - m;  // heads whose weights multiply V

  Tensor q = matmul(x, w.wq);
  Tensor k = matmul(x, w.wk);
  Tensor v = matmul(x, w.wv);
  if (trace) trace->values = v;

  if (method.structure == AttnStructure::value_residual && v_first.defined()) {
    v = add(mul(v, one_minus(w.value_lambda)), mul(v_first, w.value_lambda));
  }

  // Per-head Q and per-KV-head K after QK-norm (before RoPE) and RoPE.
  auto prep = [&](const Tensor& t, std::size_t idx, const Tensor& norm_scale) {
    Tensor h = head_cols(t, idx, dh);
    if (method.qk_norm) h = rmsnorm(h, norm_scale, cfg.norm_eps);
    return rope_apply(h, positions, cfg.rope_base);
  };
  std::vector<Tensor> qs(H), ks(cfg.n_kv_heads), vs(cfg.n_kv_heads);
  for (std::size_t h = 0; h < H; ++h) qs[h] = prep(q, h, w.q_norm);
  for (std::size_t g = 0; g < cfg.n_kv_heads; ++g) {
    ks[g] = prep(k, g, w.k_norm);
    vs[g] = head_cols(v, g, dh);
  }

  const AttentionMask mask = AttentionMask::causal(s);
  MixingOptions mopt;
  mopt.d_head = dh;
  mopt.sigmoid_length = cfg.context;
  mopt.cap = method.params.cap;
  mopt.ssmax_offset = method.params.ssmax_offset;

  Tensor gate;
  if (method.structure == AttnStructure::gated) gate = sigmoid(matmul(x, w.gate));

  std::vector<Tensor> outs;
  outs.reserve(A);
  for (std::size_t h = 0; h < A; ++h) {
    const std::size_t g = h / group;
    Tensor weights;
    if (method.structure == AttnStructure::diff) {
      const std::size_t half = dh / 2;
      MixingOptions hopt = mopt;
      hopt.d_head = half;
      Tensor s1 = matmul_nt(slice_cols(qs[h], 0, half), slice_cols(ks[g], 0, half));
      Tensor s2 = matmul_nt(slice_cols(qs[h], half, half), slice_cols(ks[g], half, half));
      Tensor w1 = check_finite(mixing_transform(Mixing::softmax, s1, mask, hopt), h);
      Tensor w2 = check_finite(mixing_transform(Mixing::softmax, s2, mask, hopt), h);
      weights = sub(w1, mul(w2, w.diff_lambda));
    } else {
      Tensor raw = matmul_nt(qs[h], ks[g]);
      Tensor offset;
      if (m > 0) {
        const std::size_t mh = A + h % m;
        offset = selective_mask(matmul_nt(qs[mh], ks[mh / group]), dh);
      }
      MixingParams mp;
      if (method.mixing == Mixing::sigmoid) mp.sigmoid_bias = w.sigmoid_bias;
      if (method.mixing == Mixing::ssmax) mp.ssmax_logit = slice_cols(w.ssmax_logit, h, 1);
      weights = check_finite(mixing_transform(method.mixing, raw, mask, mopt, mp, offset), h);
    }
    if (trace) trace->weights.push_back(weights);
    Tensor o = matmul(weights, vs[g]);
    if (gate.defined()) o = mul(o, slice_cols(gate, h, 1));
    outs.push_back(std::move(o));
  }
  Tensor cat = concat_cols(outs);
  if (method.structure == AttnStructure::diff) cat = group_norm(cat, dh, w.diff_norm, method.params.groupnorm_eps);
  return matmul(cat, w.wo);
}

std::size_t ffn_width(FfnKind kind, std::size_t d_inter, double relu_squared_width) {
  if (kind != FfnKind::relu_squared) return d_inter;
  return static_cast<std::size_t>(std::llround(relu_squared_width * static_cast<double>(d_inter)));
}

std::size_t ffn_matrices(FfnKind kind) { return kind == FfnKind::relu_squared ? 2 : 3; }

Tensor ffn(FfnKind kind, const Tensor& x, const FfnWeights& w) {
  switch (kind) {
    case FfnKind::swiglu:
      return matmul(mul(silu(matmul(x, w.w_gate)), matmul(x, w.w_up)), w.w_down);
    case FfnKind::geglu:
      return matmul(mul(gelu(matmul(x, w.w_gate)), matmul(x, w.w_up)), w.w_down);
    case FfnKind::relu_squared:
      return matmul(square(relu(matmul(x, w.w_up))), w.w_down);
  }
  throw ContractError("unknown ffn kind");
}

Tensor sublayer_branch(NormPlacement kind, const Sublayer& f, const Tensor& x, const Tensor& pre_scale,
                       const Tensor& post_scale, double eps) {
  Tensor out = f(rmsnorm(x, pre_scale, eps));
  if (kind == NormPlacement::sandwich) out = rmsnorm(out, post_scale, eps);
  return out;
}

Tensor norm_placement(NormPlacement kind, bool ffn_sublayer, const Sublayer& f, const Tensor& x,
                      const Tensor& pre_scale, const Tensor& post_scale, double eps) {
  Tensor out = add(x, sublayer_branch(kind, f, x, pre_scale, post_scale, eps));
  if (kind == NormPlacement::hybrid && ffn_sublayer) out = rmsnorm(out, post_scale, eps);
  return out;
}

Tensor dense_average(std::span<const Tensor> outputs, const Tensor& alpha) {
  if (outputs.empty() || alpha.size() != outputs.size()) {
    throw ContractError("dense_average: need one weight per output (" + std::to_string(alpha.size()) + " vs " +
                        std::to_string(outputs.size()) + ")");
  }
  Tensor acc = mul(outputs[0], slice_cols(alpha, 0, 1));
  for (std::size_t j = 1; j < outputs.size(); ++j) acc = add(acc, mul(outputs[j], slice_cols(alpha, j, 1)));
  return acc;
}

Tensor layerscale_residual(const Tensor& x, const Tensor& branch, const Tensor& gamma) {
  return add(x, mul(branch, gamma));
}

Tensor hyper_residual(const Tensor& x, const Tensor& branch, const Tensor& alpha, const Tensor& beta_logit,
                      Tensor& slow) {
  Tensor beta = sigmoid(beta_logit);
  Tensor fresh = mul(branch, beta);
  slow = slow.defined() ? add(mul(slow, one_minus(beta)), fresh) : fresh;
  return add(add(x, branch), mul(slow, alpha));
}

Tensor attnres_mix(std::span<const Tensor> candidates, const Tensor& query, const Tensor& norm_scale, double eps,
                   Tensor* weights_out) {
  if (candidates.empty()) throw ContractError("attnres_mix: empty candidate history");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(candidates[0].cols()));
  std::vector<Tensor> logits;
  logits.reserve(candidates.size());
  for (const Tensor& v : candidates) logits.push_back(matmul(rmsnorm(v, norm_scale, eps), query));
  Tensor alpha = softmax_rows(scale(concat_cols(logits), inv_sqrt_d));
  if (weights_out) *weights_out = alpha;
  Tensor acc = mul(candidates[0], slice_cols(alpha, 0, 1));
  for (std::size_t i = 1; i < candidates.size(); ++i) acc = add(acc, mul(candidates[i], slice_cols(alpha, i, 1)));
  return acc;
}

}  // namespace modlab::model
