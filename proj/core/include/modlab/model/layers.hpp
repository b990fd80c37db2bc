#pragma once

#include <functional>
#include <span>
#include <vector>

#include "modlab/model/config.hpp"
#include "modlab/model/method.hpp"
#include "modlab/tensor/ops.hpp"

namespace modlab::model {

// Per-layer attention tensors. Only the ones the method uses are defined.
struct AttentionWeights {
  Tensor wq;  // (d, H * d_head)
  Tensor wk;  // (d, d_kv)
  Tensor wv;  // (d, d_kv)
  Tensor wo;  // (A * d_head, d), A = heads that carry values
  Tensor q_norm, k_norm;  // (d_head), shared across heads
  Tensor gate;            // (d, H)
  Tensor sigmoid_bias;    // (1)
  Tensor ssmax_logit;     // (H)
  Tensor diff_lambda;     // (1)
  Tensor diff_norm;       // (A * d_head) GroupNorm scale
  Tensor value_lambda;    // (1), layers after the first
};

struct AttentionTrace {
  // One (s, s) matrix per value-carrying head: the weights that multiply V.
  std::vector<Tensor> weights;
  // This layer's V before any value-residual mixing, (s, d_kv).
  Tensor values;
};

// Causal grouped-query attention on one normalized sequence x (s, d).
// `v_first` is the first layer's V for value-residual layers (undefined at
// layer 0). Throws DivergenceError if any head's mixing weights are not finite.
Tensor attention(const Tensor& x, const AttentionWeights& w, const ModelConfig& cfg, const MethodSpec& method,
                 std::span<const int> positions, const Tensor& v_first = {}, AttentionTrace* trace = nullptr);

// Selective-attention mask for one attention head: relu(scores / sqrt(d_head))
// with the diagonal and column 0 forced to zero.
Tensor selective_mask(const Tensor& raw_scores, std::size_t d_head);

struct FfnWeights {
  Tensor w_gate;  // (d, width), unused by relu_squared
  Tensor w_up;    // (d, width)
  Tensor w_down;  // (width, d)
};

// swiglu: W_down(SiLU(x W_gate) * x W_up); geglu swaps in GELU;
// relu_squared: W_down(ReLU(x W_up)^2).
Tensor ffn(FfnKind kind, const Tensor& x, const FfnWeights& w);
// Intermediate width: d_inter, or round(1.5 * d_inter) for relu_squared.
std::size_t ffn_width(FfnKind kind, std::size_t d_inter, double relu_squared_width = 1.5);
// Number of d x width matrices (gate/up/down).
std::size_t ffn_matrices(FfnKind kind);

using Sublayer = std::function<Tensor(const Tensor&)>;

// The sublayer's contribution before it is added to the residual stream:
// f(N(x)), or N_post(f(N(x))) under sandwich placement.
Tensor sublayer_branch(NormPlacement kind, const Sublayer& f, const Tensor& x, const Tensor& pre_scale,
                       const Tensor& post_scale, double eps);

//   pre      x + f(N(x))
//   sandwich x + N2(f(N1(x)))
//   hybrid   attention as pre; FFN N2(x + f(N1(x)))
Tensor norm_placement(NormPlacement kind, bool ffn_sublayer, const Sublayer& f, const Tensor& x,
                      const Tensor& pre_scale, const Tensor& post_scale, double eps);

// sum_j alpha[j] * outputs[j]; alpha has outputs.size() entries.
Tensor dense_average(std::span<const Tensor> outputs, const Tensor& alpha);

// x + gamma * branch.
Tensor layerscale_residual(const Tensor& x, const Tensor& branch, const Tensor& gamma);

// Two-lane residual. The slow lane is an EMA of sublayer outputs carried
// through depth: slow <- (1 - beta) slow + beta * branch with
// beta = sigmoid(beta_logit); returns x + branch + alpha * slow.
// An undefined `slow` starts at zero.
Tensor hyper_residual(const Tensor& x, const Tensor& branch, const Tensor& alpha, const Tensor& beta_logit,
                      Tensor& slow);

// Depth-wise softmax over candidates v_i (each (s, d)) keyed by
// w . RMSNorm(v_i) / sqrt(d), evaluated independently per position.
// `query` is (d, 1). Throws ContractError on an empty candidate list.
Tensor attnres_mix(std::span<const Tensor> candidates, const Tensor& query, const Tensor& norm_scale, double eps,
                   Tensor* weights_out = nullptr);

}  // namespace modlab::model
