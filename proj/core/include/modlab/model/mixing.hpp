#pragma once

#include "modlab/model/method.hpp"
#include "modlab/tensor/ops.hpp"

namespace modlab::model {

struct MixingOptions {
  std::size_t d_head = 64;
  // Fixed sequence length n used by the sigmoid normalization 1/n.
  std::size_t sigmoid_length = 1024;
  double cap = 50.0;
  double ssmax_offset = 0.5;
};

// Learnable per-head pieces. Unused ones may be left undefined.
struct MixingParams {
  Tensor sigmoid_bias;  // (1): b in sigmoid(z / sqrt(d) + b) / n
  Tensor ssmax_logit;   // (1): s = softplus(logit) + offset
};

// Turns raw query-key dot products (rows x cols, masked by `mask`) into the
// weights that multiply V. The 1/sqrt(d_head) temperature is applied here
// (ssmax replaces it with s * ln n). `logit_offset`, when defined, is
// subtracted from the scaled logits before normalization.
//
//   softmax  softmax(z / sqrt(d))
//   softpick relu(softmax(z / sqrt(d)) - 1/n_visible)
//   sigmoid  sigmoid(z / sqrt(d) + b) / n   on visible entries, 0 elsewhere
//   ssmax    softmax(z * s * ln(n_visible))
//   cap      softmax(clamp(z / sqrt(d), -cap, cap))
Tensor mixing_transform(Mixing kind, const Tensor& raw_scores, const AttentionMask& mask,
                        const MixingOptions& options, const MixingParams& params = {},
                        const Tensor& logit_offset = {});

// Effective ssmax scale s = softplus(logit) + offset.
double ssmax_scale(double logit, double offset = 0.5);

}  // namespace modlab::model
