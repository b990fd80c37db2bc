#include "modlab/model/mixing.hpp"

#include <cmath>

#include "modlab/errors.hpp"

namespace modlab::model {

namespace {

// Column vector (rows, 1) of per-row values derived from the visible count.
template <class F>
Tensor per_row(const AttentionMask& mask, F f) {
  std::vector<double> v(mask.rows);
  for (std::size_t r = 0; r < mask.rows; ++r) v[r] = f(mask.visible_in_row(r));
  return Tensor::constant({mask.rows, 1}, std::move(v));
}

Tensor offset_logits(const Tensor& z, const Tensor& offset) { return offset.defined() ? sub(z, offset) : z; }

}  // namespace

double ssmax_scale(double logit, double offset) {
  const double sp = logit > 30.0 ? logit : std::log1p(std::exp(logit));
  return sp + offset;
}

Tensor mixing_transform(Mixing kind, const Tensor& raw, const AttentionMask& mask, const MixingOptions& opt,
                        const MixingParams& params, const Tensor& logit_offset) {
  if (raw.rows() != mask.rows || raw.cols() != mask.cols) {
    throw ContractError("mixing_transform: mask does not match score shape");
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(opt.d_head));
  switch (kind) {
    case Mixing::softmax:
      return softmax_rows(offset_logits(scale(raw, inv_sqrt_d), logit_offset), &mask);

    case Mixing::softpick: {
      Tensor w = softmax_rows(offset_logits(scale(raw, inv_sqrt_d), logit_offset), &mask);
      // Masked entries are 0 - 1/n < 0 and rectify to exactly 0.
      Tensor inv_n = per_row(mask, [](std::size_t n) { return n ? 1.0 / static_cast<double>(n) : 0.0; });
      return relu(sub(w, inv_n));
    }

    case Mixing::sigmoid: {
      if (!params.sigmoid_bias.defined()) throw ContractError("sigmoid mixing needs a bias parameter");
      if (opt.sigmoid_length == 0) throw ContractError("sigmoid mixing needs a positive length");
      Tensor z = add(offset_logits(scale(raw, inv_sqrt_d), logit_offset), params.sigmoid_bias);
      std::vector<double> w(mask.rows * mask.cols);
      const double inv_n = 1.0 / static_cast<double>(opt.sigmoid_length);
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = mask.visible[i] ? inv_n : 0.0;
      return mul(sigmoid(z), Tensor::constant({mask.rows, mask.cols}, std::move(w)));
    }

    case Mixing::ssmax: {
      if (!params.ssmax_logit.defined()) throw ContractError("ssmax mixing needs a scale parameter");
      Tensor s = add_scalar(softplus(params.ssmax_logit), opt.ssmax_offset);
      Tensor log_n = per_row(mask, [](std::size_t n) { return n ? std::log(static_cast<double>(n)) : 0.0; });
      Tensor z = mul(mul(raw, log_n), s);
      return softmax_rows(offset_logits(z, logit_offset), &mask);
    }

    case Mixing::cap: {
      Tensor z = clamp(scale(raw, inv_sqrt_d), -opt.cap, opt.cap);
      return softmax_rows(offset_logits(z, logit_offset), &mask);
    }
  }
  throw ContractError("unknown mixing kind");
}

}  // namespace modlab::model
