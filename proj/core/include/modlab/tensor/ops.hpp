#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "modlab/tensor/tensor.hpp"

namespace modlab {

// Row/column visibility pattern for score matrices. Entries that are not
// visible behave as -inf logits.
struct AttentionMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> visible;

  static AttentionMask causal(std::size_t n);
  static AttentionMask full(std::size_t rows, std::size_t cols);
  bool is_visible(std::size_t r, std::size_t c) const { return visible[r * cols + c] != 0; }
  std::size_t visible_in_row(std::size_t r) const;
};

// --- linear algebra -------------------------------------------------------
// a: (..., k) viewed as rows x k; b: (k, m). Result keeps a's leading dims.
Tensor matmul(const Tensor& a, const Tensor& b);
// a: (n, k), b: (m, k) -> (n, m) = a * b^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// --- element-wise with broadcasting ---------------------------------------
// The smaller operand may be the same shape, a row (1, c), a column (r, 1) or
// a scalar (1) relative to the larger one's matrix view.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor silu(const Tensor& a);
// Exact (erf) GELU.
Tensor gelu(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }

// --- reductions and reshaping ---------------------------------------------
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t width);
Tensor concat_cols(std::span<const Tensor> parts);

// --- normalization / attention primitives ---------------------------------
// Row-wise softmax over the last dimension. Masked entries get weight 0; a row
// with no visible entry is all zeros and counted in empty_rows().
Tensor softmax_rows(const Tensor& logits, const AttentionMask* mask = nullptr);

// x / sqrt(mean(x^2) + eps) * scale over the last dimension. `scale` may be
// undefined (unit scale) or have cols() entries.
Tensor rmsnorm(const Tensor& x, const Tensor& scale, double eps);

// Standardize each contiguous group of `group_size` columns within a row
// (mean / variance), then multiply by a per-column scale.
Tensor group_norm(const Tensor& x, std::size_t group_size, const Tensor& scale, double eps);

// RoPE angle table: angles[p * (d/2) + i] = positions[p] * base^(-2i/d).
std::vector<double> rope_angles(std::span<const double> positions, std::size_t head_dim, double base);
// Rotates adjacent pairs (2i, 2i+1) of each row by the given angles
// (rows x head_dim/2 entries).
Tensor rope_rotate(const Tensor& x, std::span<const double> angles);
Tensor rope_apply(const Tensor& x, std::span<const int> positions, double base);

// Gathers table rows: (n_ids, d).
Tensor embedding(const Tensor& table, std::span<const int> ids);
// Mean token cross-entropy of logits (n, vocab) against integer targets.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets);

bool all_finite(const Tensor& t);

}  // namespace modlab
