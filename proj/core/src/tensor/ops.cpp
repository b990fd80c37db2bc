#include "modlab/tensor/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "modlab/errors.hpp"
#include "modlab/tensor/kernels.hpp"

namespace modlab {

AttentionMask AttentionMask::causal(std::size_t n) {
  AttentionMask m{n, n, std::vector<std::uint8_t>(n * n, 0)};
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c <= r; ++c) m.visible[r * n + c] = 1;
  }
  return m;
}

AttentionMask AttentionMask::full(std::size_t rows, std::size_t cols) {
  return AttentionMask{rows, cols, std::vector<std::uint8_t>(rows * cols, 1)};
}

std::size_t AttentionMask::visible_in_row(std::size_t r) const {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cols; ++c) n += visible[r * cols + c];
  return n;
}

namespace {

using detail::Node;

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

// Applies f element-wise, with df(x, y) = dy/dx evaluated from input and output.
template <class F, class DF>
Tensor unary(const Tensor& a, std::string_view op, F f, DF df) {
  const auto in = a.values();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  return Tensor::from_op(a.shape(), std::move(out), {a}, op, [df](Node& self) {
    Node& p = parent(self, 0);
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.value.size(); ++i) {
      p.grad[i] += self.grad[i] * df(p.value[i], self.value[i]);
    }
  });
}

enum class Bcast { same, row, col, scalar };

Bcast broadcast_kind(const Tensor& big, const Tensor& small) {
  if (small.shape() == big.shape() || (small.size() == big.size() && small.size() == 1)) {
    return Bcast::same;
  }
  if (small.size() == 1) return Bcast::scalar;
  if (small.size() == big.cols() && small.cols() == big.cols()) return Bcast::row;
  if (small.size() == big.rows() && small.cols() == 1) return Bcast::col;
  throw ContractError("cannot broadcast " + shape_to_string(small.shape()) + " against " +
                      shape_to_string(big.shape()));
}

inline std::size_t bidx(Bcast k, std::size_t i, std::size_t cols) {
  switch (k) {
    case Bcast::same: return i;
    case Bcast::row: return i % cols;
    case Bcast::col: return i / cols;
    case Bcast::scalar: return 0;
  }
  return 0;
}

enum class BinOp { add, sub, mul };

Tensor binary(const Tensor& a, const Tensor& b, BinOp op) {
  // The result takes the larger operand's shape.
  const bool swap = b.size() > a.size();
  const Tensor& big = swap ? b : a;
  const Tensor& small = swap ? a : b;
  const Bcast kind = broadcast_kind(big, small);
  const std::size_t cols = big.cols();
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(big.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t j = bidx(kind, i, cols);
    const double x = swap ? av[j] : av[i];
    const double y = swap ? bv[i] : bv[j];
    switch (op) {
      case BinOp::add: out[i] = x + y; break;
      case BinOp::sub: out[i] = x - y; break;
      case BinOp::mul: out[i] = x * y; break;
    }
  }
  static constexpr std::string_view names[] = {"add", "sub", "mul"};
  return Tensor::from_op(big.shape(), std::move(out), {a, b}, names[static_cast<int>(op)],
                         [kind, cols, swap, op](Node& self) {
                           Node& pa = parent(self, 0);
                           Node& pb = parent(self, 1);
                           const std::size_t n = self.value.size();
                           for (std::size_t i = 0; i < n; ++i) {
                             const double g = self.grad[i];
                             if (g == 0.0) continue;
                             const std::size_t j = bidx(kind, i, cols);
                             const std::size_t ia = swap ? j : i;
                             const std::size_t ib = swap ? i : j;
                             switch (op) {
                               case BinOp::add:
                                 if (pa.requires_grad) pa.grad[ia] += g;
                                 if (pb.requires_grad) pb.grad[ib] += g;
                                 break;
                               case BinOp::sub:
                                 if (pa.requires_grad) pa.grad[ia] += g;
                                 if (pb.requires_grad) pb.grad[ib] -= g;
                                 break;
                               case BinOp::mul:
                                 if (pa.requires_grad) pa.grad[ia] += g * pb.value[ib];
                                 if (pb.requires_grad) pb.grad[ib] += g * pa.value[ia];
                                 break;
                             }
                           }
                         });
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (b.shape().size() != 2 || a.cols() != b.shape()[0]) {
    throw ContractError("matmul shape mismatch: " + shape_to_string(a.shape()) + " x " +
                        shape_to_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  std::vector<double> out(n * m, 0.0);
  kernels::gemm_nn(n, k, m, a.values().data(), b.values().data(), out.data());
  Shape shape = a.shape();
  shape.back() = m;
  return Tensor::from_op(std::move(shape), std::move(out), {a, b}, "matmul",
                         [n, k, m](Node& self) {
                           Node& pa = parent(self, 0);
                           Node& pb = parent(self, 1);
                           // dA = dC * B^T ; dB = A^T * dC
                           if (pa.requires_grad) {
                             kernels::gemm_nt(n, m, k, self.grad.data(), pb.value.data(), pa.grad.data());
                           }
                           if (pb.requires_grad) {
                             kernels::gemm_tn(n, k, m, pa.value.data(), self.grad.data(), pb.grad.data());
                           }
                         });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) {
    throw ContractError("matmul_nt inner dimension mismatch: " + shape_to_string(a.shape()) +
                        " vs " + shape_to_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  std::vector<double> out(n * m, 0.0);
  kernels::gemm_nt(n, k, m, a.values().data(), b.values().data(), out.data());
  return Tensor::from_op({n, m}, std::move(out), {a, b}, "matmul_nt", [n, k, m](Node& self) {
    Node& pa = parent(self, 0);
    Node& pb = parent(self, 1);
    // C = A B^T: dA = dC * B ; dB = dC^T * A
    if (pa.requires_grad) kernels::gemm_nn(n, m, k, self.grad.data(), pb.value.data(), pa.grad.data());
    if (pb.requires_grad) kernels::gemm_tn(n, m, k, self.grad.data(), pa.value.data(), pb.grad.data());
  });
}

Tensor transpose(const Tensor& a) {
  const std::size_t r = a.rows(), c = a.cols();
  const auto v = a.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = v[i * c + j];
  }
  return Tensor::from_op({c, r}, std::move(out), {a}, "transpose", [r, c](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < c; ++j) p.grad[i * c + j] += self.grad[j * r + i];
    }
  });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinOp::mul); }

Tensor scale(const Tensor& a, double c) {
  return unary(a, "scale", [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary(a, "add_scalar", [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor relu(const Tensor& a) {
  return unary(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

namespace {
double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}
}  // namespace

Tensor sigmoid(const Tensor& a) {
  return unary(a, "sigmoid", sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
}

Tensor silu(const Tensor& a) {
  return unary(a, "silu", [](double x) { return x * sigmoid_scalar(x); },
               [](double x, double) {
                 const double s = sigmoid_scalar(x);
                 return s * (1.0 + x * (1.0 - s));
               });
}

Tensor gelu(const Tensor& a) {
  return unary(a, "gelu",
               [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); },
               [](double x, double) {
                 const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
                 const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
                 return cdf + x * pdf;
               });
}

Tensor square(const Tensor& a) {
  return unary(a, "square", [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softplus(const Tensor& a) {
  return unary(a, "softplus",
               [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
               [](double x, double) { return sigmoid_scalar(x); });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  return unary(a, "clamp", [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.values()) s += v;
  return Tensor::from_op({1}, {s}, {a}, "sum", [](Node& self) {
    Node& p = parent(self, 0);
    for (auto& g : p.grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) { return scale(sum(a), 1.0 / static_cast<double>(a.size())); }

Tensor reshape(const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw ContractError("reshape " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
  }
  std::vector<double> v(a.values().begin(), a.values().end());
  return Tensor::from_op(std::move(shape), std::move(v), {a}, "reshape", [](Node& self) {
    Node& p = parent(self, 0);
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  });
}

Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t width) {
  const std::size_t r = a.rows(), c = a.cols();
  if (width == 0 || start + width > c) {
    throw ContractError("slice_cols [" + std::to_string(start) + ", +" + std::to_string(width) +
                        ") out of range for " + std::to_string(c) + " columns");
  }
  const auto v = a.values();
  std::vector<double> out(r * width);
  for (std::size_t i = 0; i < r; ++i) {
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * c + start), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  Shape shape = a.shape();
  shape.back() = width;
  return Tensor::from_op(std::move(shape), std::move(out), {a}, "slice_cols",
                         [r, c, start, width](Node& self) {
                           Node& p = parent(self, 0);
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t j = 0; j < width; ++j) {
                               p.grad[i * c + start + j] += self.grad[i * width + j];
                             }
                           }
                         });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) throw ContractError("concat_cols needs at least one tensor");
  const std::size_t r = parts.front().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw ContractError("concat_cols row mismatch");
    widths.push_back(p.cols());
    total += p.cols();
  }
  std::vector<double> out(r * total);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto v = p.values();
    const std::size_t w = p.cols();
    for (std::size_t i = 0; i < r; ++i) {
      std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(i * w), w,
                  out.begin() + static_cast<std::ptrdiff_t>(i * total + off));
    }
    off += w;
  }
  Shape shape = parts.front().shape();
  shape.back() = total;
  std::vector<Tensor> parents(parts.begin(), parts.end());
  return Tensor::from_op(std::move(shape), std::move(out), parents, "concat_cols",
                         [r, total, widths](Node& self) {
                           std::size_t off = 0;
                           for (std::size_t k = 0; k < widths.size(); ++k) {
                             Node& p = parent(self, k);
                             const std::size_t w = widths[k];
                             if (p.requires_grad) {
                               for (std::size_t i = 0; i < r; ++i) {
                                 for (std::size_t j = 0; j < w; ++j) {
                                   p.grad[i * w + j] += self.grad[i * total + off + j];
                                 }
                               }
                             }
                             off += w;
                           }
                         });
}

Tensor softmax_rows(const Tensor& logits, const AttentionMask* mask) {
  const std::size_t r = logits.rows(), c = logits.cols();
  if (mask && (mask->rows != r || mask->cols != c)) {
    throw ContractError("softmax mask shape does not match logits");
  }
  const auto v = logits.values();
  std::vector<double> out(r * c, 0.0);
  std::size_t empty = 0;
  for (std::size_t i = 0; i < r; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < c; ++j) {
      if (!mask || mask->is_visible(i, j)) mx = std::max(mx, v[i * c + j]);
    }
    if (mx == -std::numeric_limits<double>::infinity()) {
      ++empty;
      continue;
    }
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      if (!mask || mask->is_visible(i, j)) {
        const double e = std::exp(v[i * c + j] - mx);
        out[i * c + j] = e;
        z += e;
      }
    }
    for (std::size_t j = 0; j < c; ++j) out[i * c + j] /= z;
  }
  Tensor t = Tensor::from_op(logits.shape(), std::move(out), {logits}, "softmax_rows",
                             [r, c](Node& self) {
                               Node& p = parent(self, 0);
                               for (std::size_t i = 0; i < r; ++i) {
                                 double dot = 0.0;
                                 for (std::size_t j = 0; j < c; ++j) {
                                   dot += self.grad[i * c + j] * self.value[i * c + j];
                                 }
                                 for (std::size_t j = 0; j < c; ++j) {
                                   const double y = self.value[i * c + j];
                                   p.grad[i * c + j] += y * (self.grad[i * c + j] - dot);
                                 }
                               }
                             });
  t.node()->empty_rows = empty;
  return t;
}

Tensor rmsnorm(const Tensor& x, const Tensor& scale, double eps) {
  if (!(eps >= 0.0)) throw ContractError("rmsnorm eps must be non-negative");
  const std::size_t r = x.rows(), c = x.cols();
  if (scale.defined() && scale.size() != c) {
    throw ContractError("rmsnorm scale has " + std::to_string(scale.size()) + " entries, expected " +
                        std::to_string(c));
  }
  const auto v = x.values();
  std::vector<double> inv(r);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    double ms = 0.0;
    for (std::size_t j = 0; j < c; ++j) ms += v[i * c + j] * v[i * c + j];
    ms /= static_cast<double>(c);
    const double denom = ms + eps;
    inv[i] = denom > 0.0 ? 1.0 / std::sqrt(denom) : 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double s = scale.defined() ? scale.values()[j] : 1.0;
      out[i * c + j] = v[i * c + j] * inv[i] * s;
    }
  }
  std::vector<Tensor> parents{x};
  const bool has_scale = scale.defined();
  if (has_scale) parents.push_back(scale);
  return Tensor::from_op(x.shape(), std::move(out), parents, "rmsnorm",
                         [r, c, inv = std::move(inv), has_scale](Node& self) {
                           Node& px = parent(self, 0);
                           Node* ps = has_scale ? &parent(self, 1) : nullptr;
                           for (std::size_t i = 0; i < r; ++i) {
                             const double* xv = &px.value[i * c];
                             const double* g = &self.grad[i * c];
                             const double k = inv[i];
                             // y_j = s_j x_j k ; dk/dx_j = -k^3 x_j / c
                             double dot = 0.0;
                             for (std::size_t j = 0; j < c; ++j) {
                               const double s = ps ? ps->value[j] : 1.0;
                               dot += g[j] * s * xv[j];
                             }
                             for (std::size_t j = 0; j < c; ++j) {
                               const double s = ps ? ps->value[j] : 1.0;
                               if (px.requires_grad) {
                                 px.grad[i * c + j] += g[j] * s * k -
                                                       k * k * k * xv[j] * dot / static_cast<double>(c);
                               }
                               if (ps && ps->requires_grad) ps->grad[j] += g[j] * xv[j] * k;
                             }
                           }
                         });
}

Tensor group_norm(const Tensor& x, std::size_t group_size, const Tensor& scale, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  if (group_size == 0 || c % group_size != 0) {
    throw ContractError("group_norm group size must divide the row width");
  }
  if (scale.defined() && scale.size() != c) throw ContractError("group_norm scale width mismatch");
  const std::size_t groups = c / group_size;
  const auto v = x.values();
  std::vector<double> xhat(r * c), inv(r * groups), out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t g = 0; g < groups; ++g) {
      const double* xv = &v[i * c + g * group_size];
      double mu = 0.0;
      for (std::size_t j = 0; j < group_size; ++j) mu += xv[j];
      mu /= static_cast<double>(group_size);
      double var = 0.0;
      for (std::size_t j = 0; j < group_size; ++j) var += (xv[j] - mu) * (xv[j] - mu);
      var /= static_cast<double>(group_size);
      const double k = 1.0 / std::sqrt(var + eps);
      inv[i * groups + g] = k;
      for (std::size_t j = 0; j < group_size; ++j) {
        const std::size_t idx = i * c + g * group_size + j;
        xhat[idx] = (xv[j] - mu) * k;
        out[idx] = xhat[idx] * (scale.defined() ? scale.values()[g * group_size + j] : 1.0);
      }
    }
  }
  std::vector<Tensor> parents{x};
  const bool has_scale = scale.defined();
  if (has_scale) parents.push_back(scale);
  return Tensor::from_op(
      x.shape(), std::move(out), parents, "group_norm",
      [r, c, group_size, groups, has_scale, xhat = std::move(xhat), inv = std::move(inv)](Node& self) {
        Node& px = parent(self, 0);
        Node* ps = has_scale ? &parent(self, 1) : nullptr;
        const double n = static_cast<double>(group_size);
        for (std::size_t i = 0; i < r; ++i) {
          for (std::size_t g = 0; g < groups; ++g) {
            const std::size_t base = i * c + g * group_size;
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t j = 0; j < group_size; ++j) {
              const double s = ps ? ps->value[g * group_size + j] : 1.0;
              const double dy = self.grad[base + j] * s;
              sum_dy += dy;
              sum_dy_xhat += dy * xhat[base + j];
              if (ps && ps->requires_grad) ps->grad[g * group_size + j] += self.grad[base + j] * xhat[base + j];
            }
            if (!px.requires_grad) continue;
            const double k = inv[i * groups + g];
            for (std::size_t j = 0; j < group_size; ++j) {
              const double s = ps ? ps->value[g * group_size + j] : 1.0;
              const double dy = self.grad[base + j] * s;
              px.grad[base + j] += k * (dy - sum_dy / n - xhat[base + j] * sum_dy_xhat / n);
            }
          }
        }
      });
}

std::vector<double> rope_angles(std::span<const double> positions, std::size_t head_dim, double base) {
  if (head_dim % 2 != 0) {
    throw ConfigError("RoPE requires an even head dimension, got " + std::to_string(head_dim));
  }
  if (!(base > 0.0)) throw ConfigError("RoPE base must be positive");
  const std::size_t half = head_dim / 2;
  std::vector<double> angles(positions.size() * half);
  for (std::size_t p = 0; p < positions.size(); ++p) {
    for (std::size_t i = 0; i < half; ++i) {
      const double freq = std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(head_dim));
      angles[p * half + i] = positions[p] * freq;
    }
  }
  return angles;
}

Tensor rope_rotate(const Tensor& x, std::span<const double> angles) {
  const std::size_t r = x.rows(), c = x.cols();
  if (c % 2 != 0) throw ConfigError("RoPE requires an even head dimension, got " + std::to_string(c));
  const std::size_t half = c / 2;
  if (angles.size() != r * half) throw ContractError("RoPE angle table does not match input rows");
  std::vector<double> cs(r * half), sn(r * half);
  for (std::size_t i = 0; i < r * half; ++i) {
    cs[i] = std::cos(angles[i]);
    sn[i] = std::sin(angles[i]);
  }
  const auto v = x.values();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t k = 0; k < half; ++k) {
      const double a = v[i * c + 2 * k], b = v[i * c + 2 * k + 1];
      const double co = cs[i * half + k], si = sn[i * half + k];
      out[i * c + 2 * k] = a * co - b * si;
      out[i * c + 2 * k + 1] = a * si + b * co;
    }
  }
  return Tensor::from_op(x.shape(), std::move(out), {x}, "rope",
                         [r, c, half, cs = std::move(cs), sn = std::move(sn)](Node& self) {
                           Node& p = parent(self, 0);
                           for (std::size_t i = 0; i < r; ++i) {
                             for (std::size_t k = 0; k < half; ++k) {
                               const double ga = self.grad[i * c + 2 * k];
                               const double gb = self.grad[i * c + 2 * k + 1];
                               const double co = cs[i * half + k], si = sn[i * half + k];
                               p.grad[i * c + 2 * k] += ga * co + gb * si;
                               p.grad[i * c + 2 * k + 1] += -ga * si + gb * co;
                             }
                           }
                         });
}

Tensor rope_apply(const Tensor& x, std::span<const int> positions, double base) {
  std::vector<double> pos(positions.begin(), positions.end());
  return rope_rotate(x, rope_angles(pos, x.cols(), base));
}

Tensor embedding(const Tensor& table, std::span<const int> ids) {
  const std::size_t vocab = table.rows(), d = table.cols();
  std::vector<double> out(ids.size() * d);
  const auto v = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= vocab) {
      throw ContractError("token id " + std::to_string(ids[i]) + " outside vocabulary of " +
                          std::to_string(vocab));
    }
    std::copy_n(v.begin() + static_cast<std::ptrdiff_t>(ids[i] * d), d,
                out.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  std::vector<int> idv(ids.begin(), ids.end());
  return Tensor::from_op({ids.size(), d}, std::move(out), {table}, "embedding",
                         [d, idv = std::move(idv)](Node& self) {
                           Node& p = parent(self, 0);
                           for (std::size_t i = 0; i < idv.size(); ++i) {
                             const std::size_t row = static_cast<std::size_t>(idv[i]);
                             for (std::size_t j = 0; j < d; ++j) p.grad[row * d + j] += self.grad[i * d + j];
                           }
                         });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets) {
  const std::size_t n = logits.rows(), vocab = logits.cols();
  if (targets.size() != n) throw ContractError("cross_entropy: one target per logits row required");
  const auto v = logits.values();
  std::vector<double> probs(n * vocab);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= vocab) {
      throw ContractError("cross_entropy target outside vocabulary");
    }
    const double* row = &v[i * vocab];
    const double mx = *std::max_element(row, row + vocab);
    double z = 0.0;
    for (std::size_t j = 0; j < vocab; ++j) {
      probs[i * vocab + j] = std::exp(row[j] - mx);
      z += probs[i * vocab + j];
    }
    for (std::size_t j = 0; j < vocab; ++j) probs[i * vocab + j] /= z;
    loss += std::log(z) + mx - row[targets[i]];
  }
  loss /= static_cast<double>(n);
  std::vector<int> tg(targets.begin(), targets.end());
  return Tensor::from_op({1}, {loss}, {logits}, "cross_entropy",
                         [n, vocab, probs = std::move(probs), tg = std::move(tg)](Node& self) {
                           Node& p = parent(self, 0);
                           const double g = self.grad[0] / static_cast<double>(n);
                           for (std::size_t i = 0; i < n; ++i) {
                             for (std::size_t j = 0; j < vocab; ++j) {
                               p.grad[i * vocab + j] += g * probs[i * vocab + j];
                             }
                             p.grad[i * vocab + static_cast<std::size_t>(tg[i])] -= g;
                           }
                         });
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.values().begin(), t.values().end(), [](double v) { return std::isfinite(v); });
}

}  // namespace modlab
