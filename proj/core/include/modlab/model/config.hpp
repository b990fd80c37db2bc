#pragma once

#include <cstddef>
#include <string>

namespace modlab::model {

// Shape of a Llama-style decoder.
struct ModelConfig {
  std::size_t n_layers = 2;
  std::size_t d_model = 64;
  std::size_t n_heads = 4;
  std::size_t n_kv_heads = 2;
  std::size_t d_inter = 176;
  std::size_t context = 32;
  std::size_t vocab = 257;
  // Not pinned by any upstream recipe; the conventional Llama value.
  double rope_base = 10000.0;
  bool tied_embeddings = true;
  double norm_eps = 1e-5;
  double init_std = 0.02;

  std::size_t d_head() const { return d_model / n_heads; }
  std::size_t d_kv() const { return n_kv_heads * d_head(); }
  std::size_t group_size() const { return n_heads / n_kv_heads; }

  // Throws ConfigError on any violated invariant.
  void validate() const;
  std::string describe() const;

  // 2 layers, d=64, 4/2 heads, d_inter=176 (5632/2048 ratio), context 32, byte vocab + separator.
  static ModelConfig toy();
  // 24 layers, d=2048, 32 heads / 8 KV heads, d_inter=5632, context 1024, vocab 65664.
  static ModelConfig llama_1p2b();

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace modlab::model
