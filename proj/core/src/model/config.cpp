#include "modlab/model/config.hpp"

#include <sstream>

#include "modlab/errors.hpp"

namespace modlab::model {

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  positive(n_layers, "n_layers");
  positive(d_model, "d_model");
  positive(n_heads, "n_heads");
  positive(n_kv_heads, "n_kv_heads");
  positive(d_inter, "d_inter");
  positive(context, "context");
  positive(vocab, "vocab");
  if (n_heads % n_kv_heads != 0) {
    throw ConfigError("n_heads (" + std::to_string(n_heads) + ") must be divisible by n_kv_heads (" +
                      std::to_string(n_kv_heads) + ")");
  }
  if (d_model % n_heads != 0) {
    throw ConfigError("d_model (" + std::to_string(d_model) + ") must equal n_heads x d_head");
  }
  if (d_head() % 2 != 0) throw ConfigError("RoPE requires an even head dimension");
  if (!(rope_base > 0.0)) throw ConfigError("rope_base must be positive");
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
  if (!(init_std > 0.0)) throw ConfigError("init_std must be positive");
}

std::string ModelConfig::describe() const {
  std::ostringstream os;
  os << n_layers << "L d=" << d_model << " heads=" << n_heads << "/" << n_kv_heads << " d_inter=" << d_inter
     << " ctx=" << context << " vocab=" << vocab << (tied_embeddings ? " tied" : " untied");
  return os.str();
}

ModelConfig ModelConfig::toy() { return ModelConfig{}; }

ModelConfig ModelConfig::llama_1p2b() {
  ModelConfig c;
  c.n_layers = 24;
  c.d_model = 2048;
  c.n_heads = 32;
  c.n_kv_heads = 8;
  c.d_inter = 5632;
  c.context = 1024;
  c.vocab = 65664;
  return c;
}

}  // namespace modlab::model
