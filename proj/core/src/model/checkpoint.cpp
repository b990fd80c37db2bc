#include "modlab/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "modlab/errors.hpp"

namespace modlab::model {

namespace {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "params.bin is written in native little-endian order");

json config_json(const ModelConfig& c) {
  return {{"n_layers", c.n_layers}, {"d_model", c.d_model},     {"n_heads", c.n_heads},
          {"n_kv_heads", c.n_kv_heads}, {"d_inter", c.d_inter}, {"context", c.context},
          {"vocab", c.vocab},           {"rope_base", c.rope_base}, {"tied_embeddings", c.tied_embeddings},
          {"norm_eps", c.norm_eps},     {"init_std", c.init_std}};
}

ModelConfig config_from(const json& j) {
  ModelConfig c;
  c.n_layers = j.at("n_layers");
  c.d_model = j.at("d_model");
  c.n_heads = j.at("n_heads");
  c.n_kv_heads = j.at("n_kv_heads");
  c.d_inter = j.at("d_inter");
  c.context = j.at("context");
  c.vocab = j.at("vocab");
  c.rope_base = j.at("rope_base");
  c.tied_embeddings = j.at("tied_embeddings");
  c.norm_eps = j.at("norm_eps");
  c.init_std = j.at("init_std");
  return c;
}

json method_params_json(const MethodParams& p) {
  return {{"sigmoid_bias_init", p.sigmoid_bias_init}, {"ssmax_logit_init", p.ssmax_logit_init},
          {"ssmax_offset", p.ssmax_offset},           {"cap", p.cap},
          {"mask_heads", p.mask_heads},               {"value_lambda_init", p.value_lambda_init},
          {"layerscale_init", p.layerscale_init},     {"hyper_alpha_init", p.hyper_alpha_init},
          {"hyper_beta_logit_init", p.hyper_beta_logit_init}, {"attnres_query_std", p.attnres_query_std},
          {"relu_squared_width", p.relu_squared_width}, {"groupnorm_eps", p.groupnorm_eps}};
}

MethodParams method_params_from(const json& j) {
  MethodParams p;
  p.sigmoid_bias_init = j.at("sigmoid_bias_init");
  p.ssmax_logit_init = j.at("ssmax_logit_init");
  p.ssmax_offset = j.at("ssmax_offset");
  p.cap = j.at("cap");
  p.mask_heads = j.at("mask_heads");
  p.value_lambda_init = j.at("value_lambda_init");
  p.layerscale_init = j.at("layerscale_init");
  p.hyper_alpha_init = j.at("hyper_alpha_init");
  p.hyper_beta_logit_init = j.at("hyper_beta_logit_init");
  p.attnres_query_std = j.at("attnres_query_std");
  p.relu_squared_width = j.at("relu_squared_width");
  p.groupnorm_eps = j.at("groupnorm_eps");
  return p;
}

}  // namespace

void save_checkpoint(const Decoder& model, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  json params = json::array();
  std::ofstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw ContractError("cannot write " + (dir / "params.bin").string());
  std::size_t offset = 0;
  for (const Parameter& p : model.params()) {
    const auto v = p.tensor.values();
    params.push_back({{"name", p.name},
                      {"shape", p.tensor.shape()},
                      {"init", p.init.describe()},
                      {"decay", p.decay},
                      {"offset", offset}});
    bin.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    offset += v.size();
  }
  json manifest = {{"format", "modlab-checkpoint/1"},
                   {"config", config_json(model.config())},
                   {"method", std::string(model.method().name())},
                   {"method_params", method_params_json(model.method().params)},
                   {"seed", model.seed()},
                   {"total_elements", offset},
                   {"params", params}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

Decoder load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream mf(dir / "manifest.json");
  if (!mf) throw ContractError("missing manifest in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(mf);
  } catch (const json::exception& e) {
    throw ContractError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  MethodSpec method = MethodSpec::parse(manifest.at("method").get<std::string>());
  method.params = method_params_from(manifest.at("method_params"));
  Decoder model(config_from(manifest.at("config")), method, manifest.at("seed").get<std::uint64_t>());

  const json& entries = manifest.at("params");
  if (entries.size() != model.params().size()) throw ContractError("checkpoint parameter count mismatch");
  std::ifstream bin(dir / "params.bin", std::ios::binary);
  if (!bin) throw ContractError("missing params.bin in " + dir.string());
  std::size_t i = 0;
  for (Parameter& p : model.params()) {
    const json& e = entries[i++];
    if (e.at("name") != p.name || e.at("shape").get<Shape>() != p.tensor.shape()) {
      throw ContractError("checkpoint entry " + e.at("name").get<std::string>() + " does not match model parameter " +
                          p.name);
    }
    auto v = p.tensor.mutable_values();
    bin.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    if (!bin) throw ContractError("params.bin truncated at " + p.name);
  }
  bin.peek();
  if (!bin.eof()) throw ContractError("params.bin has trailing data");
  return model;
}

}  // namespace modlab::model
