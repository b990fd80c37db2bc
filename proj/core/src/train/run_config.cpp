#include "modlab/train/run_config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "modlab/errors.hpp"

namespace modlab::train {

namespace pt = boost::property_tree;

namespace {

template <class T>
T as(const std::string& section, const std::string& key, const std::string& text) {
  std::istringstream is(text);
  T v{};
  if constexpr (std::is_same_v<T, std::string>) {
    return text;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (text == "true" || text == "1" || text == "yes") return true;
    if (text == "false" || text == "0" || text == "no") return false;
    throw ConfigError("[" + section + "] " + key + ": expected a boolean, got '" + text + "'");
  } else {
    is >> v;
    if (!is || !(is >> std::ws).eof()) {
      throw ConfigError("[" + section + "] " + key + ": cannot parse '" + text + "'");
    }
    if constexpr (std::is_unsigned_v<T>) {
      if (text.find('-') != std::string::npos) {
        throw ConfigError("[" + section + "] " + key + " must be non-negative");
      }
    }
  }
  return v;
}

using Setter = std::function<void(const std::string&)>;

void apply(const std::string& section, const pt::ptree& tree, const std::map<std::string, Setter>& setters) {
  for (const auto& [key, node] : tree) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
    it->second(node.data());
  }
}

template <class T>
Setter set(const std::string& section, const std::string& key, T& field) {
  return [&field, section, key](const std::string& v) { field = as<T>(section, key, v); };
}

}  // namespace

void RunConfig::validate() const {
  model.validate();
  recipe.validate();
  (void)method.mask_heads(model.n_heads);
  if (data.kind != "synthetic" && data.kind != "text") throw ConfigError("[data] kind must be synthetic or text");
  if (data.kind == "text" && data.path.empty()) throw ConfigError("[data] kind=text requires a path");
  if (data.seq_len < 2) throw ConfigError("[data] seq_len must be at least 2");
  if (data.seq_len > model.context + 1) {
    throw ConfigError("[data] seq_len " + std::to_string(data.seq_len) + " exceeds context + 1 (" +
                      std::to_string(model.context + 1) + ")");
  }
  if (data.separator < 0 || static_cast<std::size_t>(data.separator) >= model.vocab) {
    throw ConfigError("[data] separator id must be below vocab");
  }
  if (data.kind == "synthetic" && static_cast<std::size_t>(data.synthetic.alphabet) > model.vocab) {
    throw ConfigError("[data] alphabet exceeds vocab");
  }
  if (recipe.tokens_per_step % static_cast<long>(data.seq_len) != 0) {
    throw ConfigError("[recipe] tokens_per_step must be a multiple of [data] seq_len");
  }
}

RunConfig parse_run_config(const std::string& text) {
  pt::ptree tree;
  try {
    std::istringstream is(text);
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed run config: ") + e.what());
  }

  RunConfig rc;
  // Presets first so explicit keys override them.
  if (auto m = tree.get_child_optional("model")) {
    if (auto preset = m->get_optional<std::string>("preset")) {
      if (*preset == "toy") {
        rc.model = model::ModelConfig::toy();
      } else if (*preset == "llama_1p2b") {
        rc.model = model::ModelConfig::llama_1p2b();
      } else {
        throw ConfigError("[model] unknown preset '" + *preset + "'");
      }
    }
  }
  if (auto r = tree.get_child_optional("recipe")) {
    if (auto preset = r->get_optional<std::string>("preset")) {
      if (*preset == "toy") {
        rc.recipe = RecipeConfig::toy();
      } else if (*preset == "full") {
        rc.recipe = RecipeConfig{};
      } else {
        throw ConfigError("[recipe] unknown preset '" + *preset + "'");
      }
    }
  }
  std::string tag = "baseline";
  if (auto m = tree.get_child_optional("method")) {
    if (auto t = m->get_optional<std::string>("tag")) tag = *t;
  }
  rc.method = model::MethodSpec::parse(tag);

  model::ModelConfig& M = rc.model;
  model::MethodParams& P = rc.method.params;
  RecipeConfig& R = rc.recipe;
  DataConfig& D = rc.data;
  std::string path;

  for (const auto& [name, section] : tree) {
    const bool is_section = name == "model" || name == "method" || name == "recipe" || name == "data";
    if (!is_section) {
      // Top-level key.
      if (name == "seed") {
        rc.seed = as<std::uint64_t>("", name, section.data());
      } else if (name == "scale") {
        rc.scale = section.data();
      } else {
        throw ConfigError("unknown top-level key or section '" + name + "'");
      }
    } else if (name == "model") {
      apply(name, section,
            {{"preset", [](const std::string&) {}},
             {"n_layers", set(name, "n_layers", M.n_layers)},
             {"d_model", set(name, "d_model", M.d_model)},
             {"n_heads", set(name, "n_heads", M.n_heads)},
             {"n_kv_heads", set(name, "n_kv_heads", M.n_kv_heads)},
             {"d_inter", set(name, "d_inter", M.d_inter)},
             {"context", set(name, "context", M.context)},
             {"vocab", set(name, "vocab", M.vocab)},
             {"rope_base", set(name, "rope_base", M.rope_base)},
             {"tied_embeddings", set(name, "tied_embeddings", M.tied_embeddings)},
             {"norm_eps", set(name, "norm_eps", M.norm_eps)},
             {"init_std", set(name, "init_std", M.init_std)}});
    } else if (name == "method") {
      apply(name, section,
            {{"tag", [](const std::string&) {}},
             {"sigmoid_bias_init", set(name, "sigmoid_bias_init", P.sigmoid_bias_init)},
             {"ssmax_logit_init", set(name, "ssmax_logit_init", P.ssmax_logit_init)},
             {"ssmax_offset", set(name, "ssmax_offset", P.ssmax_offset)},
             {"cap", set(name, "cap", P.cap)},
             {"mask_heads", set(name, "mask_heads", P.mask_heads)},
             {"value_lambda_init", set(name, "value_lambda_init", P.value_lambda_init)},
             {"layerscale_init", set(name, "layerscale_init", P.layerscale_init)},
             {"hyper_alpha_init", set(name, "hyper_alpha_init", P.hyper_alpha_init)},
             {"hyper_beta_logit_init", set(name, "hyper_beta_logit_init", P.hyper_beta_logit_init)},
             {"attnres_query_std", set(name, "attnres_query_std", P.attnres_query_std)},
             {"relu_squared_width", set(name, "relu_squared_width", P.relu_squared_width)},
             {"groupnorm_eps", set(name, "groupnorm_eps", P.groupnorm_eps)}});
    } else if (name == "recipe") {
      apply(name, section,
            {{"preset", [](const std::string&) {}},
             {"lr_peak", set(name, "lr_peak", R.lr_peak)},
             {"beta1", set(name, "beta1", R.beta1)},
             {"beta2", set(name, "beta2", R.beta2)},
             {"adam_eps", set(name, "adam_eps", R.adam_eps)},
             {"weight_decay", set(name, "weight_decay", R.weight_decay)},
             {"clip_norm", set(name, "clip_norm", R.clip_norm)},
             {"warmup_steps", set(name, "warmup_steps", R.warmup_steps)},
             {"total_steps", set(name, "total_steps", R.total_steps)},
             {"final_lr_fraction", set(name, "final_lr_fraction", R.final_lr_fraction)},
             {"tokens_per_step", set(name, "tokens_per_step", R.tokens_per_step)},
             {"log_every", set(name, "log_every", R.log_every)}});
    } else if (name == "data") {
      apply(name, section,
            {{"kind", set(name, "kind", D.kind)},
             {"path", set(name, "path", path)},
             {"n_documents", set(name, "n_documents", D.synthetic.n_documents)},
             {"min_length", set(name, "min_length", D.synthetic.min_length)},
             {"max_length", set(name, "max_length", D.synthetic.max_length)},
             {"alphabet", set(name, "alphabet", D.synthetic.alphabet)},
             {"successors", set(name, "successors", D.synthetic.successors)},
             {"stickiness", set(name, "stickiness", D.synthetic.stickiness)},
             {"corpus_seed", set(name, "corpus_seed", D.synthetic.seed)},
             {"seq_len", set(name, "seq_len", D.seq_len)},
             {"shuffle_seed", set(name, "shuffle_seed", D.shuffle_seed)},
             {"validation_sequences", set(name, "validation_sequences", D.validation_sequences)},
             {"separator", set(name, "separator", D.separator)}});
    } else {
      throw ConfigError("unknown section [" + name + "]");
    }
  }
  D.path = path;
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read run config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::vector<Document> load_corpus(const DataConfig& data) {
  if (data.kind == "synthetic") return synthetic_corpus(data.synthetic);
  std::ifstream in(data.path, std::ios::binary);
  if (!in) throw ConfigError("cannot read corpus " + data.path.string());
  std::vector<Document> docs;
  Document cur;
  std::string line;
  auto flush = [&] {
    if (!cur.empty()) docs.push_back(std::move(cur));
    cur.clear();
  };
  while (std::getline(in, line)) {
    if (line.empty()) {
      flush();
      continue;
    }
    if (!cur.empty()) cur.push_back('\n');
    for (unsigned char c : line) cur.push_back(c);
  }
  flush();
  return docs;
}

TrainData prepare_data(const DataConfig& data, PackingReport* report) {
  PackOptions po;
  po.separator = data.separator;
  po.shuffle_seed = data.shuffle_seed;
  PackedCorpus packed = pack_corpus(load_corpus(data), data.seq_len, po);
  if (report) *report = packed.report;
  return split_validation(std::move(packed.sequences), data.validation_sequences);
}

}  // namespace modlab::train
