#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "modlab/model/config.hpp"
#include "modlab/model/method.hpp"
#include "modlab/train/packing.hpp"
#include "modlab/train/recipe.hpp"
#include "modlab/train/run.hpp"

namespace modlab::train {

struct DataConfig {
  // "synthetic" (Markov-chain bytes) or "text" (a UTF-8 file whose blank-line
  // separated paragraphs are documents, tokenized as bytes).
  std::string kind = "synthetic";
  std::filesystem::path path;
  SyntheticCorpusOptions synthetic;
  std::size_t seq_len = 32;
  std::uint64_t shuffle_seed = 0;
  std::size_t validation_sequences = 8;
  int separator = 256;
};

// Everything a `train` invocation needs. Sections [model] [method] [recipe]
// [data]; optional top-level keys `seed` and `scale`.
struct RunConfig {
  model::ModelConfig model;
  model::MethodSpec method;
  RecipeConfig recipe = RecipeConfig::toy();
  DataConfig data;
  std::uint64_t seed = 42;
  std::string scale = "toy";

  void validate() const;
};

// Throws ConfigError on unknown sections/keys, bad values or an unknown method tag.
RunConfig parse_run_config(const std::string& ini_text);
RunConfig load_run_config(const std::filesystem::path& path);

std::vector<Document> load_corpus(const DataConfig& data);
// Packs the configured corpus and splits off the validation pack.
TrainData prepare_data(const DataConfig& data, PackingReport* report = nullptr);

}  // namespace modlab::train
