#include "modlab/train/packing.hpp"

#include <random>

#include <nlohmann/json.hpp>

#include "modlab/errors.hpp"
#include "modlab/random.hpp"

namespace modlab::train {

using nlohmann::json;

std::string PackingReport::to_json() const {
  json j = {{"n_shards", n_shards},
            {"seq_len", seq_len},
            {"n_documents", n_documents},
            {"n_sequences", n_sequences},
            {"raw_tokens", raw_tokens},
            {"separator_tokens", separator_tokens},
            {"n_tokens", n_tokens},
            {"discarded_tokens", discarded_tokens},
            {"discard_fraction", discard_fraction},
            {"shuffle_seed", shuffle_seed},
            {"separator", separator},
            {"tokenizer", tokenizer}};
  return j.dump(2);
}

PackingReport PackingReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    PackingReport r;
    r.n_shards = j.at("n_shards");
    r.seq_len = j.at("seq_len");
    r.n_documents = j.at("n_documents");
    r.n_sequences = j.at("n_sequences");
    r.raw_tokens = j.at("raw_tokens");
    r.separator_tokens = j.at("separator_tokens");
    r.n_tokens = j.at("n_tokens");
    r.discarded_tokens = j.at("discarded_tokens");
    r.discard_fraction = j.at("discard_fraction");
    r.shuffle_seed = j.at("shuffle_seed");
    r.separator = j.at("separator");
    r.tokenizer = j.at("tokenizer");
    return r;
  } catch (const json::exception& e) {
    throw ContractError(std::string("malformed packing report: ") + e.what());
  }
}

PackedCorpus pack_corpus(const std::vector<Document>& docs, std::size_t seq_len, const PackOptions& opt) {
  if (seq_len < 2) throw ContractError("pack_corpus: seq_len must be at least 2");
  PackedCorpus out;
  PackingReport& r = out.report;
  r.n_shards = opt.n_shards;
  r.seq_len = seq_len;
  r.shuffle_seed = opt.shuffle_seed;
  r.separator = opt.separator;
  r.n_documents = docs.size();

  std::vector<int> stream;
  for (const Document& d : docs) {
    stream.insert(stream.end(), d.begin(), d.end());
    stream.push_back(opt.separator);
    r.raw_tokens += d.size();
    ++r.separator_tokens;
  }
  const std::size_t n_seq = stream.size() / seq_len;
  out.sequences.reserve(n_seq);
  for (std::size_t i = 0; i < n_seq; ++i) {
    out.sequences.emplace_back(stream.begin() + static_cast<std::ptrdiff_t>(i * seq_len),
                               stream.begin() + static_cast<std::ptrdiff_t>((i + 1) * seq_len));
  }
  r.n_sequences = n_seq;
  r.n_tokens = n_seq * seq_len;
  r.discarded_tokens = stream.size() - r.n_tokens;
  r.discard_fraction = stream.empty() ? 0.0 : static_cast<double>(r.discarded_tokens) / static_cast<double>(stream.size());

  // Fisher-Yates with the portable index draw.
  std::mt19937_64 rng(opt.shuffle_seed);
  for (std::size_t i = out.sequences.size(); i > 1; --i) {
    const std::size_t j = uniform_index(rng, i);
    std::swap(out.sequences[i - 1], out.sequences[j]);
  }
  return out;
}

std::vector<Document> synthetic_corpus(const SyntheticCorpusOptions& opt) {
  if (opt.alphabet <= 0 || opt.successors == 0 || opt.min_length == 0 || opt.max_length < opt.min_length) {
    throw ConfigError("synthetic corpus: invalid options");
  }
  const auto A = static_cast<std::uint64_t>(opt.alphabet);
  std::mt19937_64 rng(opt.seed);
  std::vector<std::vector<int>> next(A);
  for (auto& row : next) {
    for (std::size_t k = 0; k < opt.successors; ++k) row.push_back(static_cast<int>(uniform_index(rng, A)));
  }
  std::vector<Document> docs(opt.n_documents);
  const std::uint64_t span = opt.max_length - opt.min_length + 1;
  for (auto& d : docs) {
    const std::size_t len = opt.min_length + uniform_index(rng, span);
    int cur = static_cast<int>(uniform_index(rng, A));
    d.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      d.push_back(cur);
      if (uniform_unit(rng) < opt.stickiness) {
        cur = next[static_cast<std::size_t>(cur)][uniform_index(rng, opt.successors)];
      } else {
        cur = static_cast<int>(uniform_index(rng, A));
      }
    }
  }
  return docs;
}

}  // namespace modlab::train
