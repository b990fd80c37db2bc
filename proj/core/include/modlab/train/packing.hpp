#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace modlab::train {

using Document = std::vector<int>;

struct PackingReport {
  std::size_t n_shards = 0;
  std::size_t seq_len = 0;
  std::size_t n_documents = 0;
  std::size_t n_sequences = 0;
  std::size_t raw_tokens = 0;        // document tokens
  std::size_t separator_tokens = 0;  // one per document
  std::size_t n_tokens = 0;          // tokens kept in full sequences
  std::size_t discarded_tokens = 0;  // trailing partial block
  // discarded / (raw + separators), in [0, 1).
  double discard_fraction = 0.0;
  std::uint64_t shuffle_seed = 0;
  int separator = 0;
  std::string tokenizer = "bytes";

  std::string to_json() const;
  static PackingReport from_json(const std::string& text);
  bool operator==(const PackingReport&) const = default;
};

struct PackOptions {
  int separator = 256;
  std::uint64_t shuffle_seed = 0;
  std::size_t n_shards = 1;
};

struct PackedCorpus {
  std::vector<std::vector<int>> sequences;
  PackingReport report;
};

// Appends a separator to every document, concatenates them, cuts the stream
// into seq_len blocks, drops the trailing partial block and shuffles the
// blocks with a fixed seed.
PackedCorpus pack_corpus(const std::vector<Document>& docs, std::size_t seq_len, const PackOptions& options = {});

struct SyntheticCorpusOptions {
  std::size_t n_documents = 256;
  std::size_t min_length = 16;
  std::size_t max_length = 96;
  int alphabet = 256;
  // Each symbol has this many preferred successors; the chain follows one of
  // them with probability `stickiness`.
  std::size_t successors = 3;
  double stickiness = 0.9;
  std::uint64_t seed = 1234;
};

// Byte documents drawn from a sparse random Markov chain, so that a small
// model has real structure to learn.
std::vector<Document> synthetic_corpus(const SyntheticCorpusOptions& options = {});

}  // namespace modlab::train
