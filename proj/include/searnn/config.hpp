#pragma once

#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "searnn/trainer.hpp"

namespace searnn {

// Full run description: data paths, vocabulary settings, model dims and the
// training/SEARNN sections. Parsed strictly; unknown keys are rejected with
// their path.
struct RunConfig {
  struct Data {
    std::string train_src;
    std::string train_tgt;
    std::string dev_src;
    std::string dev_tgt;
    std::string test_src;  // optional
    std::string test_tgt;  // optional
  } data;

  struct Vocab {
    std::string src_file;  // load when set, else built from the train split
    std::string tgt_file;
    std::size_t max_size = 8000;
    std::size_t min_freq = 1;
  } vocab;

  ModelDims model{0, 0, 64, 256};  // vocab sizes resolved at load time
  TrainConfig train;
  std::string output_dir = "run";

  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::string& path);
  // Every field materialized, including defaults.
  nlohmann::json to_json() const;
};

// Loads vocabularies (building and persisting them into out_dir when no
// files are given) and encodes the train/dev/test splits.
CorpusData load_corpus(RunConfig& config);

// Reads an aligned pair of text files; throws DataError naming both files on
// a line-count mismatch.
std::vector<SentencePair> load_pairs(const Vocabulary& src_vocab,
                                     const Vocabulary& tgt_vocab,
                                     const std::string& src_path,
                                     const std::string& tgt_path);

// Binary encoded-corpus cache produced by `prepare` (magic "SRNC"): vocab
// hashes plus the encoded id sequences.
void save_corpus_cache(const std::vector<SentencePair>& pairs,
                       std::uint64_t src_vocab_hash,
                       std::uint64_t tgt_vocab_hash, const std::string& path);
std::vector<SentencePair> load_corpus_cache(const std::string& path,
                                            std::uint64_t src_vocab_hash,
                                            std::uint64_t tgt_vocab_hash);

}  // namespace searnn
