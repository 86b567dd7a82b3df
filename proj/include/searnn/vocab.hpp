#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "searnn/common.hpp"

namespace searnn {

// Token <-> id mapping with the four reserved specials at ids 0..3 and all
// remaining ids contiguous from 4, in frequency order.
class Vocabulary {
 public:
  Vocabulary();

  TokenId id_of(const std::string& token) const;  // kUnk when absent
  const std::string& token_of(TokenId id) const;
  bool contains(const std::string& token) const;
  std::size_t size() const { return id_to_token_.size(); }

  // FNV-1a over the token list; checkpoints and corpus caches embed this to
  // refuse mismatched vocabularies.
  std::uint64_t content_hash() const;

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  friend Vocabulary build_vocab(const std::vector<std::string>& lines,
                                std::size_t max_size, std::size_t min_freq);

 private:
  void add_token(const std::string& token);

  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
};

// NFC-normalizes and splits a line on whitespace.
std::vector<std::string> tokenize(const std::string& line);

// Specials plus the most frequent tokens with frequency >= min_freq,
// truncated to max_size total; frequency ties break by first occurrence.
Vocabulary build_vocab(const std::vector<std::string>& lines,
                       std::size_t max_size, std::size_t min_freq);

// [BOS, ids..., EOS]; out-of-vocabulary tokens map to UNK.
TokenSequence encode_sentence(const Vocabulary& vocab, const std::string& line);

// Inverse of encode_sentence modulo whitespace normalization; specials are
// skipped.
std::string decode_sentence(const Vocabulary& vocab, const TokenSequence& seq);

std::vector<std::string> read_lines(const std::string& path);

}  // namespace searnn
