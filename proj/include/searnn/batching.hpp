#pragma once

#include <cstddef>
#include <vector>

#include "searnn/common.hpp"

namespace searnn {

// BOS-prefixed, EOS-suffixed integer-coded sentence pair.
struct SentencePair {
  TokenSequence source;
  TokenSequence target;
};

// PAD-filled token grids with per-row true lengths.
struct Batch {
  std::size_t rows = 0;
  std::size_t src_width = 0;
  std::size_t tgt_width = 0;
  std::vector<TokenId> source_matrix;  // rows x src_width, row-major
  std::vector<TokenId> target_matrix;  // rows x tgt_width, row-major
  std::vector<std::size_t> source_lengths;
  std::vector<std::size_t> target_lengths;

  TokenSequence source_row(std::size_t r) const;
  TokenSequence target_row(std::size_t r) const;
};

// Buckets pairs by source length (bucket width 4), shuffles deterministically
// within buckets, and emits PAD-padded batches covering every pair exactly
// once.
std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                std::size_t batch_size, std::uint64_t seed);

}  // namespace searnn
