#pragma once

#include <map>
#include <vector>

#include "searnn/common.hpp"

namespace searnn {

using NgramCounts = std::map<TokenSequence, int>;

// All contiguous n-grams of seq with multiplicity. Callers strip specials
// first.
NgramCounts ngram_counts(const TokenSequence& seq, int n);

// Sentence-level BLEU-4 usable as a per-sequence cost: exact unigram
// precision, add-one smoothing on numerator and denominator for n in {2,3,4},
// brevity penalty exp(min(0, 1 - |ref|/|cand|)). Empty candidate scores 0.
// Both sequences must have specials stripped.
double smoothed_sentence_bleu(const TokenSequence& candidate,
                              const TokenSequence& reference);

// 1 - smoothed_sentence_bleu; zero exactly when candidate == reference.
double sequence_cost(const TokenSequence& candidate,
                     const TokenSequence& reference);

// Standard unsmoothed corpus BLEU-4 over pooled clipped counts with the
// corpus-level brevity penalty; 0 when any pooled precision is 0.
double corpus_bleu(const std::vector<TokenSequence>& candidates,
                   const std::vector<TokenSequence>& references);

}  // namespace searnn
