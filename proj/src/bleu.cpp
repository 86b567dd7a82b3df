#include "searnn/bleu.hpp"

#include <algorithm>
#include <cmath>

namespace searnn {

namespace {
constexpr int kMaxOrder = 4;

// Clipped n-gram matches and candidate n-gram total for one order.
struct OrderCounts {
  long matches = 0;
  long total = 0;
};

OrderCounts clipped_counts(const TokenSequence& candidate,
                           const TokenSequence& reference, int n) {
  OrderCounts out;
  NgramCounts cand = ngram_counts(candidate, n);
  NgramCounts ref = ngram_counts(reference, n);
  for (const auto& [gram, count] : cand) {
    out.total += count;
    auto it = ref.find(gram);
    if (it != ref.end()) out.matches += std::min(count, it->second);
  }
  return out;
}

}  // namespace

NgramCounts ngram_counts(const TokenSequence& seq, int n) {
  if (n < 1 || n > kMaxOrder) {
    throw ConfigError("n-gram order must be in 1..4, got " + std::to_string(n));
  }
  NgramCounts counts;
  if (seq.size() < static_cast<std::size_t>(n)) return counts;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i) {
    TokenSequence gram(seq.begin() + static_cast<std::ptrdiff_t>(i),
                       seq.begin() + static_cast<std::ptrdiff_t>(i + n));
    ++counts[std::move(gram)];
  }
  return counts;
}

double smoothed_sentence_bleu(const TokenSequence& candidate,
                              const TokenSequence& reference) {
  if (candidate.empty()) return 0.0;

  double log_precisions = 0.0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    OrderCounts c = clipped_counts(candidate, reference, n);
    double num, den;
    if (n == 1) {
      num = static_cast<double>(c.matches);
      den = static_cast<double>(c.total);
      if (num <= 0.0) return 0.0;  // no unigram overlap
    } else {
      num = static_cast<double>(c.matches) + 1.0;
      den = static_cast<double>(c.total) + 1.0;
    }
    log_precisions += std::log(num / den);
  }

  double bp = std::min(0.0, 1.0 - static_cast<double>(reference.size()) /
                                      static_cast<double>(candidate.size()));
  return std::exp(bp + log_precisions / kMaxOrder);
}

double sequence_cost(const TokenSequence& candidate,
                     const TokenSequence& reference) {
  if (candidate == reference) return 0.0;
  return 1.0 - smoothed_sentence_bleu(candidate, reference);
}

double corpus_bleu(const std::vector<TokenSequence>& candidates,
                   const std::vector<TokenSequence>& references) {
  if (candidates.size() != references.size()) {
    throw DataError("corpus_bleu: " + std::to_string(candidates.size()) +
                    " candidates vs " + std::to_string(references.size()) +
                    " references");
  }

  long cand_len = 0;
  long ref_len = 0;
  OrderCounts pooled[kMaxOrder];
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    cand_len += static_cast<long>(candidates[i].size());
    ref_len += static_cast<long>(references[i].size());
    for (int n = 1; n <= kMaxOrder; ++n) {
      OrderCounts c = clipped_counts(candidates[i], references[i], n);
      pooled[n - 1].matches += c.matches;
      pooled[n - 1].total += c.total;
    }
  }
  if (cand_len == 0) return 0.0;

  double log_precisions = 0.0;
  for (int n = 1; n <= kMaxOrder; ++n) {
    if (pooled[n - 1].matches <= 0 || pooled[n - 1].total <= 0) return 0.0;
    log_precisions += std::log(static_cast<double>(pooled[n - 1].matches) /
                               static_cast<double>(pooled[n - 1].total));
  }

  double bp = cand_len >= ref_len
                  ? 0.0
                  : 1.0 - static_cast<double>(ref_len) /
                              static_cast<double>(cand_len);
  return std::exp(bp + log_precisions / kMaxOrder);
}

}  // namespace searnn
