#include "searnn/batching.hpp"

#include <algorithm>
#include <map>

namespace searnn {

namespace {
constexpr std::size_t kBucketWidth = 4;
}

TokenSequence Batch::source_row(std::size_t r) const {
  auto begin = source_matrix.begin() + static_cast<std::ptrdiff_t>(r * src_width);
  return TokenSequence(begin, begin + static_cast<std::ptrdiff_t>(source_lengths[r]));
}

TokenSequence Batch::target_row(std::size_t r) const {
  auto begin = target_matrix.begin() + static_cast<std::ptrdiff_t>(r * tgt_width);
  return TokenSequence(begin, begin + static_cast<std::ptrdiff_t>(target_lengths[r]));
}

std::vector<Batch> make_batches(const std::vector<SentencePair>& pairs,
                                std::size_t batch_size, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");

  std::map<std::size_t, std::vector<std::size_t>> buckets;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    buckets[pairs[i].source.size() / kBucketWidth].push_back(i);
  }

  SplitMix64 rng(seed);
  std::vector<std::size_t> order;
  order.reserve(pairs.size());
  for (auto& [key, bucket] : buckets) {
    for (std::size_t i = bucket.size(); i > 1; --i) {
      std::swap(bucket[i - 1], bucket[rng.below(i)]);
    }
    order.insert(order.end(), bucket.begin(), bucket.end());
  }

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    std::size_t rows = std::min(batch_size, order.size() - start);
    Batch b;
    b.rows = rows;
    for (std::size_t r = 0; r < rows; ++r) {
      const SentencePair& p = pairs[order[start + r]];
      b.src_width = std::max(b.src_width, p.source.size());
      b.tgt_width = std::max(b.tgt_width, p.target.size());
    }
    b.source_matrix.assign(rows * b.src_width, kPad);
    b.target_matrix.assign(rows * b.tgt_width, kPad);
    for (std::size_t r = 0; r < rows; ++r) {
      const SentencePair& p = pairs[order[start + r]];
      b.source_lengths.push_back(p.source.size());
      b.target_lengths.push_back(p.target.size());
      std::copy(p.source.begin(), p.source.end(),
                b.source_matrix.begin() + static_cast<std::ptrdiff_t>(r * b.src_width));
      std::copy(p.target.begin(), p.target.end(),
                b.target_matrix.begin() + static_cast<std::ptrdiff_t>(r * b.tgt_width));
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace searnn
