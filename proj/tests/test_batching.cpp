#include <doctest.h>

#include <algorithm>
#include <set>

#include "searnn/batching.hpp"

using namespace searnn;

namespace {

SentencePair make_pair(std::size_t src_len, TokenId fill) {
  SentencePair p;
  p.source.push_back(kBos);
  for (std::size_t i = 0; i + 2 < src_len; ++i) p.source.push_back(fill);
  p.source.push_back(kEos);
  p.target = p.source;
  return p;
}

}  // namespace

TEST_CASE("single pair, large batch") {
  std::vector<SentencePair> pairs = {make_pair(4, 5)};
  auto batches = make_batches(pairs, 4, 1);
  REQUIRE(batches.size() == 1);
  CHECK(batches[0].rows == 1);
  CHECK(batches[0].source_row(0) == pairs[0].source);
}

TEST_CASE("batch sizes 2,2,1 for five pairs") {
  std::vector<SentencePair> pairs;
  for (int i = 0; i < 5; ++i) pairs.push_back(make_pair(4, 4 + i));
  auto batches = make_batches(pairs, 2, 9);
  REQUIRE(batches.size() == 3);
  std::multiset<std::size_t> sizes;
  for (const auto& b : batches) sizes.insert(b.rows);
  CHECK(sizes == std::multiset<std::size_t>{1, 2, 2});
}

TEST_CASE("identical seed gives identical batches, coverage holds") {
  SplitMix64 rng(21);
  std::vector<SentencePair> pairs;
  for (int i = 0; i < 37; ++i) {
    pairs.push_back(make_pair(3 + rng.below(14), static_cast<TokenId>(4 + rng.below(9))));
  }
  auto a = make_batches(pairs, 5, 77);
  auto b = make_batches(pairs, 5, 77);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].source_matrix == b[i].source_matrix);
    CHECK(a[i].target_matrix == b[i].target_matrix);
    CHECK(a[i].source_lengths == b[i].source_lengths);
  }

  // One epoch covers the input multiset exactly once.
  std::multiset<TokenSequence> seen, expected;
  for (const auto& p : pairs) expected.insert(p.source);
  for (const auto& batch : a) {
    for (std::size_t r = 0; r < batch.rows; ++r) {
      seen.insert(batch.source_row(r));
      // PAD beyond the recorded length
      for (std::size_t c = batch.source_lengths[r]; c < batch.src_width; ++c) {
        CHECK(batch.source_matrix[r * batch.src_width + c] == kPad);
      }
    }
  }
  CHECK(seen == expected);

  auto c = make_batches(pairs, 5, 78);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size() && !any_diff; ++i) {
    any_diff = a[i].source_matrix != c[i].source_matrix;
  }
  CHECK(any_diff);  // different seed reshuffles
}

TEST_CASE("batch_size must be positive") {
  CHECK_THROWS_AS(make_batches({}, 0, 1), ConfigError);
}
