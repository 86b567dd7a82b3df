#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace searnn {

using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Reserved token ids. Loss masking and padding rely on these being 0..3.
inline constexpr TokenId kPad = 0;
inline constexpr TokenId kBos = 1;
inline constexpr TokenId kEos = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr int kNumSpecials = 4;

// Error taxonomy; the CLI maps these onto exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Removes PAD/BOS/EOS everywhere; UNK stays, it is an ordinary token for
// scoring purposes.
inline TokenSequence strip_specials(const TokenSequence& seq) {
  TokenSequence out;
  out.reserve(seq.size());
  for (TokenId t : seq) {
    if (t != kPad && t != kBos && t != kEos) out.push_back(t);
  }
  return out;
}

// --- Deterministic RNG -----------------------------------------------------
//
// All stochastic choices in the toolkit run on SplitMix64 streams so results
// are bit-identical across platforms and thread schedules. Streams are derived
// per task with derive_stream(); the derivation is part of the reproducibility
// contract (the roll-out oracle in the tests re-derives the same streams).

inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b) {
  return mix64(seed ^ mix64(a ^ mix64(b)));
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next() % n; }

 private:
  std::uint64_t state_;
};

}  // namespace searnn
