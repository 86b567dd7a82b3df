#pragma once

#include <string>
#include <vector>

#include "searnn/model.hpp"

namespace searnn {

// Reference follows ground truth, Learned follows the model argmax, Mixed
// draws reference-vs-learned per step with probability p.
struct PolicyKind {
  enum class Type { Reference, Learned, Mixed };
  Type type = Type::Reference;
  double mix_p = 0.5;

  static PolicyKind reference() { return {Type::Reference, 0.0}; }
  static PolicyKind learned() { return {Type::Learned, 0.0}; }
  static PolicyKind mixed(double p);
  // "reference" | "learned" | "mixed:<p>"
  static PolicyKind parse(const std::string& text);
  std::string to_string() const;
};

// Per-step decision of a policy; Mixed consumes one draw from rng.
bool picks_reference(const PolicyKind& policy, SplitMix64& rng);

// A roll-in record: states[i+1] results from feeding chosen_tokens[i] to
// states[i], and score_vectors[i] are the logits produced alongside.
struct Trajectory {
  std::vector<DecoderState> states;        // per step 0..T
  TokenSequence chosen_tokens;             // T fed tokens, [0] is BOS
  std::vector<ScoreVector> score_vectors;  // T score vectors
  TokenSequence ref_target;
};

// Runs the decoder for |ref_target|-1 steps. Step 0 always feeds BOS; later
// steps feed the ground-truth token (Reference), the previous argmax
// (Learned), or a per-step seeded Bernoulli choice of the two (Mixed).
Trajectory roll_in(const Model& model, const TokenSequence& source,
                   const TokenSequence& ref_target, const PolicyKind& policy,
                   std::uint64_t rng_seed);

// Completes a sequence after forced_token was fed (state_after_forced is the
// resulting decoder state). Returns [forced_token, ...]; Reference emits the
// ground-truth continuation positionally, padding with EOS beyond
// |ref_suffix|; Learned feeds its own argmax. Stops at EOS or after max_len
// emissions past the forced token.
TokenSequence roll_out(const Model& model, const DecoderState& state_after_forced,
                       TokenId forced_token, const TokenSequence& ref_suffix,
                       const PolicyKind& policy, std::size_t max_len,
                       std::uint64_t rng_seed);

}  // namespace searnn
