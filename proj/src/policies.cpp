#include "searnn/policies.hpp"

namespace searnn {

PolicyKind PolicyKind::mixed(double p) {
  if (p < 0.0 || p > 1.0) {
    throw ConfigError("mixed policy probability must be in [0,1], got " +
                      std::to_string(p));
  }
  return {Type::Mixed, p};
}

PolicyKind PolicyKind::parse(const std::string& text) {
  if (text == "reference") return reference();
  if (text == "learned") return learned();
  if (text.rfind("mixed:", 0) == 0) {
    try {
      std::size_t used = 0;
      double p = std::stod(text.substr(6), &used);
      if (used == text.size() - 6) return mixed(p);
    } catch (const std::logic_error&) {
    }
  }
  throw ConfigError("invalid policy '" + text +
                    "'; allowed: reference, learned, mixed:<p>");
}

std::string PolicyKind::to_string() const {
  switch (type) {
    case Type::Reference:
      return "reference";
    case Type::Learned:
      return "learned";
    case Type::Mixed:
      return "mixed:" + std::to_string(mix_p);
  }
  return "?";
}

bool picks_reference(const PolicyKind& policy, SplitMix64& rng) {
  switch (policy.type) {
    case PolicyKind::Type::Reference:
      return true;
    case PolicyKind::Type::Learned:
      return false;
    case PolicyKind::Type::Mixed:
      return rng.uniform() < policy.mix_p;
  }
  return true;
}

Trajectory roll_in(const Model& model, const TokenSequence& source,
                   const TokenSequence& ref_target, const PolicyKind& policy,
                   std::uint64_t rng_seed) {
  if (ref_target.size() < 2 || ref_target.front() != kBos ||
      ref_target.back() != kEos) {
    throw DataError("roll_in: ref_target must be BOS-prefixed, EOS-suffixed");
  }
  const std::size_t steps = ref_target.size() - 1;
  SplitMix64 rng(rng_seed);

  Trajectory traj;
  traj.ref_target = ref_target;
  traj.states.reserve(steps + 1);
  traj.states.push_back(model.init_decoder(model.encode(source)));
  for (std::size_t t = 0; t < steps; ++t) {
    TokenId fed;
    if (t == 0) {
      fed = ref_target[0];  // nothing predicted yet
    } else if (picks_reference(policy, rng)) {
      fed = ref_target[t];
    } else {
      fed = static_cast<TokenId>(argmax_lowest_id(traj.score_vectors[t - 1]));
    }
    auto [scores, next] = model.decode_step(traj.states[t], fed);
    traj.chosen_tokens.push_back(fed);
    traj.score_vectors.push_back(std::move(scores));
    traj.states.push_back(std::move(next));
  }
  return traj;
}

TokenSequence roll_out(const Model& model,
                       const DecoderState& state_after_forced,
                       TokenId forced_token, const TokenSequence& ref_suffix,
                       const PolicyKind& policy, std::size_t max_len,
                       std::uint64_t rng_seed) {
  if (forced_token < 0 ||
      static_cast<std::size_t>(forced_token) >= model.dims().tgt_vocab) {
    throw DataError("roll_out: forced token out of range");
  }
  SplitMix64 rng(rng_seed);
  TokenSequence completion{forced_token};
  DecoderState state = state_after_forced;
  while (completion.back() != kEos && completion.size() < max_len + 1) {
    const std::size_t position = completion.size() - 1;  // index into suffix
    TokenId tok;
    if (picks_reference(policy, rng)) {
      tok = position < ref_suffix.size() ? ref_suffix[position] : kEos;
    } else {
      tok = static_cast<TokenId>(argmax_lowest_id(model.output_scores(state)));
    }
    completion.push_back(tok);
    if (tok == kEos) break;
    state = model.advance(state, tok);
  }
  return completion;
}

}  // namespace searnn
