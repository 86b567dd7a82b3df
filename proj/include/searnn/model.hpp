#pragma once

#include <limits>
#include <string>
#include <vector>

#include "searnn/gru.hpp"
#include "searnn/tape.hpp"

namespace searnn {

// PAD/BOS logits are masked to this before greedy argmax; finite on purpose,
// -inf breaks downstream arithmetic.
inline constexpr double kMaskedScore = std::numeric_limits<double>::lowest();

struct ModelDims {
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  std::size_t embed = 64;
  std::size_t hidden = 256;
};

struct EncoderOutput {
  std::vector<double> context;  // decoder-hidden-sized summary
  // [src_len][2*hidden] forward/backward states, kept only when requested.
  std::vector<std::vector<double>> per_position_states;
};

struct DecoderState {
  std::vector<double> hidden;
};

using ScoreVector = std::vector<double>;

// Bidirectional single-layer GRU encoder + single-layer GRU decoder with
// per-step vocabulary scores. Inference over const methods is read-only and
// safe to run from many threads over frozen parameters.
class Model {
 public:
  Model(ModelDims dims, std::uint64_t seed);
  explicit Model(ModelDims dims);  // zero-initialized

  const ModelDims& dims() const { return dims_; }
  const ParamStore& params() const { return params_; }
  ParamStore& mutable_params() { return params_; }

  // --- inference path (no tape) ---
  EncoderOutput encode(const TokenSequence& source,
                       bool keep_states = false) const;
  DecoderState init_decoder(const EncoderOutput& enc) const;
  // Feeds prev_token, returns the scores for the next position and the new
  // state. Pure function of (state, token, params).
  std::pair<ScoreVector, DecoderState> decode_step(const DecoderState& state,
                                                   TokenId prev_token) const;
  // The two halves of decode_step, usable separately by roll-outs.
  DecoderState advance(const DecoderState& state, TokenId token) const;
  ScoreVector output_scores(const DecoderState& state) const;

  // BOS-prefixed greedy argmax decode; ties take the lowest token id, PAD and
  // BOS are masked, stops at EOS or after max_len generated tokens.
  TokenSequence greedy_decode(const TokenSequence& source,
                              std::size_t max_len) const;

  // --- differentiable path ---
  Tape::ValueId encode_on_tape(Tape& tape, const TokenSequence& source) const;
  std::pair<Tape::ValueId, Tape::ValueId> decode_step_on_tape(
      Tape& tape, Tape::ValueId state, TokenId prev_token) const;

  // Mean per-token negative log-likelihood of the target under teacher
  // forcing.
  Tape::ValueId mle_loss_on_tape(Tape& tape, const TokenSequence& source,
                                 const TokenSequence& target) const;
  double mle_loss(const TokenSequence& source, const TokenSequence& target) const;

 private:
  void check_token(TokenId token, std::size_t vocab) const;

  ModelDims dims_;
  ParamStore params_;
};

// Lowest-id argmax over a score vector.
std::size_t argmax_lowest_id(const ScoreVector& scores);

}  // namespace searnn
