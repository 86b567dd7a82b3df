#include "searnn/model.hpp"

#include <cmath>

namespace searnn {

namespace {

std::vector<double> embedding_row(const Tensor& table, TokenId token) {
  const std::size_t d = table.cols();
  const double* row = table.data() + static_cast<std::size_t>(token) * d;
  return std::vector<double>(row, row + d);
}

}  // namespace

std::size_t argmax_lowest_id(const ScoreVector& scores) {
  if (scores.empty()) throw NumericError("argmax over empty score vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

Model::Model(ModelDims dims) : dims_(dims) {
  if (dims_.src_vocab < kNumSpecials || dims_.tgt_vocab < kNumSpecials) {
    throw ConfigError("model vocabularies must include the special tokens");
  }
  params_.add("src_embed", Tensor::matrix(dims_.src_vocab, dims_.embed));
  add_gru_params(params_, "enc_fwd", dims_.embed, dims_.hidden);
  add_gru_params(params_, "enc_bwd", dims_.embed, dims_.hidden);
  params_.add("init.W", Tensor::matrix(dims_.hidden, 2 * dims_.hidden));
  params_.add("init.b", Tensor::vector(dims_.hidden));
  params_.add("tgt_embed", Tensor::matrix(dims_.tgt_vocab, dims_.embed));
  add_gru_params(params_, "dec", dims_.embed, dims_.hidden);
  params_.add("out.W", Tensor::matrix(dims_.tgt_vocab, dims_.hidden));
  params_.add("out.b", Tensor::vector(dims_.tgt_vocab));
}

Model::Model(ModelDims dims, std::uint64_t seed) : Model(dims) {
  init_uniform(params_, seed);
}

void Model::check_token(TokenId token, std::size_t vocab) const {
  if (token < 0 || static_cast<std::size_t>(token) >= vocab) {
    throw DataError("token id " + std::to_string(token) +
                    " out of range for vocabulary of size " +
                    std::to_string(vocab));
  }
}

EncoderOutput Model::encode(const TokenSequence& source,
                            bool keep_states) const {
  if (source.empty()) throw DataError("encode: empty source");
  const Tensor& embed = params_.param("src_embed");
  GruParams fwd = GruParams::view(params_, "enc_fwd");
  GruParams bwd = GruParams::view(params_, "enc_bwd");

  std::vector<std::vector<double>> inputs;
  inputs.reserve(source.size());
  for (TokenId tok : source) {
    check_token(tok, dims_.src_vocab);
    inputs.push_back(embedding_row(embed, tok));
  }

  std::vector<std::vector<double>> fwd_states(source.size());
  std::vector<double> h(dims_.hidden, 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    h = gru_step(fwd, inputs[i], h);
    fwd_states[i] = h;
  }
  std::vector<std::vector<double>> bwd_states(source.size());
  std::vector<double> hb(dims_.hidden, 0.0);
  for (std::size_t i = inputs.size(); i-- > 0;) {
    hb = gru_step(bwd, inputs[i], hb);
    bwd_states[i] = hb;
  }

  // context = tanh(W_init [h_fwd_final; h_bwd_final] + b_init); the backward
  // pass ends at position 0.
  std::vector<double> cat(2 * dims_.hidden);
  std::copy(h.begin(), h.end(), cat.begin());
  std::copy(bwd_states[0].begin(), bwd_states[0].end(),
            cat.begin() + static_cast<std::ptrdiff_t>(dims_.hidden));

  const Tensor& W = params_.param("init.W");
  const Tensor& b = params_.param("init.b");
  EncoderOutput out;
  out.context.resize(dims_.hidden);
  for (std::size_t i = 0; i < dims_.hidden; ++i) {
    double acc = 0.0;
    const double* row = W.data() + i * W.cols();
    for (std::size_t j = 0; j < cat.size(); ++j) acc += row[j] * cat[j];
    out.context[i] = std::tanh(acc + b[i]);
  }

  if (keep_states) {
    out.per_position_states.resize(source.size());
    for (std::size_t i = 0; i < source.size(); ++i) {
      auto& s = out.per_position_states[i];
      s = fwd_states[i];
      s.insert(s.end(), bwd_states[i].begin(), bwd_states[i].end());
    }
  }
  return out;
}

DecoderState Model::init_decoder(const EncoderOutput& enc) const {
  return DecoderState{enc.context};
}

DecoderState Model::advance(const DecoderState& state, TokenId token) const {
  check_token(token, dims_.tgt_vocab);
  GruParams dec = GruParams::view(params_, "dec");
  std::vector<double> x = embedding_row(params_.param("tgt_embed"), token);
  return DecoderState{gru_step(dec, x, state.hidden)};
}

ScoreVector Model::output_scores(const DecoderState& state) const {
  const Tensor& W = params_.param("out.W");
  const Tensor& b = params_.param("out.b");
  ScoreVector scores(dims_.tgt_vocab);
  for (std::size_t i = 0; i < dims_.tgt_vocab; ++i) {
    double acc = 0.0;
    const double* row = W.data() + i * W.cols();
    for (std::size_t j = 0; j < state.hidden.size(); ++j) {
      acc += row[j] * state.hidden[j];
    }
    scores[i] = acc + b[i];
  }
  return scores;
}

std::pair<ScoreVector, DecoderState> Model::decode_step(
    const DecoderState& state, TokenId prev_token) const {
  DecoderState next = advance(state, prev_token);
  return {output_scores(next), std::move(next)};
}

TokenSequence Model::greedy_decode(const TokenSequence& source,
                                   std::size_t max_len) const {
  if (max_len < 1) throw ConfigError("greedy_decode: max_len must be >= 1");
  EncoderOutput enc = encode(source);
  DecoderState state = init_decoder(enc);
  TokenSequence out{kBos};
  TokenId prev = kBos;
  for (std::size_t step = 0; step < max_len; ++step) {
    auto [scores, next] = decode_step(state, prev);
    scores[kPad] = kMaskedScore;
    scores[kBos] = kMaskedScore;
    TokenId tok = static_cast<TokenId>(argmax_lowest_id(scores));
    out.push_back(tok);
    if (tok == kEos) break;
    state = std::move(next);
    prev = tok;
  }
  return out;
}

Tape::ValueId Model::encode_on_tape(Tape& tape,
                                    const TokenSequence& source) const {
  if (source.empty()) throw DataError("encode: empty source");
  Tape::ValueId embed = tape.param(params_, "src_embed");

  std::vector<Tape::ValueId> inputs;
  inputs.reserve(source.size());
  for (TokenId tok : source) {
    check_token(tok, dims_.src_vocab);
    inputs.push_back(tape.row_select(embed, tok));
  }

  Tape::ValueId zero =
      tape.constant(Tensor({dims_.hidden}, std::vector<double>(dims_.hidden)));
  Tape::ValueId hf = zero;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    hf = gru_step_on_tape(tape, params_, "enc_fwd", inputs[i], hf);
  }
  Tape::ValueId hb = zero;
  for (std::size_t i = inputs.size(); i-- > 0;) {
    hb = gru_step_on_tape(tape, params_, "enc_bwd", inputs[i], hb);
  }

  Tape::ValueId cat = tape.concat(hf, hb);
  Tape::ValueId pre =
      tape.add(tape.matvec(tape.param(params_, "init.W"), cat),
               tape.param(params_, "init.b"));
  return tape.tanh(pre);
}

std::pair<Tape::ValueId, Tape::ValueId> Model::decode_step_on_tape(
    Tape& tape, Tape::ValueId state, TokenId prev_token) const {
  check_token(prev_token, dims_.tgt_vocab);
  Tape::ValueId x =
      tape.row_select(tape.param(params_, "tgt_embed"), prev_token);
  Tape::ValueId next = gru_step_on_tape(tape, params_, "dec", x, state);
  Tape::ValueId scores =
      tape.add(tape.matvec(tape.param(params_, "out.W"), next),
               tape.param(params_, "out.b"));
  return {scores, next};
}

Tape::ValueId Model::mle_loss_on_tape(Tape& tape, const TokenSequence& source,
                                      const TokenSequence& target) const {
  if (target.size() < 2) throw DataError("mle_loss: target too short");
  Tape::ValueId state = encode_on_tape(tape, source);
  std::vector<Tape::ValueId> cell_losses;
  for (std::size_t t = 0; t + 1 < target.size(); ++t) {
    auto [scores, next] = decode_step_on_tape(tape, state, target[t]);
    check_token(target[t + 1], dims_.tgt_vocab);
    Tape::ValueId logp = tape.log_softmax(scores);
    cell_losses.push_back(tape.scale(
        tape.pick(logp, static_cast<std::size_t>(target[t + 1])), -1.0));
    state = next;
  }
  return tape.mean_scalars(cell_losses);
}

double Model::mle_loss(const TokenSequence& source,
                       const TokenSequence& target) const {
  Tape tape;
  return tape.scalar_value(mle_loss_on_tape(tape, source, target));
}

}  // namespace searnn
