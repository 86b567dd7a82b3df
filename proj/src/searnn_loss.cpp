#include "searnn/searnn_loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace searnn {

namespace {

// Same max-subtracted evaluation as Tape::log_softmax so plain and on-tape
// losses agree bit-for-bit.
std::vector<double> log_softmax_vec(const std::vector<double>& x) {
  if (x.empty()) throw NumericError("log_softmax over empty vector");
  double max = x[0];
  for (std::size_t i = 1; i < x.size(); ++i) max = std::max(max, x[i]);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += std::exp(x[i] - max);
  const double log_z = max + std::log(sum);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - log_z;
  return out;
}

void check_parallel(const ScoreVector& scores, const CostVector& cv) {
  if (cv.candidates.empty()) throw DataError("empty candidate set");
  if (scores.size() != cv.candidates.size() ||
      cv.costs.size() != cv.candidates.size()) {
    throw DataError("scores, candidates and costs must have equal lengths");
  }
}

// The scored body of a sequence: the leading BOS is framing, generation ends
// at the first EOS, and every other token (including forced specials) counts
// literally. Keeping interior specials makes the gold token the unique
// zero-cost candidate under reference roll-in/roll-out.
TokenSequence cost_body(const TokenSequence& seq) {
  TokenSequence out;
  const std::size_t start = !seq.empty() && seq[0] == kBos ? 1 : 0;
  for (std::size_t i = start; i < seq.size(); ++i) {
    if (seq[i] == kEos) break;
    out.push_back(seq[i]);
  }
  return out;
}

}  // namespace

std::vector<TokenId> sample_candidates(const ScoreVector& scores,
                                       const TokenSequence& ref_target,
                                       std::size_t t, std::size_t top_k,
                                       std::size_t neighbors) {
  const std::size_t vocab = scores.size();
  if (vocab == 0) throw DataError("sample_candidates: empty score vector");
  if (top_k + neighbors < 1) {
    throw ConfigError("top_k + neighbors must be >= 1");
  }
  if (ref_target.size() < 2) {
    throw DataError("sample_candidates: ref_target too short");
  }
  const std::size_t target_size = std::min(top_k + neighbors, vocab);

  std::vector<TokenId> order(vocab);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&scores](TokenId a, TokenId b) {
    if (scores[static_cast<std::size_t>(a)] !=
        scores[static_cast<std::size_t>(b)]) {
      return scores[static_cast<std::size_t>(a)] >
             scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });

  std::vector<bool> taken(vocab, false);
  std::vector<TokenId> out;
  out.reserve(target_size);
  auto push = [&](TokenId tok) {
    if (!taken[static_cast<std::size_t>(tok)]) {
      taken[static_cast<std::size_t>(tok)] = true;
      out.push_back(tok);
    }
  };

  for (std::size_t i = 0; i < std::min(top_k, vocab); ++i) push(order[i]);

  // Ground-truth window around position t+1; offset 0 is the gold next token.
  const long last_pos = static_cast<long>(ref_target.size()) - 1;
  const long lo = static_cast<long>(t) + 1 - static_cast<long>(neighbors / 2);
  const long hi = static_cast<long>(t) + static_cast<long>((neighbors + 1) / 2);
  for (long pos = lo; pos <= hi; ++pos) {
    const long clipped = std::clamp(pos, 1L, last_pos);
    push(ref_target[static_cast<std::size_t>(clipped)]);
  }

  for (std::size_t i = 0; i < vocab && out.size() < target_size; ++i) {
    push(order[i]);
  }
  return out;
}

CostVector compute_cost_vector(const Model& model, const Trajectory& trajectory,
                               std::size_t t,
                               const std::vector<TokenId>& candidates,
                               const PolicyKind& rollout_policy,
                               std::size_t max_len, std::uint64_t pair_seed) {
  if (candidates.empty()) throw DataError("compute_cost_vector: no candidates");
  if (t + 1 >= trajectory.states.size()) {
    throw DataError("compute_cost_vector: step out of range");
  }

  const TokenSequence prefix(trajectory.chosen_tokens.begin(),
                             trajectory.chosen_tokens.begin() +
                                 static_cast<std::ptrdiff_t>(t + 1));
  const TokenSequence ref_body = cost_body(trajectory.ref_target);
  const TokenSequence ref_suffix(
      trajectory.ref_target.begin() +
          std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t + 2),
                                   static_cast<std::ptrdiff_t>(
                                       trajectory.ref_target.size())),
      trajectory.ref_target.end());

  CostVector cv;
  cv.candidates = candidates;
  cv.costs.resize(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const TokenId a = candidates[j];
    DecoderState after = model.advance(trajectory.states[t + 1], a);
    TokenSequence completion =
        roll_out(model, after, a, ref_suffix, rollout_policy, max_len,
                 rollout_stream(pair_seed, t, j));
    TokenSequence full = prefix;
    full.insert(full.end(), completion.begin(), completion.end());
    cv.costs[j] = sequence_cost(cost_body(full), ref_body);
  }
  return cv;
}

std::size_t cost_argmin(const CostVector& cv) {
  if (cv.candidates.empty()) throw DataError("cost_argmin: empty cost vector");
  std::size_t best = 0;
  for (std::size_t j = 1; j < cv.costs.size(); ++j) {
    if (cv.costs[j] < cv.costs[best] ||
        (cv.costs[j] == cv.costs[best] &&
         cv.candidates[j] < cv.candidates[best])) {
      best = j;
    }
  }
  return best;
}

TargetDistribution kl_target(const CostVector& cv, double alpha) {
  if (alpha <= 0.0) throw ConfigError("alpha must be positive");
  if (cv.costs.empty()) throw DataError("kl_target: empty cost vector");
  // Exponents use cost differences from the minimum so that constant cost
  // shifts cancel before exp.
  double min_cost = cv.costs[0];
  for (double c : cv.costs) min_cost = std::min(min_cost, c);
  TargetDistribution dist;
  dist.probs.resize(cv.costs.size());
  double sum = 0.0;
  for (std::size_t j = 0; j < cv.costs.size(); ++j) {
    dist.probs[j] = std::exp(-alpha * (cv.costs[j] - min_cost));
    sum += dist.probs[j];
  }
  for (double& p : dist.probs) p /= sum;
  return dist;
}

double ll_loss_value(const ScoreVector& restricted_scores,
                     const CostVector& cv) {
  check_parallel(restricted_scores, cv);
  const std::vector<double> logp = log_softmax_vec(restricted_scores);
  return -logp[cost_argmin(cv)];
}

double kl_loss_value(const ScoreVector& restricted_scores,
                     const CostVector& cv, double alpha) {
  check_parallel(restricted_scores, cv);
  const std::vector<double> logp = log_softmax_vec(restricted_scores);
  const TargetDistribution pc = kl_target(cv, alpha);
  double acc = 0.0;
  for (std::size_t j = 0; j < logp.size(); ++j) acc += logp[j] * pc.probs[j];
  return -1.0 * acc;
}

Tape::ValueId ll_loss_on_tape(Tape& tape, Tape::ValueId restricted_scores,
                              const CostVector& cv) {
  if (cv.candidates.empty()) throw DataError("empty candidate set");
  if (tape.value(restricted_scores).size() != cv.candidates.size()) {
    throw DataError("restricted scores and candidates must have equal lengths");
  }
  Tape::ValueId logp = tape.log_softmax(restricted_scores);
  return tape.scale(tape.pick(logp, cost_argmin(cv)), -1.0);
}

Tape::ValueId kl_loss_on_tape(Tape& tape, Tape::ValueId restricted_scores,
                              const CostVector& cv, double alpha) {
  if (cv.candidates.empty()) throw DataError("empty candidate set");
  if (tape.value(restricted_scores).size() != cv.candidates.size()) {
    throw DataError("restricted scores and candidates must have equal lengths");
  }
  const TargetDistribution pc = kl_target(cv, alpha);
  Tape::ValueId logp = tape.log_softmax(restricted_scores);
  return tape.scale(
      tape.dot_const(logp, Tensor({pc.probs.size()}, pc.probs)), -1.0);
}

SearnnPlan plan_searnn_pair(const Model& model, const TokenSequence& source,
                            const TokenSequence& ref_target,
                            const SearnnConfig& config,
                            std::uint64_t pair_seed) {
  SearnnPlan plan;
  plan.source = source;
  plan.trajectory = roll_in(model, source, ref_target, config.rollin,
                            rollin_stream(pair_seed));
  const std::size_t steps = plan.trajectory.chosen_tokens.size();
  plan.cell_candidates.resize(steps);
  plan.cell_costs.resize(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    if (config.sampling == SamplingMode::Full) {
      std::vector<TokenId> all(model.dims().tgt_vocab);
      std::iota(all.begin(), all.end(), 0);
      plan.cell_candidates[t] = std::move(all);
    } else {
      plan.cell_candidates[t] =
          sample_candidates(plan.trajectory.score_vectors[t], ref_target, t,
                            config.top_k, config.neighbors);
    }
  }
  return plan;
}

void fill_cell_cost(const Model& model, SearnnPlan& plan, std::size_t t,
                    const SearnnConfig& config, std::uint64_t pair_seed) {
  plan.cell_costs[t] =
      compute_cost_vector(model, plan.trajectory, t, plan.cell_candidates[t],
                          config.rollout, config.max_rollout_len, pair_seed);
}

Tape::ValueId searnn_loss_from_plan(Tape& tape, const Model& model,
                                    const SearnnPlan& plan,
                                    const SearnnConfig& config) {
  const std::size_t steps = plan.trajectory.chosen_tokens.size();
  if (steps == 0) throw DataError("searnn loss: empty trajectory");

  // Re-runs the roll-in trajectory differentiably; the forward values match
  // the frozen-parameter pass bit-for-bit, and gradients reach the encoder.
  Tape::ValueId state = model.encode_on_tape(tape, plan.source);
  std::vector<Tape::ValueId> cell_losses;
  cell_losses.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    auto [scores, next] = model.decode_step_on_tape(
        tape, state, plan.trajectory.chosen_tokens[t]);
    std::vector<std::size_t> idx(plan.cell_candidates[t].size());
    for (std::size_t j = 0; j < idx.size(); ++j) {
      idx[j] = static_cast<std::size_t>(plan.cell_candidates[t][j]);
    }
    Tape::ValueId restricted = tape.gather(scores, std::move(idx));
    cell_losses.push_back(
        config.loss == CostLoss::LL
            ? ll_loss_on_tape(tape, restricted, plan.cell_costs[t])
            : kl_loss_on_tape(tape, restricted, plan.cell_costs[t],
                              config.alpha));
    state = next;
  }
  return tape.mean_scalars(cell_losses);
}

Tape::ValueId searnn_sequence_loss_on_tape(Tape& tape, const Model& model,
                                           const TokenSequence& source,
                                           const TokenSequence& ref_target,
                                           const SearnnConfig& config,
                                           std::uint64_t pair_seed) {
  SearnnPlan plan = plan_searnn_pair(model, source, ref_target, config,
                                     pair_seed);
  for (std::size_t t = 0; t < plan.cell_costs.size(); ++t) {
    fill_cell_cost(model, plan, t, config, pair_seed);
  }
  return searnn_loss_from_plan(tape, model, plan, config);
}

double searnn_sequence_loss(const Model& model, const TokenSequence& source,
                            const TokenSequence& ref_target,
                            const SearnnConfig& config,
                            std::uint64_t pair_seed) {
  Tape tape;
  return tape.scalar_value(searnn_sequence_loss_on_tape(
      tape, model, source, ref_target, config, pair_seed));
}

}  // namespace searnn
