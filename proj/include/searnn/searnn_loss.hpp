#pragma once

#include <vector>

#include "searnn/bleu.hpp"
#include "searnn/policies.hpp"

namespace searnn {

// Per-candidate roll-out costs c_t(a) at one decoder step.
struct CostVector {
  std::vector<TokenId> candidates;  // distinct
  std::vector<double> costs;        // parallel, each in [0,1]
};

// P_C, the cost-derived target distribution over the candidate subset.
struct TargetDistribution {
  std::vector<double> probs;
};

enum class CostLoss { LL, KL };
enum class SamplingMode { Full, Sampled };

struct SearnnConfig {
  PolicyKind rollin = PolicyKind::reference();
  PolicyKind rollout = PolicyKind::mixed(0.5);
  CostLoss loss = CostLoss::KL;
  double alpha = 1.0;
  SamplingMode sampling = SamplingMode::Sampled;
  std::size_t top_k = 15;
  std::size_t neighbors = 10;
  std::size_t max_rollout_len = 64;
};

// Stream derivation tags; part of the reproducibility contract shared with
// the test oracle.
inline constexpr std::uint64_t kRollInStreamTag = 0x726F6C6C696E0001ULL;

inline std::uint64_t rollin_stream(std::uint64_t pair_seed) {
  return derive_stream(pair_seed, kRollInStreamTag, 0);
}
inline std::uint64_t rollout_stream(std::uint64_t pair_seed, std::size_t step,
                                    std::size_t candidate_index) {
  return derive_stream(pair_seed, step, candidate_index);
}

// The top_k best-scored tokens (ties to the lower id), then the ground-truth
// tokens at positions t+1-floor(n/2) .. t+floor((n+1)/2) clipped to
// [1, |ref|-1], deduplicated keeping first occurrence, topped up with
// next-best scored tokens to top_k+neighbors (or the whole vocabulary if
// smaller). With neighbors >= 1 the gold next token is always present.
std::vector<TokenId> sample_candidates(const ScoreVector& scores,
                                       const TokenSequence& ref_target,
                                       std::size_t t, std::size_t top_k = 15,
                                       std::size_t neighbors = 10);

// Rolls out every candidate from the trajectory's state after step t and
// scores the full sequence (roll-in prefix + forced token + completion)
// against the ground truth. The compared body drops the leading BOS, ends at
// the first EOS, and keeps every other token literally.
CostVector compute_cost_vector(const Model& model, const Trajectory& trajectory,
                               std::size_t t,
                               const std::vector<TokenId>& candidates,
                               const PolicyKind& rollout_policy,
                               std::size_t max_len, std::uint64_t pair_seed);

// Index into cost_vector.candidates of the minimum cost; ties break to the
// lowest token id.
std::size_t cost_argmin(const CostVector& cost_vector);

// softmax(-alpha * costs) over the candidate subset.
TargetDistribution kl_target(const CostVector& cost_vector, double alpha);

// Plain-value losses over a restricted score vector (parallel to the
// cost vector's candidates).
double ll_loss_value(const ScoreVector& restricted_scores,
                     const CostVector& cost_vector);
double kl_loss_value(const ScoreVector& restricted_scores,
                     const CostVector& cost_vector, double alpha);

// Differentiable counterparts; costs are constants, gradients flow through
// the scores only.
Tape::ValueId ll_loss_on_tape(Tape& tape, Tape::ValueId restricted_scores,
                              const CostVector& cost_vector);
Tape::ValueId kl_loss_on_tape(Tape& tape, Tape::ValueId restricted_scores,
                              const CostVector& cost_vector, double alpha);

// Roll-in, candidate choice and cost vectors for one pair, separated from the
// differentiable pass so cost roll-outs can run on worker threads.
struct SearnnPlan {
  TokenSequence source;
  Trajectory trajectory;
  std::vector<std::vector<TokenId>> cell_candidates;  // per step t
  std::vector<CostVector> cell_costs;                 // filled per cell
};

SearnnPlan plan_searnn_pair(const Model& model, const TokenSequence& source,
                            const TokenSequence& ref_target,
                            const SearnnConfig& config,
                            std::uint64_t pair_seed);
void fill_cell_cost(const Model& model, SearnnPlan& plan, std::size_t t,
                    const SearnnConfig& config, std::uint64_t pair_seed);

// Mean per-cell cost-sensitive loss along the roll-in trajectory.
Tape::ValueId searnn_loss_from_plan(Tape& tape, const Model& model,
                                    const SearnnPlan& plan,
                                    const SearnnConfig& config);

// Convenience single-call forms.
Tape::ValueId searnn_sequence_loss_on_tape(Tape& tape, const Model& model,
                                           const TokenSequence& source,
                                           const TokenSequence& ref_target,
                                           const SearnnConfig& config,
                                           std::uint64_t pair_seed);
double searnn_sequence_loss(const Model& model, const TokenSequence& source,
                            const TokenSequence& ref_target,
                            const SearnnConfig& config,
                            std::uint64_t pair_seed);

}  // namespace searnn
