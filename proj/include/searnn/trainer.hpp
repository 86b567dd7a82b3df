#pragma once

#include <functional>
#include <optional>
#include <string>

#include "searnn/batching.hpp"
#include "searnn/checkpoint.hpp"
#include "searnn/optim.hpp"
#include "searnn/searnn_loss.hpp"
#include "searnn/vocab.hpp"

namespace searnn {

enum class Objective { MLE, SEARNN };

struct TrainConfig {
  Objective objective = Objective::MLE;
  SearnnConfig searnn;
  double lr = 1e-3;
  long max_steps = 25000;
  std::size_t batch_size = 32;
  long eval_every = 500;
  double anneal_factor = 0.5;
  int anneal_patience = 3;
  double grad_clip = 5.0;
  std::uint64_t seed = 1;
  std::size_t max_decode_len = 64;
  std::size_t threads = 1;
};

struct CorpusData {
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  std::vector<SentencePair> train;
  std::vector<SentencePair> dev;
  std::vector<SentencePair> test;
};

// Injection points: the clock behind the metrics log's "secs" field (so runs
// can be made byte-reproducible) and a post-backward hook used by tests to
// poison gradients.
struct TrainHooks {
  std::function<double()> time_source;  // seconds, monotonic
  std::function<void(ParamStore&, long step)> after_backward;
};

struct TrainResult {
  long steps = 0;
  double best_dev_bleu = -1.0;
  long best_step = -1;
  double test_bleu = -1.0;  // -1 when no test split
  std::string best_checkpoint;
  std::string last_checkpoint;
  std::string metrics_path;
};

// Greedy-decodes every pair and scores corpus BLEU against the references.
double evaluate_bleu(const Model& model, const std::vector<SentencePair>& pairs,
                     std::size_t max_decode_len);
// Mean teacher-forced per-token negative log-likelihood.
double evaluate_nll(const Model& model, const std::vector<SentencePair>& pairs);

// Deterministic training loop: Adam with reduce-on-plateau annealing,
// periodic dev evaluation, best-dev and last checkpoints, JSON-lines metrics.
// Aborts with NumericError on non-finite losses or gradients, keeping the
// last saved checkpoint on disk.
TrainResult train(const ModelDims& dims, const TrainConfig& config,
                  const CorpusData& data, const std::string& out_dir,
                  const TrainHooks& hooks = {});

}  // namespace searnn
