#include "searnn/trainer.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "searnn/threading.hpp"

namespace searnn {

namespace {

constexpr std::uint64_t kEpochStreamTag = 0x65706F6368000001ULL;
constexpr std::uint64_t kPairStreamTag = 0x7061697200000001ULL;

double default_clock() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

struct MetricsWriter {
  std::ofstream out;

  explicit MetricsWriter(const std::string& path)
      : out(path, std::ios::binary | std::ios::trunc) {
    if (!out) throw DataError("cannot write metrics log: " + path);
  }

  void write(long step, const std::string& split, double loss, double bleu,
             double lr, double secs) {
    nlohmann::json j;
    j["step"] = step;
    j["split"] = split;
    j["loss"] = loss;
    j["bleu"] = bleu;
    j["lr"] = lr;
    j["secs"] = secs;
    out << j.dump() << '\n';
    out.flush();
  }
};

// Cycles over epochs, rebatching with a fresh per-epoch shuffle stream.
class BatchCursor {
 public:
  BatchCursor(const std::vector<SentencePair>& pairs, std::size_t batch_size,
              std::uint64_t seed)
      : pairs_(pairs), batch_size_(batch_size), seed_(seed) {
    refill();
  }

  const Batch& next() {
    if (index_ >= batches_.size()) {
      ++epoch_;
      refill();
    }
    return batches_[index_++];
  }

 private:
  void refill() {
    batches_ = make_batches(pairs_, batch_size_,
                            derive_stream(seed_, kEpochStreamTag, epoch_));
    index_ = 0;
    if (batches_.empty()) throw DataError("training corpus is empty");
  }

  const std::vector<SentencePair>& pairs_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<Batch> batches_;
  std::size_t index_ = 0;
};

}  // namespace

double evaluate_bleu(const Model& model, const std::vector<SentencePair>& pairs,
                     std::size_t max_decode_len) {
  std::vector<TokenSequence> hyps, refs;
  hyps.reserve(pairs.size());
  refs.reserve(pairs.size());
  for (const auto& pair : pairs) {
    hyps.push_back(strip_specials(model.greedy_decode(pair.source, max_decode_len)));
    refs.push_back(strip_specials(pair.target));
  }
  return corpus_bleu(hyps, refs);
}

double evaluate_nll(const Model& model, const std::vector<SentencePair>& pairs) {
  if (pairs.empty()) return 0.0;
  double total = 0.0;
  for (const auto& pair : pairs) {
    total += model.mle_loss(pair.source, pair.target);
  }
  return total / static_cast<double>(pairs.size());
}

TrainResult train(const ModelDims& dims, const TrainConfig& config,
                  const CorpusData& data, const std::string& out_dir,
                  const TrainHooks& hooks) {
  if (config.lr <= 0.0) throw ConfigError("lr must be positive");
  if (config.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (data.train.empty()) throw DataError("no training pairs");

  std::filesystem::create_directories(out_dir);
  const std::string metrics_path = out_dir + "/metrics.jsonl";
  const std::string best_path = out_dir + "/best.srnn";
  const std::string last_path = out_dir + "/last.srnn";

  const auto clock = hooks.time_source ? hooks.time_source : default_clock;
  const double t0 = clock();

  Model model(dims, config.seed);
  CheckpointMeta meta{data.src_vocab.content_hash(),
                      data.tgt_vocab.content_hash(), dims};
  MetricsWriter metrics(metrics_path);
  BatchCursor cursor(data.train, config.batch_size, config.seed);
  AnnealState lr_state(config.lr, config.anneal_factor, config.anneal_patience);

  // Fixed train subsample for the train-split BLEU curve.
  std::vector<SentencePair> train_probe(
      data.train.begin(),
      data.train.begin() +
          static_cast<std::ptrdiff_t>(std::min<std::size_t>(64, data.train.size())));

  TrainResult result;
  result.metrics_path = metrics_path;
  result.last_checkpoint = last_path;

  double window_loss = 0.0;
  long window_count = 0;

  try {
    for (long step = 1; step <= config.max_steps; ++step) {
      const Batch& batch = cursor.next();

      Tape tape;
      std::vector<Tape::ValueId> row_losses;
      row_losses.reserve(batch.rows);

      if (config.objective == Objective::MLE) {
        for (std::size_t r = 0; r < batch.rows; ++r) {
          row_losses.push_back(model.mle_loss_on_tape(
              tape, batch.source_row(r), batch.target_row(r)));
        }
      } else {
        // Roll-in and candidate selection per row, then cost roll-outs over
        // frozen parameters fanned out across (row, cell) tasks.
        std::vector<SearnnPlan> plans(batch.rows);
        std::vector<std::uint64_t> pair_seeds(batch.rows);
        std::vector<std::pair<std::size_t, std::size_t>> tasks;
        for (std::size_t r = 0; r < batch.rows; ++r) {
          pair_seeds[r] = derive_stream(
              config.seed ^ kPairStreamTag, static_cast<std::uint64_t>(step), r);
          plans[r] = plan_searnn_pair(model, batch.source_row(r),
                                      batch.target_row(r), config.searnn,
                                      pair_seeds[r]);
          for (std::size_t t = 0; t < plans[r].cell_costs.size(); ++t) {
            tasks.emplace_back(r, t);
          }
        }
        parallel_for(tasks.size(), config.threads, [&](std::size_t i) {
          auto [r, t] = tasks[i];
          fill_cell_cost(model, plans[r], t, config.searnn, pair_seeds[r]);
        });
        for (std::size_t r = 0; r < batch.rows; ++r) {
          row_losses.push_back(
              searnn_loss_from_plan(tape, model, plans[r], config.searnn));
        }
      }

      Tape::ValueId loss = tape.mean_scalars(row_losses);
      const double loss_value = tape.scalar_value(loss);
      tape.backward(loss);
      model.mutable_params().zero_grads();
      tape.accumulate_param_grads(model.mutable_params());
      if (hooks.after_backward) hooks.after_backward(model.mutable_params(), step);
      clip_gradients(model.mutable_params(), config.grad_clip);
      adam_step(model.mutable_params(), lr_state.lr());

      window_loss += loss_value;
      ++window_count;
      result.steps = step;

      const bool eval_now =
          (config.eval_every > 0 && step % config.eval_every == 0) ||
          step == config.max_steps;
      if (!eval_now) continue;

      const double train_loss = window_loss / static_cast<double>(window_count);
      window_loss = 0.0;
      window_count = 0;
      metrics.write(step, "train", train_loss,
                    evaluate_bleu(model, train_probe, config.max_decode_len),
                    lr_state.lr(), clock() - t0);

      if (!data.dev.empty()) {
        const double dev_bleu =
            evaluate_bleu(model, data.dev, config.max_decode_len);
        const double dev_nll = evaluate_nll(model, data.dev);
        metrics.write(step, "dev", dev_nll, dev_bleu, lr_state.lr(),
                      clock() - t0);
        lr_state.observe(dev_bleu);
        if (lr_state.improved_last()) {
          result.best_dev_bleu = dev_bleu;
          result.best_step = step;
          result.best_checkpoint = best_path;
          save_checkpoint(model, meta, best_path);
        }
      }
      save_checkpoint(model, meta, last_path);
    }
  } catch (const NumericError&) {
    // Keep the last finished state reachable, then surface the failure.
    save_checkpoint(model, meta, last_path);
    throw;
  }

  save_checkpoint(model, meta, last_path);
  if (result.best_checkpoint.empty()) {
    // No dev split (or never evaluated): the last state is the best we have.
    result.best_checkpoint = best_path;
    save_checkpoint(model, meta, best_path);
  }

  if (!data.test.empty()) {
    const LoadedCheckpoint best = load_checkpoint(result.best_checkpoint);
    result.test_bleu =
        evaluate_bleu(best.model, data.test, config.max_decode_len);
    metrics.write(result.steps, "test", evaluate_nll(best.model, data.test),
                  result.test_bleu, lr_state.lr(), clock() - t0);
  }
  return result;
}

}  // namespace searnn
