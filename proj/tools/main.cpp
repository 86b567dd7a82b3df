#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "searnn/config.hpp"
#include "searnn/gradcheck.hpp"

namespace fs = std::filesystem;
using namespace searnn;

namespace {

// Exit codes: 0 ok, 2 config/validation, 3 data, 4 numeric failure.
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct VocabPaths {
  std::string src;
  std::string tgt;
};

// Vocab files default to src.vocab/tgt.vocab next to the checkpoint.
VocabPaths resolve_vocabs(const std::string& checkpoint_path,
                          std::string src_vocab, std::string tgt_vocab) {
  const fs::path dir = fs::path(checkpoint_path).parent_path();
  if (src_vocab.empty()) src_vocab = (dir / "src.vocab").string();
  if (tgt_vocab.empty()) tgt_vocab = (dir / "tgt.vocab").string();
  return {src_vocab, tgt_vocab};
}

struct LoadedModel {
  Vocabulary src_vocab;
  Vocabulary tgt_vocab;
  Model model;
};

LoadedModel load_model_with_vocabs(const std::string& checkpoint_path,
                                   const VocabPaths& vocabs) {
  Vocabulary src = Vocabulary::load(vocabs.src);
  Vocabulary tgt = Vocabulary::load(vocabs.tgt);
  LoadedCheckpoint ck = load_checkpoint(checkpoint_path);
  require_vocab_match(ck.meta, src.content_hash(), tgt.content_hash());
  return LoadedModel{std::move(src), std::move(tgt), std::move(ck.model)};
}

int cmd_prepare(const std::string& src_path, const std::string& tgt_path,
                const std::string& out_dir, std::size_t vocab_size,
                std::size_t min_freq) {
  const auto src_lines = read_lines(src_path);
  const auto tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw DataError("line count mismatch: " + src_path + " has " +
                    std::to_string(src_lines.size()) + " lines, " + tgt_path +
                    " has " + std::to_string(tgt_lines.size()));
  }

  Vocabulary src_vocab = build_vocab(src_lines, vocab_size, min_freq);
  Vocabulary tgt_vocab = build_vocab(tgt_lines, vocab_size, min_freq);
  std::vector<SentencePair> pairs =
      load_pairs(src_vocab, tgt_vocab, src_path, tgt_path);

  fs::create_directories(out_dir);
  src_vocab.save(out_dir + "/src.vocab");
  tgt_vocab.save(out_dir + "/tgt.vocab");
  save_corpus_cache(pairs, src_vocab.content_hash(), tgt_vocab.content_hash(),
                    out_dir + "/corpus.srnc");

  std::map<std::size_t, std::size_t> histogram;
  for (const auto& p : pairs) ++histogram[p.source.size() - 2];
  std::cout << "pairs: " << pairs.size() << "\n"
            << "source vocab: " << src_vocab.size()
            << "  target vocab: " << tgt_vocab.size() << "\n"
            << "source length histogram (tokens: pairs):\n";
  for (const auto& [len, count] : histogram) {
    std::cout << "  " << len << ": " << count << "\n";
  }
  std::cout << "wrote " << out_dir << "/{src.vocab,tgt.vocab,corpus.srnc}\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& objective,
              const std::string& out_dir, long max_steps, long seed,
              long threads) {
  RunConfig config = RunConfig::from_file(config_path);
  if (!objective.empty()) {
    config.train.objective = objective == "mle" ? Objective::MLE
                             : objective == "searnn"
                                 ? Objective::SEARNN
                                 : throw ConfigError(
                                       "invalid objective '" + objective +
                                       "'; allowed values: mle, searnn");
  }
  if (!out_dir.empty()) config.output_dir = out_dir;
  if (max_steps > 0) config.train.max_steps = max_steps;
  if (seed >= 0) config.train.seed = static_cast<std::uint64_t>(seed);
  if (threads > 0) config.train.threads = static_cast<std::size_t>(threads);

  CorpusData data = load_corpus(config);
  fs::create_directories(config.output_dir);
  {
    std::ofstream out(config.output_dir + "/config.resolved.json");
    out << config.to_json().dump(2) << "\n";
  }

  std::cout << "training objective=" << (config.train.objective == Objective::MLE
                                             ? "mle"
                                             : "searnn")
            << " train_pairs=" << data.train.size()
            << " dev_pairs=" << data.dev.size()
            << " test_pairs=" << data.test.size()
            << " src_vocab=" << data.src_vocab.size()
            << " tgt_vocab=" << data.tgt_vocab.size() << std::endl;

  TrainResult result =
      train(config.model, config.train, data, config.output_dir);
  std::cout << "steps: " << result.steps << "\n"
            << "best dev BLEU: " << result.best_dev_bleu << " at step "
            << result.best_step << "\n";
  if (result.test_bleu >= 0.0) {
    std::cout << "test BLEU (best checkpoint): " << result.test_bleu << "\n";
  }
  std::cout << "metrics: " << result.metrics_path << "\n"
            << "best checkpoint: " << result.best_checkpoint << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint, const std::string& src_path,
                 const std::string& tgt_path, const VocabPaths& vocabs,
                 std::size_t max_len) {
  LoadedModel lm = load_model_with_vocabs(checkpoint, vocabs);
  std::vector<SentencePair> pairs =
      load_pairs(lm.src_vocab, lm.tgt_vocab, src_path, tgt_path);
  if (pairs.empty()) throw DataError("evaluation file is empty: " + src_path);

  const double bleu = evaluate_bleu(lm.model, pairs, max_len);
  const double nll = evaluate_nll(lm.model, pairs);
  std::cout << "corpus BLEU: " << bleu << "  (pairs: " << pairs.size() << ")\n";

  const fs::path metrics =
      fs::path(checkpoint).parent_path() / "metrics.jsonl";
  std::ofstream out(metrics, std::ios::app);
  nlohmann::json j;
  j["step"] = -1;
  j["split"] = "test";
  j["loss"] = nll;
  j["bleu"] = bleu;
  j["lr"] = 0.0;
  j["secs"] = 0.0;
  out << j.dump() << "\n";
  return 0;
}

int cmd_translate(const std::string& checkpoint, const std::string& input,
                  const VocabPaths& vocabs, std::size_t max_len) {
  LoadedModel lm = load_model_with_vocabs(checkpoint, vocabs);

  std::vector<std::string> lines;
  if (input.empty() || input == "-") {
    std::string line;
    while (std::getline(std::cin, line)) lines.push_back(line);
  } else {
    lines = read_lines(input);
  }
  for (const auto& line : lines) {
    if (tokenize(line).empty()) {
      std::cout << "\n";
      continue;
    }
    TokenSequence source = encode_sentence(lm.src_vocab, line);
    TokenSequence hyp = lm.model.greedy_decode(source, max_len);
    std::cout << decode_sentence(lm.tgt_vocab, hyp) << "\n";
  }
  return 0;
}

int cmd_gradcheck(int seeds, double tol, bool negative_control) {
  if (negative_control) {
    const double err = gradcheck_negative_control();
    std::cout << "negative control (corrupted backward rule): max rel err = "
              << err << "\n";
    if (err > tol) {
      std::cout << "detected as expected: FAIL >> tol " << tol << "\n";
      return 0;
    }
    std::cout << "NOT detected; the checker is broken\n";
    return kExitNumeric;
  }

  GradcheckReport report = run_gradcheck(seeds, tol);
  for (const auto& item : report.items) {
    std::printf("%-14s max rel err %.3e  (worst: %s)  %s\n", item.name.c_str(),
                item.max_rel_err, item.worst_param.c_str(),
                item.passed ? "PASS" : "FAIL");
  }
  std::printf("model parameters (worst over layer checks, %d seeds):\n",
              report.seeds);
  for (const auto& [name, err] : report.parameter_details) {
    std::printf("  %-14s %.3e\n", name.c_str(), err);
  }
  if (!report.all_passed()) {
    std::cout << "gradcheck FAILED (tol " << tol << ")\n";
    return kExitNumeric;
  }
  std::cout << "gradcheck passed (tol " << tol << ", " << report.seeds
            << " seeds)\n";
  return 0;
}

int cmd_rollout_debug(const std::string& checkpoint, const std::string& src_path,
                      const std::string& tgt_path, const VocabPaths& vocabs,
                      std::size_t pair_index, std::size_t step,
                      const std::string& rollin, const std::string& rollout,
                      bool full_vocab, long seed) {
  LoadedModel lm = load_model_with_vocabs(checkpoint, vocabs);
  std::vector<SentencePair> pairs =
      load_pairs(lm.src_vocab, lm.tgt_vocab, src_path, tgt_path);
  if (pair_index >= pairs.size()) {
    throw DataError("pair index " + std::to_string(pair_index) +
                    " out of range (corpus has " +
                    std::to_string(pairs.size()) + " pairs)");
  }
  const SentencePair& pair = pairs[pair_index];
  if (step + 1 >= pair.target.size()) {
    throw DataError("step " + std::to_string(step) +
                    " out of range for a target of length " +
                    std::to_string(pair.target.size()));
  }

  SearnnConfig cfg;
  cfg.rollin = PolicyKind::parse(rollin);
  cfg.rollout = PolicyKind::parse(rollout);
  cfg.sampling = full_vocab ? SamplingMode::Full : SamplingMode::Sampled;

  const std::uint64_t pair_seed =
      derive_stream(static_cast<std::uint64_t>(seed), 1, pair_index);
  SearnnPlan plan =
      plan_searnn_pair(lm.model, pair.source, pair.target, cfg, pair_seed);
  fill_cell_cost(lm.model, plan, step, cfg, pair_seed);

  const Trajectory& traj = plan.trajectory;
  std::cout << "source: " << decode_sentence(lm.src_vocab, pair.source) << "\n"
            << "target: " << decode_sentence(lm.tgt_vocab, pair.target) << "\n"
            << "roll-in (" << rollin << ") prefix through step " << step
            << ":";
  for (std::size_t i = 0; i + 1 <= step + 1 && i < traj.chosen_tokens.size();
       ++i) {
    std::cout << " " << lm.tgt_vocab.token_of(traj.chosen_tokens[i]);
  }
  const CostVector& cv = plan.cell_costs[step];
  std::cout << "\ncandidates at step " << step << " (" << cv.candidates.size()
            << "):\n";
  const TokenId gold = pair.target[step + 1];
  for (std::size_t j = 0; j < cv.candidates.size(); ++j) {
    const TokenId a = cv.candidates[j];
    DecoderState after = lm.model.advance(traj.states[step + 1], a);
    TokenSequence completion = roll_out(
        lm.model, after, a,
        TokenSequence(pair.target.begin() +
                          std::min<std::ptrdiff_t>(
                              static_cast<std::ptrdiff_t>(step + 2),
                              static_cast<std::ptrdiff_t>(pair.target.size())),
                      pair.target.end()),
        cfg.rollout, cfg.max_rollout_len, rollout_stream(pair_seed, step, j));
    std::printf("  %-12s cost %.6f %s | completion: %s\n",
                lm.tgt_vocab.token_of(a).c_str(), cv.costs[j],
                a == gold ? "(gold)" : "      ",
                decode_sentence(lm.tgt_vocab, completion).c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SEARNN / MLE sequence-to-sequence training toolkit"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "Build vocabularies and an encoded corpus cache");
  std::string p_src, p_tgt, p_out;
  std::size_t p_vocab_size = 8000, p_min_freq = 1;
  prepare->add_option("--src", p_src, "source text file")->required();
  prepare->add_option("--tgt", p_tgt, "target text file")->required();
  prepare->add_option("--out", p_out, "output directory")->required();
  prepare->add_option("--vocab-size", p_vocab_size, "max vocabulary size");
  prepare->add_option("--min-freq", p_min_freq, "min token frequency");

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model from a config");
  std::string t_config, t_objective, t_out;
  long t_max_steps = -1, t_seed = -1, t_threads = -1;
  train_cmd->add_option("--config", t_config, "run config (JSON)")->required();
  train_cmd->add_option("--objective", t_objective, "mle|searnn override");
  train_cmd->add_option("--out", t_out, "output directory override");
  train_cmd->add_option("--max-steps", t_max_steps, "max steps override");
  train_cmd->add_option("--seed", t_seed, "seed override");
  train_cmd->add_option("--threads", t_threads, "roll-out worker cap");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Corpus BLEU of a checkpoint");
  std::string e_ck, e_src, e_tgt, e_src_vocab, e_tgt_vocab;
  std::size_t e_max_len = 64;
  eval_cmd->add_option("--checkpoint", e_ck, "checkpoint file")->required();
  eval_cmd->add_option("--src", e_src, "source text file")->required();
  eval_cmd->add_option("--tgt", e_tgt, "reference text file")->required();
  eval_cmd->add_option("--src-vocab", e_src_vocab,
                       "source vocab (default: next to checkpoint)");
  eval_cmd->add_option("--tgt-vocab", e_tgt_vocab,
                       "target vocab (default: next to checkpoint)");
  eval_cmd->add_option("--max-len", e_max_len, "max decode length");

  // translate
  auto* translate_cmd =
      app.add_subcommand("translate", "Greedy-translate lines");
  std::string tr_ck, tr_input = "-", tr_src_vocab, tr_tgt_vocab;
  std::size_t tr_max_len = 64;
  translate_cmd->add_option("--checkpoint", tr_ck, "checkpoint file")
      ->required();
  translate_cmd->add_option("--input", tr_input, "input file or - for stdin");
  translate_cmd->add_option("--src-vocab", tr_src_vocab, "source vocab");
  translate_cmd->add_option("--tgt-vocab", tr_tgt_vocab, "target vocab");
  translate_cmd->add_option("--max-len", tr_max_len, "max decode length");

  // gradcheck
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference gradient checks");
  int g_seeds = 20;
  double g_tol = 1e-4;
  bool g_negative = false;
  grad_cmd->add_option("--seeds", g_seeds, "random seeds per check");
  grad_cmd->add_option("--tol", g_tol, "relative error tolerance");
  grad_cmd->add_flag("--negative-control", g_negative,
                     "run a corrupted backward rule and expect detection");

  // rollout-debug
  auto* rd_cmd = app.add_subcommand(
      "rollout-debug", "Dump candidates, completions and costs for one cell");
  std::string r_ck, r_src, r_tgt, r_src_vocab, r_tgt_vocab;
  std::string r_rollin = "reference", r_rollout = "reference";
  std::size_t r_pair = 0, r_step = 0;
  bool r_full = false;
  long r_seed = 1;
  rd_cmd->add_option("--checkpoint", r_ck, "checkpoint file")->required();
  rd_cmd->add_option("--src", r_src, "source text file")->required();
  rd_cmd->add_option("--tgt", r_tgt, "target text file")->required();
  rd_cmd->add_option("--src-vocab", r_src_vocab, "source vocab");
  rd_cmd->add_option("--tgt-vocab", r_tgt_vocab, "target vocab");
  rd_cmd->add_option("--pair", r_pair, "pair index")->required();
  rd_cmd->add_option("--step", r_step, "decoder cell index")->required();
  rd_cmd->add_option("--rollin", r_rollin, "roll-in policy");
  rd_cmd->add_option("--rollout", r_rollout, "roll-out policy");
  rd_cmd->add_flag("--full-vocab", r_full, "cost every vocabulary token");
  rd_cmd->add_option("--seed", r_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (prepare->parsed()) {
      return cmd_prepare(p_src, p_tgt, p_out, p_vocab_size, p_min_freq);
    }
    if (train_cmd->parsed()) {
      return cmd_train(t_config, t_objective, t_out, t_max_steps, t_seed,
                       t_threads);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(e_ck, e_src, e_tgt,
                          resolve_vocabs(e_ck, e_src_vocab, e_tgt_vocab),
                          e_max_len);
    }
    if (translate_cmd->parsed()) {
      return cmd_translate(tr_ck, tr_input,
                           resolve_vocabs(tr_ck, tr_src_vocab, tr_tgt_vocab),
                           tr_max_len);
    }
    if (grad_cmd->parsed()) {
      return cmd_gradcheck(g_seeds, g_tol, g_negative);
    }
    if (rd_cmd->parsed()) {
      return cmd_rollout_debug(r_ck, r_src, r_tgt,
                               resolve_vocabs(r_ck, r_src_vocab, r_tgt_vocab),
                               r_pair, r_step, r_rollin, r_rollout, r_full,
                               r_seed);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  }
  return 0;
}
