#include "searnn/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>

namespace searnn {

namespace {

using nlohmann::json;

[[noreturn]] void bad_key(const std::string& path, const std::string& key,
                          const std::set<std::string>& allowed) {
  std::string msg = "unknown config key '" + (path.empty() ? key : path + "." + key) +
                    "'; allowed keys here:";
  for (const auto& k : allowed) msg += " " + k;
  throw ConfigError(msg);
}

void check_keys(const json& j, const std::string& path,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) {
    throw ConfigError("config section '" + path + "' must be an object");
  }
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) bad_key(path, key, allowed);
  }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

Objective parse_objective(const std::string& s) {
  if (s == "mle") return Objective::MLE;
  if (s == "searnn") return Objective::SEARNN;
  throw ConfigError("invalid objective '" + s + "'; allowed values: mle, searnn");
}

CostLoss parse_loss(const std::string& s) {
  if (s == "ll") return CostLoss::LL;
  if (s == "kl") return CostLoss::KL;
  throw ConfigError("invalid loss '" + s + "'; allowed values: ll, kl");
}

SamplingMode parse_sampling(const std::string& s) {
  if (s == "full") return SamplingMode::Full;
  if (s == "sampled") return SamplingMode::Sampled;
  throw ConfigError("invalid sampling '" + s +
                    "'; allowed values: full, sampled");
}

std::string objective_name(Objective o) {
  return o == Objective::MLE ? "mle" : "searnn";
}
std::string loss_name(CostLoss l) { return l == CostLoss::LL ? "ll" : "kl"; }
std::string sampling_name(SamplingMode m) {
  return m == SamplingMode::Full ? "full" : "sampled";
}

}  // namespace

RunConfig RunConfig::from_json(const json& j) {
  RunConfig cfg;
  check_keys(j, "", {"data", "vocab", "model", "train", "searnn", "output_dir"});

  if (j.contains("data")) {
    const json& d = j.at("data");
    check_keys(d, "data", {"train_src", "train_tgt", "dev_src", "dev_tgt",
                           "test_src", "test_tgt"});
    get_to(d, "train_src", cfg.data.train_src);
    get_to(d, "train_tgt", cfg.data.train_tgt);
    get_to(d, "dev_src", cfg.data.dev_src);
    get_to(d, "dev_tgt", cfg.data.dev_tgt);
    get_to(d, "test_src", cfg.data.test_src);
    get_to(d, "test_tgt", cfg.data.test_tgt);
  }
  if (j.contains("vocab")) {
    const json& v = j.at("vocab");
    check_keys(v, "vocab", {"src_file", "tgt_file", "max_size", "min_freq"});
    get_to(v, "src_file", cfg.vocab.src_file);
    get_to(v, "tgt_file", cfg.vocab.tgt_file);
    get_to(v, "max_size", cfg.vocab.max_size);
    get_to(v, "min_freq", cfg.vocab.min_freq);
  }
  if (j.contains("model")) {
    const json& m = j.at("model");
    check_keys(m, "model", {"embed_dim", "hidden_dim"});
    get_to(m, "embed_dim", cfg.model.embed);
    get_to(m, "hidden_dim", cfg.model.hidden);
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    check_keys(t, "train",
               {"objective", "lr", "max_steps", "batch_size", "eval_every",
                "anneal_factor", "anneal_patience", "grad_clip", "seed",
                "max_decode_len", "threads"});
    if (t.contains("objective")) {
      cfg.train.objective = parse_objective(t.at("objective").get<std::string>());
    }
    get_to(t, "lr", cfg.train.lr);
    get_to(t, "max_steps", cfg.train.max_steps);
    get_to(t, "batch_size", cfg.train.batch_size);
    get_to(t, "eval_every", cfg.train.eval_every);
    get_to(t, "anneal_factor", cfg.train.anneal_factor);
    get_to(t, "anneal_patience", cfg.train.anneal_patience);
    get_to(t, "grad_clip", cfg.train.grad_clip);
    get_to(t, "seed", cfg.train.seed);
    get_to(t, "max_decode_len", cfg.train.max_decode_len);
    get_to(t, "threads", cfg.train.threads);
  }
  if (j.contains("searnn")) {
    const json& s = j.at("searnn");
    check_keys(s, "searnn",
               {"rollin", "rollout", "loss", "alpha", "sampling", "top_k",
                "neighbors", "max_rollout_len"});
    if (s.contains("rollin")) {
      cfg.train.searnn.rollin = PolicyKind::parse(s.at("rollin").get<std::string>());
    }
    if (s.contains("rollout")) {
      cfg.train.searnn.rollout =
          PolicyKind::parse(s.at("rollout").get<std::string>());
    }
    if (s.contains("loss")) {
      cfg.train.searnn.loss = parse_loss(s.at("loss").get<std::string>());
    }
    get_to(s, "alpha", cfg.train.searnn.alpha);
    if (s.contains("sampling")) {
      cfg.train.searnn.sampling =
          parse_sampling(s.at("sampling").get<std::string>());
    }
    get_to(s, "top_k", cfg.train.searnn.top_k);
    get_to(s, "neighbors", cfg.train.searnn.neighbors);
    get_to(s, "max_rollout_len", cfg.train.searnn.max_rollout_len);
  }
  get_to(j, "output_dir", cfg.output_dir);

  if (cfg.train.searnn.alpha <= 0.0) throw ConfigError("searnn.alpha must be > 0");
  if (cfg.train.searnn.top_k + cfg.train.searnn.neighbors < 1) {
    throw ConfigError("searnn.top_k + searnn.neighbors must be >= 1");
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json j;
  j["data"] = {{"train_src", data.train_src}, {"train_tgt", data.train_tgt},
               {"dev_src", data.dev_src},     {"dev_tgt", data.dev_tgt},
               {"test_src", data.test_src},   {"test_tgt", data.test_tgt}};
  j["vocab"] = {{"src_file", vocab.src_file},
                {"tgt_file", vocab.tgt_file},
                {"max_size", vocab.max_size},
                {"min_freq", vocab.min_freq}};
  j["model"] = {{"embed_dim", model.embed}, {"hidden_dim", model.hidden}};
  j["train"] = {{"objective", objective_name(train.objective)},
                {"lr", train.lr},
                {"max_steps", train.max_steps},
                {"batch_size", train.batch_size},
                {"eval_every", train.eval_every},
                {"anneal_factor", train.anneal_factor},
                {"anneal_patience", train.anneal_patience},
                {"grad_clip", train.grad_clip},
                {"seed", train.seed},
                {"max_decode_len", train.max_decode_len},
                {"threads", train.threads}};
  j["searnn"] = {{"rollin", train.searnn.rollin.to_string()},
                 {"rollout", train.searnn.rollout.to_string()},
                 {"loss", loss_name(train.searnn.loss)},
                 {"alpha", train.searnn.alpha},
                 {"sampling", sampling_name(train.searnn.sampling)},
                 {"top_k", train.searnn.top_k},
                 {"neighbors", train.searnn.neighbors},
                 {"max_rollout_len", train.searnn.max_rollout_len}};
  j["output_dir"] = output_dir;
  return j;
}

std::vector<SentencePair> load_pairs(const Vocabulary& src_vocab,
                                     const Vocabulary& tgt_vocab,
                                     const std::string& src_path,
                                     const std::string& tgt_path) {
  const auto src_lines = read_lines(src_path);
  const auto tgt_lines = read_lines(tgt_path);
  if (src_lines.size() != tgt_lines.size()) {
    throw DataError("line count mismatch: " + src_path + " has " +
                    std::to_string(src_lines.size()) + " lines, " + tgt_path +
                    " has " + std::to_string(tgt_lines.size()));
  }
  std::vector<SentencePair> pairs;
  pairs.reserve(src_lines.size());
  for (std::size_t i = 0; i < src_lines.size(); ++i) {
    pairs.push_back(SentencePair{encode_sentence(src_vocab, src_lines[i]),
                                 encode_sentence(tgt_vocab, tgt_lines[i])});
  }
  return pairs;
}

CorpusData load_corpus(RunConfig& config) {
  if (config.data.train_src.empty() || config.data.train_tgt.empty()) {
    throw ConfigError("data.train_src and data.train_tgt are required");
  }

  CorpusData data;
  if (!config.vocab.src_file.empty()) {
    data.src_vocab = Vocabulary::load(config.vocab.src_file);
    data.tgt_vocab = Vocabulary::load(config.vocab.tgt_file);
  } else {
    data.src_vocab = build_vocab(read_lines(config.data.train_src),
                                 config.vocab.max_size, config.vocab.min_freq);
    data.tgt_vocab = build_vocab(read_lines(config.data.train_tgt),
                                 config.vocab.max_size, config.vocab.min_freq);
    std::filesystem::create_directories(config.output_dir);
    config.vocab.src_file = config.output_dir + "/src.vocab";
    config.vocab.tgt_file = config.output_dir + "/tgt.vocab";
    data.src_vocab.save(config.vocab.src_file);
    data.tgt_vocab.save(config.vocab.tgt_file);
  }

  auto load_split = [&](const std::string& src, const std::string& tgt) {
    if (src.ends_with(".srnc")) {
      return load_corpus_cache(src, data.src_vocab.content_hash(),
                               data.tgt_vocab.content_hash());
    }
    return load_pairs(data.src_vocab, data.tgt_vocab, src, tgt);
  };

  data.train = load_split(config.data.train_src, config.data.train_tgt);
  if (!config.data.dev_src.empty()) {
    data.dev = load_split(config.data.dev_src, config.data.dev_tgt);
  }
  if (!config.data.test_src.empty()) {
    data.test = load_split(config.data.test_src, config.data.test_tgt);
  }

  config.model.src_vocab = data.src_vocab.size();
  config.model.tgt_vocab = data.tgt_vocab.size();
  return data;
}

namespace {
constexpr char kCacheMagic[4] = {'S', 'R', 'N', 'C'};

template <typename T>
void write_raw(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated corpus cache: " + path);
  return v;
}

void write_seq(std::ostream& out, const TokenSequence& seq) {
  write_raw<std::uint32_t>(out, static_cast<std::uint32_t>(seq.size()));
  for (TokenId t : seq) write_raw<std::int32_t>(out, t);
}

TokenSequence read_seq(std::istream& in, const std::string& path) {
  const auto len = read_raw<std::uint32_t>(in, path);
  TokenSequence seq(len);
  for (auto& t : seq) t = read_raw<std::int32_t>(in, path);
  return seq;
}
}  // namespace

void save_corpus_cache(const std::vector<SentencePair>& pairs,
                       std::uint64_t src_vocab_hash,
                       std::uint64_t tgt_vocab_hash, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write corpus cache: " + path);
  out.write(kCacheMagic, 4);
  write_raw<std::uint64_t>(out, src_vocab_hash);
  write_raw<std::uint64_t>(out, tgt_vocab_hash);
  write_raw<std::uint64_t>(out, pairs.size());
  for (const auto& p : pairs) {
    write_seq(out, p.source);
    write_seq(out, p.target);
  }
  if (!out) throw DataError("write failed for corpus cache: " + path);
}

std::vector<SentencePair> load_corpus_cache(const std::string& path,
                                            std::uint64_t src_vocab_hash,
                                            std::uint64_t tgt_vocab_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read corpus cache: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kCacheMagic, 4)) {
    throw DataError("not a corpus cache (bad magic): " + path);
  }
  if (read_raw<std::uint64_t>(in, path) != src_vocab_hash ||
      read_raw<std::uint64_t>(in, path) != tgt_vocab_hash) {
    throw DataError("corpus cache " + path +
                    " was built with different vocabularies; re-run prepare");
  }
  const auto count = read_raw<std::uint64_t>(in, path);
  std::vector<SentencePair> pairs;
  pairs.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    SentencePair p;
    p.source = read_seq(in, path);
    p.target = read_seq(in, path);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

}  // namespace searnn
