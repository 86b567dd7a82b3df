#include "searnn/vocab.hpp"

#include <unicode/errorcode.h>
#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>

namespace searnn {

namespace {

const std::vector<std::string> kSpecialTokens = {"<pad>", "<bos>", "<eos>",
                                                 "<unk>"};

std::string nfc_normalize(const std::string& line) {
  icu::ErrorCode status;
  const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
  if (status.isFailure()) {
    throw DataError("ICU NFC normalizer unavailable: " +
                    std::string(status.errorName()));
  }
  icu::UnicodeString src = icu::UnicodeString::fromUTF8(line);
  icu::UnicodeString dst = nfc->normalize(src, status);
  if (status.isFailure()) {
    throw DataError("NFC normalization failed: " +
                    std::string(status.errorName()));
  }
  std::string out;
  dst.toUTF8String(out);
  return out;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' ||
         c == '\f';
}

}  // namespace

Vocabulary::Vocabulary() {
  for (const auto& tok : kSpecialTokens) add_token(tok);
}

void Vocabulary::add_token(const std::string& token) {
  token_to_id_.emplace(token, static_cast<TokenId>(id_to_token_.size()));
  id_to_token_.push_back(token);
}

TokenId Vocabulary::id_of(const std::string& token) const {
  auto it = token_to_id_.find(token);
  return it == token_to_id_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(const std::string& token) const {
  return token_to_id_.count(token) > 0;
}

const std::string& Vocabulary::token_of(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
    throw DataError("token id " + std::to_string(id) +
                    " out of range for vocabulary of size " +
                    std::to_string(id_to_token_.size()));
  }
  return id_to_token_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocabulary::content_hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](char c) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  };
  for (const auto& tok : id_to_token_) {
    for (char c : tok) feed(c);
    feed('\n');
  }
  return h;
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write vocabulary file: " + path);
  for (const auto& tok : id_to_token_) out << tok << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read vocabulary file: " + path);
  Vocabulary vocab;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no < kSpecialTokens.size()) {
      if (line != kSpecialTokens[line_no]) {
        throw DataError("vocabulary file " + path + " line " +
                        std::to_string(line_no + 1) + " must be '" +
                        kSpecialTokens[line_no] + "', got '" + line + "'");
      }
    } else {
      if (vocab.contains(line)) {
        throw DataError("duplicate token '" + line + "' in " + path);
      }
      vocab.add_token(line);
    }
    ++line_no;
  }
  if (line_no < kSpecialTokens.size()) {
    throw DataError("vocabulary file " + path + " is missing special tokens");
  }
  return vocab;
}

std::vector<std::string> tokenize(const std::string& line) {
  const std::string norm = nfc_normalize(line);
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < norm.size()) {
    while (i < norm.size() && is_space(norm[i])) ++i;
    std::size_t start = i;
    while (i < norm.size() && !is_space(norm[i])) ++i;
    if (i > start) tokens.push_back(norm.substr(start, i - start));
  }
  return tokens;
}

Vocabulary build_vocab(const std::vector<std::string>& lines,
                       std::size_t max_size, std::size_t min_freq) {
  if (max_size < kNumSpecials) {
    throw ConfigError("vocabulary max_size must be at least " +
                      std::to_string(kNumSpecials));
  }
  if (min_freq < 1) throw ConfigError("vocabulary min_freq must be >= 1");

  struct Entry {
    std::string token;
    std::size_t freq = 0;
    std::size_t first_seen = 0;
  };
  std::unordered_map<std::string, std::size_t> index;
  std::vector<Entry> entries;
  std::size_t position = 0;
  for (const auto& line : lines) {
    for (auto& tok : tokenize(line)) {
      auto [it, inserted] = index.emplace(tok, entries.size());
      if (inserted) entries.push_back({std::move(tok), 1, position});
      else ++entries[it->second].freq;
      ++position;
    }
  }

  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.freq != b.freq) return a.freq > b.freq;
    return a.first_seen < b.first_seen;
  });

  Vocabulary vocab;
  for (const auto& e : entries) {
    if (vocab.size() >= max_size) break;
    if (e.freq < min_freq) break;
    vocab.add_token(e.token);
  }
  return vocab;
}

TokenSequence encode_sentence(const Vocabulary& vocab,
                              const std::string& line) {
  TokenSequence seq;
  seq.push_back(kBos);
  for (const auto& tok : tokenize(line)) seq.push_back(vocab.id_of(tok));
  seq.push_back(kEos);
  return seq;
}

std::string decode_sentence(const Vocabulary& vocab, const TokenSequence& seq) {
  std::string out;
  for (TokenId id : seq) {
    if (id == kPad || id == kBos || id == kEos) continue;
    if (!out.empty()) out += ' ';
    out += vocab.token_of(id);
  }
  return out;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open file: " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace searnn
