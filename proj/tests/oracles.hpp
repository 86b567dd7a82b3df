// Test-only reference implementations, written independently of the library
// code paths they check:
//  - naive_* : brute-force n-gram matching and BLEU straight from the formula
//  - straight-line GRU / encoder / scores duplicating the cell equations
//  - a roll-out oracle that re-simulates every (prefix, candidate, completion)
//    from scratch, including the per-(sentence, step, candidate) RNG streams.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "searnn/model.hpp"
#include "searnn/policies.hpp"
#include "searnn/searnn_loss.hpp"

namespace test_oracle {

using searnn::Model;
using searnn::Tensor;
using searnn::TokenId;
using searnn::TokenSequence;

// ---------------------------------------------------------------------------
// Brute-force n-gram counting and BLEU.

// Greedy clipped matching: each reference n-gram can be consumed once.
inline long naive_clipped_matches(const TokenSequence& cand,
                                  const TokenSequence& ref, int n) {
  const auto grams = [n](const TokenSequence& s) {
    std::vector<TokenSequence> out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) {
      out.emplace_back(s.begin() + i, s.begin() + i + n);
    }
    return out;
  };
  std::vector<TokenSequence> cg = grams(cand);
  std::vector<TokenSequence> rg = grams(ref);
  std::vector<bool> used(rg.size(), false);
  long matches = 0;
  for (const auto& g : cg) {
    for (std::size_t k = 0; k < rg.size(); ++k) {
      if (!used[k] && rg[k] == g) {
        used[k] = true;
        ++matches;
        break;
      }
    }
  }
  return matches;
}

inline long naive_total_ngrams(const TokenSequence& s, int n) {
  return s.size() + 1 >= static_cast<std::size_t>(n + 1)
             ? static_cast<long>(s.size()) - n + 1
             : 0;
}

inline double naive_smoothed_bleu(const TokenSequence& cand,
                                  const TokenSequence& ref) {
  if (cand.empty()) return 0.0;
  double product = 1.0;
  for (int n = 1; n <= 4; ++n) {
    const double m = static_cast<double>(naive_clipped_matches(cand, ref, n));
    const double t = static_cast<double>(naive_total_ngrams(cand, n));
    const double p = n == 1 ? (t > 0 ? m / t : 0.0) : (m + 1.0) / (t + 1.0);
    product *= p;
  }
  const double bp =
      cand.size() >= ref.size()
          ? 1.0
          : std::exp(1.0 - static_cast<double>(ref.size()) /
                               static_cast<double>(cand.size()));
  return bp * std::pow(product, 0.25);
}

inline double naive_corpus_bleu(const std::vector<TokenSequence>& cands,
                                const std::vector<TokenSequence>& refs) {
  long c_len = 0, r_len = 0;
  double product = 1.0;
  for (int n = 1; n <= 4; ++n) {
    long m = 0, t = 0;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      m += naive_clipped_matches(cands[i], refs[i], n);
      t += naive_total_ngrams(cands[i], n);
    }
    if (m == 0 || t == 0) return 0.0;
    product *= static_cast<double>(m) / static_cast<double>(t);
  }
  for (std::size_t i = 0; i < cands.size(); ++i) {
    c_len += static_cast<long>(cands[i].size());
    r_len += static_cast<long>(refs[i].size());
  }
  if (c_len == 0) return 0.0;
  const double bp = c_len >= r_len
                        ? 1.0
                        : std::exp(1.0 - static_cast<double>(r_len) /
                                             static_cast<double>(c_len));
  return bp * std::pow(product, 0.25);
}

// ---------------------------------------------------------------------------
// Independent RNG (same published stream contract as the library).

inline std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b) {
  return mix(seed ^ mix(a ^ mix(b)));
}

struct Rng {
  std::uint64_t state;
  double uniform() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
  }
};

// ---------------------------------------------------------------------------
// Straight-line model math reading tensors directly.

inline std::vector<double> sl_matvec_add(const Tensor& W,
                                         const std::vector<double>& x,
                                         const Tensor& U,
                                         const std::vector<double>& h,
                                         const Tensor& b) {
  std::vector<double> wx(W.rows(), 0.0), uh(U.rows(), 0.0), out(W.rows());
  for (std::size_t i = 0; i < W.rows(); ++i) {
    for (std::size_t j = 0; j < W.cols(); ++j) wx[i] += W.at(i, j) * x[j];
  }
  for (std::size_t i = 0; i < U.rows(); ++i) {
    for (std::size_t j = 0; j < U.cols(); ++j) uh[i] += U.at(i, j) * h[j];
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (wx[i] + uh[i]) + b[i];
  return out;
}

inline std::vector<double> sl_gru(const searnn::ParamStore& p,
                                  const std::string& prefix,
                                  const std::vector<double>& x,
                                  const std::vector<double>& h) {
  const Tensor& Wz = p.param(prefix + ".Wz");
  const Tensor& Uz = p.param(prefix + ".Uz");
  const Tensor& bz = p.param(prefix + ".bz");
  const Tensor& Wr = p.param(prefix + ".Wr");
  const Tensor& Ur = p.param(prefix + ".Ur");
  const Tensor& br = p.param(prefix + ".br");
  const Tensor& Wh = p.param(prefix + ".Wh");
  const Tensor& Uh = p.param(prefix + ".Uh");
  const Tensor& bh = p.param(prefix + ".bh");

  std::vector<double> z = sl_matvec_add(Wz, x, Uz, h, bz);
  std::vector<double> r = sl_matvec_add(Wr, x, Ur, h, br);
  for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
  for (auto& v : r) v = 1.0 / (1.0 + std::exp(-v));
  std::vector<double> rh(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) rh[i] = r[i] * h[i];
  std::vector<double> hc = sl_matvec_add(Wh, x, Uh, rh, bh);
  std::vector<double> out(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    hc[i] = std::tanh(hc[i]);
    out[i] = (1.0 - z[i]) * h[i] + z[i] * hc[i];
  }
  return out;
}

inline std::vector<double> sl_embed(const Tensor& table, TokenId tok) {
  std::vector<double> out(table.cols());
  for (std::size_t j = 0; j < table.cols(); ++j) {
    out[j] = table.at(static_cast<std::size_t>(tok), j);
  }
  return out;
}

inline std::vector<double> sl_encode_context(const Model& m,
                                             const TokenSequence& src) {
  const auto& p = m.params();
  const Tensor& embed = p.param("src_embed");
  const std::size_t hidden = m.dims().hidden;

  std::vector<double> hf(hidden, 0.0), hb(hidden, 0.0);
  for (TokenId tok : src) hf = sl_gru(p, "enc_fwd", sl_embed(embed, tok), hf);
  for (std::size_t i = src.size(); i-- > 0;) {
    hb = sl_gru(p, "enc_bwd", sl_embed(embed, src[i]), hb);
  }

  const Tensor& W = p.param("init.W");
  const Tensor& b = p.param("init.b");
  std::vector<double> cat(2 * hidden);
  std::copy(hf.begin(), hf.end(), cat.begin());
  std::copy(hb.begin(), hb.end(), cat.begin() + hidden);
  std::vector<double> ctx(hidden);
  for (std::size_t i = 0; i < hidden; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cat.size(); ++j) acc += W.at(i, j) * cat[j];
    ctx[i] = std::tanh(acc + b[i]);
  }
  return ctx;
}

inline std::vector<double> sl_scores(const Model& m,
                                     const std::vector<double>& h) {
  const auto& p = m.params();
  const Tensor& W = p.param("out.W");
  const Tensor& b = p.param("out.b");
  std::vector<double> s(W.rows());
  for (std::size_t i = 0; i < W.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < W.cols(); ++j) acc += W.at(i, j) * h[j];
    s[i] = acc + b[i];
  }
  return s;
}

inline std::vector<double> sl_advance(const Model& m,
                                      const std::vector<double>& h,
                                      TokenId tok) {
  return sl_gru(m.params(), "dec", sl_embed(m.params().param("tgt_embed"), tok),
                h);
}

inline std::size_t sl_argmax(const std::vector<double>& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Full re-simulation of the roll-in / forced-candidate / roll-out pipeline.

struct OraclePolicy {
  enum class Kind { Reference, Learned, Mixed } kind;
  double p = 0.5;
};

inline bool oracle_picks_reference(const OraclePolicy& policy, Rng& rng) {
  if (policy.kind == OraclePolicy::Kind::Reference) return true;
  if (policy.kind == OraclePolicy::Kind::Learned) return false;
  return rng.uniform() < policy.p;
}

// Leading BOS is framing; the body ends at the first EOS; everything else
// (including interior specials) counts literally.
inline TokenSequence oracle_body(const TokenSequence& s) {
  TokenSequence out;
  for (std::size_t i = !s.empty() && s[0] == 1 ? 1 : 0; i < s.size(); ++i) {
    if (s[i] == 2) break;
    out.push_back(s[i]);
  }
  return out;
}

// Re-simulates the roll-in trajectory: fed tokens and hidden states.
struct OracleRollin {
  std::vector<TokenId> chosen;
  std::vector<std::vector<double>> states;  // T+1, states[0] = context
};

inline OracleRollin oracle_roll_in(const Model& m, const TokenSequence& src,
                                   const TokenSequence& ref,
                                   const OraclePolicy& policy,
                                   std::uint64_t pair_seed) {
  OracleRollin r;
  r.states.push_back(sl_encode_context(m, src));
  Rng rng{derive(pair_seed, searnn::kRollInStreamTag, 0)};
  const std::size_t steps = ref.size() - 1;
  for (std::size_t t = 0; t < steps; ++t) {
    TokenId fed;
    if (t == 0) {
      fed = ref[0];
    } else if (oracle_picks_reference(policy, rng)) {
      fed = ref[t];
    } else {
      fed = static_cast<TokenId>(sl_argmax(sl_scores(m, r.states[t])));
    }
    r.chosen.push_back(fed);
    r.states.push_back(sl_advance(m, r.states[t], fed));
  }
  return r;
}

// Costs for every candidate at cell t, re-simulated end to end.
inline std::vector<double> oracle_cost_vector(
    const Model& m, const TokenSequence& src, const TokenSequence& ref,
    const OraclePolicy& rollin, const OraclePolicy& rollout, std::size_t t,
    const std::vector<TokenId>& candidates, std::size_t max_len,
    std::uint64_t pair_seed) {
  OracleRollin r = oracle_roll_in(m, src, ref, rollin, pair_seed);
  const TokenSequence prefix(r.chosen.begin(), r.chosen.begin() + t + 1);
  const TokenSequence ref_body = oracle_body(ref);

  std::vector<double> costs(candidates.size());
  for (std::size_t j = 0; j < candidates.size(); ++j) {
    const TokenId a = candidates[j];
    Rng rng{derive(pair_seed, t, j)};
    std::vector<double> state = sl_advance(m, r.states[t + 1], a);
    TokenSequence completion{a};
    std::size_t position = 0;  // offset into the ground-truth continuation
    while (completion.back() != 2 && completion.size() < max_len + 1) {
      TokenId tok;
      if (oracle_picks_reference(rollout, rng)) {
        const std::size_t ref_pos = t + 2 + position;
        tok = ref_pos < ref.size() ? ref[ref_pos] : 2;
      } else {
        tok = static_cast<TokenId>(sl_argmax(sl_scores(m, state)));
      }
      completion.push_back(tok);
      ++position;
      if (tok == 2) break;
      state = sl_advance(m, state, tok);
    }
    TokenSequence full = prefix;
    full.insert(full.end(), completion.begin(), completion.end());
    costs[j] = searnn::sequence_cost(oracle_body(full), ref_body);
  }
  return costs;
}

}  // namespace test_oracle
