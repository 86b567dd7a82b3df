#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "searnn/fdcheck.hpp"
#include "searnn/searnn_loss.hpp"

using namespace searnn;

namespace {

TokenSequence random_sentence(SplitMix64& rng, std::size_t vocab,
                              std::size_t real_tokens) {
  TokenSequence s{kBos};
  for (std::size_t i = 0; i < real_tokens; ++i) {
    s.push_back(static_cast<TokenId>(kNumSpecials + rng.below(vocab - kNumSpecials)));
  }
  s.push_back(kEos);
  return s;
}

PolicyKind policy_of(int kind) {
  switch (kind) {
    case 0: return PolicyKind::reference();
    case 1: return PolicyKind::learned();
    default: return PolicyKind::mixed(0.37);
  }
}

test_oracle::OraclePolicy oracle_policy_of(int kind) {
  switch (kind) {
    case 0: return {test_oracle::OraclePolicy::Kind::Reference, 0.0};
    case 1: return {test_oracle::OraclePolicy::Kind::Learned, 0.0};
    default: return {test_oracle::OraclePolicy::Kind::Mixed, 0.37};
  }
}

}  // namespace

TEST_CASE("sample_candidates") {
  SUBCASE("small vocabulary is exhausted") {
    ScoreVector scores(8, 0.0);
    TokenSequence ref = {kBos, 4, 5, kEos};
    auto c = sample_candidates(scores, ref, 0, 15, 10);
    CHECK(c.size() == 8);
    std::vector<bool> seen(8, false);
    for (TokenId t : c) {
      CHECK(!seen[static_cast<std::size_t>(t)]);
      seen[static_cast<std::size_t>(t)] = true;
    }
  }
  SUBCASE("exactly 25 distinct tokens on a large vocabulary") {
    SplitMix64 rng(51);
    for (int trial = 0; trial < 50; ++trial) {
      ScoreVector scores(120);
      for (auto& s : scores) s = rng.uniform(-2, 2);
      TokenSequence ref = random_sentence(rng, 120, 1 + rng.below(10));
      const std::size_t t = rng.below(ref.size() - 1);
      auto c = sample_candidates(scores, ref, t, 15, 10);
      CHECK(c.size() == 25);
      std::vector<bool> seen(120, false);
      bool gold_present = false;
      for (TokenId tok : c) {
        CHECK(!seen[static_cast<std::size_t>(tok)]);
        seen[static_cast<std::size_t>(tok)] = true;
        gold_present |= tok == ref[t + 1];
      }
      CHECK(gold_present);
    }
  }
  SUBCASE("clipped neighbor window at the sentence end tops up from scores") {
    ScoreVector scores(60);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      scores[i] = static_cast<double>(i);  // best tokens are the highest ids
    }
    TokenSequence ref = {kBos, 4, 5, kEos};
    const std::size_t t = 2;  // last cell, gold is EOS
    auto c = sample_candidates(scores, ref, t, 15, 10);
    CHECK(c.size() == 25);
    bool has_eos = false;
    for (TokenId tok : c) has_eos |= tok == kEos;
    CHECK(has_eos);
  }
  SUBCASE("score ties break toward the lower token id") {
    ScoreVector scores(40, 1.0);
    TokenSequence ref = {kBos, 38, kEos};
    auto c = sample_candidates(scores, ref, 0, 3, 1);
    REQUIRE(c.size() == 4);
    CHECK(c[0] == 0);
    CHECK(c[1] == 1);
    CHECK(c[2] == 2);
    CHECK(c[3] == 38);  // gold neighbor
  }
}

TEST_CASE("cost vectors: reference roll-in and roll-out") {
  SplitMix64 rng(52);
  Model m(ModelDims{8, 8, 3, 4}, rng.next());
  TokenSequence src = random_sentence(rng, 8, 3);
  TokenSequence ref = {kBos, 4, 5, 6, kEos};
  Trajectory traj = roll_in(m, src, ref, PolicyKind::reference(), 3);

  std::vector<TokenId> candidates = {4, 5, 6, 7, kEos};
  for (std::size_t t = 0; t + 1 < ref.size(); ++t) {
    CostVector cv = compute_cost_vector(m, traj, t, candidates,
                                        PolicyKind::reference(), 32, 17);
    for (std::size_t j = 0; j < cv.candidates.size(); ++j) {
      if (cv.candidates[j] == ref[t + 1]) {
        CHECK(cv.costs[j] == 0.0);  // gold reconstructs the ground truth
      } else {
        CHECK(cv.costs[j] > 0.0);
      }
      CHECK(cv.costs[j] <= 1.0);
    }
  }
}

TEST_CASE("cost vectors match the brute-force re-simulation oracle exactly") {
  SplitMix64 rng(53);
  int cases = 0;
  for (int trial = 0; trial < 12; ++trial) {
    Model m(ModelDims{8, 8, 3, 4}, rng.next());
    TokenSequence src = random_sentence(rng, 8, 1 + rng.below(4));
    TokenSequence ref = random_sentence(rng, 8, 1 + rng.below(4));
    const std::uint64_t pair_seed = rng.next();

    for (int ri = 0; ri < 3; ++ri) {
      for (int ro = 0; ro < 3; ++ro) {
        Trajectory traj =
            roll_in(m, src, ref, policy_of(ri), rollin_stream(pair_seed));
        const std::size_t t = rng.below(ref.size() - 1);
        std::vector<TokenId> candidates;
        for (TokenId a = 0; a < 8; ++a) candidates.push_back(a);

        CostVector cv = compute_cost_vector(m, traj, t, candidates,
                                            policy_of(ro), 16, pair_seed);
        std::vector<double> oracle = test_oracle::oracle_cost_vector(
            m, src, ref, oracle_policy_of(ri), oracle_policy_of(ro), t,
            candidates, 16, pair_seed);
        REQUIRE(cv.costs.size() == oracle.size());
        for (std::size_t j = 0; j < oracle.size(); ++j) {
          CHECK(cv.costs[j] == oracle[j]);  // exact
        }
        ++cases;
      }
    }
  }
  CHECK(cases == 12 * 9);
}

TEST_CASE("ll loss") {
  SUBCASE("uniform scores over 4 candidates give ln 4") {
    CostVector cv{{4, 5, 6, 7}, {0.4, 0.1, 0.9, 0.3}};
    ScoreVector scores(4, 0.0);
    CHECK(ll_loss_value(scores, cv) ==
          doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("one-hot scores on the argmin drive the loss to zero") {
    CostVector cv{{4, 5, 6}, {0.9, 0.0, 0.5}};
    ScoreVector scores = {0.0, 50.0, 0.0};
    CHECK(ll_loss_value(scores, cv) < 1e-12);
  }
  SUBCASE("cost ties break to the lowest token id") {
    CostVector cv{{9, 4, 7}, {0.5, 0.5, 0.5}};
    ScoreVector scores = {1.0, 2.0, 3.0};
    // argmin is token 4 at index 1
    const std::vector<double> want = {2.0};
    Tape tape;
    auto s = tape.constant(Tensor({3}, scores));
    auto loss = ll_loss_on_tape(tape, s, cv);
    const double logz =
        std::log(std::exp(1.0 - 3.0) + std::exp(2.0 - 3.0) + 1.0) + 3.0;
    CHECK(tape.scalar_value(loss) ==
          doctest::Approx(-(2.0 - logz)).epsilon(1e-12));
  }
  SUBCASE("gradient is softmax(scores) minus onehot(argmin)") {
    SplitMix64 rng(54);
    CostVector cv{{4, 5, 6, 7, 8}, {}};
    for (int i = 0; i < 5; ++i) cv.costs.push_back(rng.uniform());
    ParamStore ps;
    Tensor scores({5});
    for (std::size_t i = 0; i < 5; ++i) scores[i] = rng.uniform(-2, 2);
    ps.add("s", scores);
    LossBuilder build = [cv](Tape& t, const ParamStore& p) {
      return ll_loss_on_tape(t, t.param(p, "s"), cv);
    };
    FdReport fd = finite_difference_check(build, ps, 1e-5, 1e-4);
    CHECK(fd.passed());

    // analytic identity
    Tape tape;
    auto s = tape.param(ps, "s");
    auto loss = ll_loss_on_tape(tape, s, cv);
    tape.backward(loss);
    ps.zero_grads();
    tape.accumulate_param_grads(ps);
    double mx = scores[0];
    for (std::size_t i = 1; i < 5; ++i) mx = std::max(mx, scores[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < 5; ++i) z += std::exp(scores[i] - mx);
    const std::size_t amin = cost_argmin(cv);
    for (std::size_t i = 0; i < 5; ++i) {
      const double softmax = std::exp(scores[i] - mx) / z;
      const double want = softmax - (i == amin ? 1.0 : 0.0);
      CHECK(ps.grad("s")[i] == doctest::Approx(want).epsilon(1e-12));
    }
  }
  SUBCASE("empty candidates rejected") {
    CostVector cv;
    CHECK_THROWS_AS(ll_loss_value({}, cv), DataError);
  }
}

TEST_CASE("kl target") {
  SUBCASE("uniform costs give a uniform distribution") {
    CostVector cv{{4, 5, 6}, {0.7, 0.7, 0.7}};
    for (double alpha : {0.5, 1.0, 100.0}) {
      TargetDistribution d = kl_target(cv, alpha);
      for (double p : d.probs) {
        CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
      }
    }
  }
  SUBCASE("pinned values for costs [0,1,2], alpha 1") {
    CostVector cv{{4, 5, 6}, {0.0, 1.0, 2.0}};
    TargetDistribution d = kl_target(cv, 1.0);
    CHECK(d.probs[0] == doctest::Approx(0.6652).epsilon(1e-4));
    CHECK(d.probs[1] == doctest::Approx(0.2447).epsilon(1e-4));
    CHECK(d.probs[2] == doctest::Approx(0.0900).epsilon(1e-4));
  }
  SUBCASE("huge alpha with a unique argmin is one-hot") {
    CostVector cv{{4, 5, 6}, {0.4, 0.1, 0.9}};
    TargetDistribution d = kl_target(cv, 1e6);
    CHECK(d.probs[1] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(d.probs[0] < 1e-6);
    CHECK(d.probs[2] < 1e-6);
  }
  SUBCASE("normalization and shift invariance") {
    SplitMix64 rng(55);
    for (int trial = 0; trial < 100; ++trial) {
      CostVector cv;
      const std::size_t n = 1 + rng.below(8);
      for (std::size_t i = 0; i < n; ++i) {
        cv.candidates.push_back(static_cast<TokenId>(i));
        cv.costs.push_back(rng.uniform());
      }
      const double alpha = 0.1 + 3.0 * rng.uniform();
      TargetDistribution d = kl_target(cv, alpha);
      double sum = 0.0;
      for (double p : d.probs) {
        CHECK(p >= 0.0);
        sum += p;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));

      CostVector shifted = cv;
      for (double& c : shifted.costs) c += 0.5;
      TargetDistribution d2 = kl_target(shifted, alpha);
      for (std::size_t i = 0; i < n; ++i) {
        // c + 0.5 itself rounds for arbitrary c, so allow roundoff here; the
        // dyadic subcase below checks bitwise equality on exact inputs.
        CHECK(d.probs[i] == doctest::Approx(d2.probs[i]).epsilon(1e-12));
      }
    }
  }
  SUBCASE("shift invariance is bitwise on exactly-representable inputs") {
    CostVector cv{{4, 5, 6, 7}, {0.0, 0.25, 0.5, 1.0}};
    for (double shift : {0.5, 1.0, 2.0, -0.25}) {
      CostVector shifted = cv;
      for (double& c : shifted.costs) c += shift;
      TargetDistribution a = kl_target(cv, 1.7);
      TargetDistribution b = kl_target(shifted, 1.7);
      for (std::size_t i = 0; i < 4; ++i) CHECK(a.probs[i] == b.probs[i]);
    }
  }
}

TEST_CASE("kl loss") {
  SUBCASE("uniform everything gives ln A'") {
    CostVector cv{{4, 5, 6, 7, 8}, std::vector<double>(5, 0.3)};
    ScoreVector scores(5, 1.1);
    CHECK(kl_loss_value(scores, cv, 2.0) ==
          doctest::Approx(std::log(5.0)).epsilon(1e-12));
  }
  SUBCASE("huge alpha with unique argmin reduces to ll loss") {
    SplitMix64 rng(56);
    for (int trial = 0; trial < 50; ++trial) {
      CostVector cv;
      const std::size_t n = 2 + rng.below(6);
      for (std::size_t i = 0; i < n; ++i) {
        cv.candidates.push_back(static_cast<TokenId>(i + 4));
        cv.costs.push_back(rng.uniform());
      }
      ScoreVector scores(n);
      for (auto& s : scores) s = rng.uniform(-3, 3);
      CHECK(std::abs(kl_loss_value(scores, cv, 1e6) -
                     ll_loss_value(scores, cv)) < 1e-6);
    }
  }
  SUBCASE("gradient is P_M minus P_C") {
    SplitMix64 rng(57);
    CostVector cv{{4, 5, 6, 7}, {}};
    for (int i = 0; i < 4; ++i) cv.costs.push_back(rng.uniform());
    const double alpha = 1.6;
    ParamStore ps;
    Tensor scores({4});
    for (std::size_t i = 0; i < 4; ++i) scores[i] = rng.uniform(-2, 2);
    ps.add("s", scores);
    LossBuilder build = [cv, alpha](Tape& t, const ParamStore& p) {
      return kl_loss_on_tape(t, t.param(p, "s"), cv, alpha);
    };
    CHECK(finite_difference_check(build, ps, 1e-5, 1e-4).passed());

    Tape tape;
    auto loss = kl_loss_on_tape(tape, tape.param(ps, "s"), cv, alpha);
    tape.backward(loss);
    ps.zero_grads();
    tape.accumulate_param_grads(ps);
    TargetDistribution pc = kl_target(cv, alpha);
    double mx = scores[0];
    for (std::size_t i = 1; i < 4; ++i) mx = std::max(mx, scores[i]);
    double z = 0.0;
    for (std::size_t i = 0; i < 4; ++i) z += std::exp(scores[i] - mx);
    for (std::size_t i = 0; i < 4; ++i) {
      const double pm = std::exp(scores[i] - mx) / z;
      CHECK(ps.grad("s")[i] ==
            doctest::Approx(pm - pc.probs[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("searnn sequence loss") {
  SUBCASE("LL + reference/reference + full vocab reduces to MLE") {
    SplitMix64 rng(58);
    SearnnConfig cfg;
    cfg.rollin = PolicyKind::reference();
    cfg.rollout = PolicyKind::reference();
    cfg.loss = CostLoss::LL;
    cfg.sampling = SamplingMode::Full;
    cfg.max_rollout_len = 32;
    for (int trial = 0; trial < 20; ++trial) {
      Model m(ModelDims{8, 8, 3, 4}, rng.next());
      TokenSequence src = random_sentence(rng, 8, 1 + rng.below(4));
      TokenSequence ref = random_sentence(rng, 8, 1 + rng.below(4));
      const double searnn = searnn_sequence_loss(m, src, ref, cfg, rng.next());
      const double mle = m.mle_loss(src, ref);
      CHECK(std::abs(searnn - mle) < 1e-12);
    }
  }
  SUBCASE("single-cell target equals that cell's loss") {
    SplitMix64 rng(59);
    Model m(ModelDims{8, 8, 3, 4}, rng.next());
    TokenSequence src = random_sentence(rng, 8, 2);
    TokenSequence ref = {kBos, kEos};  // T = 1
    SearnnConfig cfg;
    cfg.rollin = PolicyKind::reference();
    cfg.rollout = PolicyKind::reference();
    cfg.loss = CostLoss::LL;
    cfg.sampling = SamplingMode::Full;
    SearnnPlan plan = plan_searnn_pair(m, src, ref, cfg, 11);
    fill_cell_cost(m, plan, 0, cfg, 11);
    Tape tape;
    auto whole = searnn_sequence_loss_on_tape(tape, m, src, ref, cfg, 11);
    Tape tape2;
    auto state = m.encode_on_tape(tape2, src);
    auto [scores, next] = m.decode_step_on_tape(tape2, state, kBos);
    std::vector<std::size_t> idx(8);
    std::iota(idx.begin(), idx.end(), 0);
    auto cell = ll_loss_on_tape(tape2, tape2.gather(scores, idx),
                                plan.cell_costs[0]);
    CHECK(tape.scalar_value(whole) == tape2.scalar_value(cell));
  }
  SUBCASE("same seed gives the same loss, gradients pass fd check") {
    SplitMix64 rng(60);
    Model m(ModelDims{7, 7, 3, 4}, rng.next());
    init_uniform(m.mutable_params(), rng.next(), 0.5);
    TokenSequence src = random_sentence(rng, 7, 2);
    TokenSequence ref = random_sentence(rng, 7, 3);
    SearnnConfig cfg;
    cfg.rollin = PolicyKind::mixed(0.5);
    cfg.rollout = PolicyKind::mixed(0.5);
    cfg.loss = CostLoss::KL;
    cfg.alpha = 1.0;
    cfg.sampling = SamplingMode::Sampled;
    cfg.top_k = 3;
    cfg.neighbors = 2;
    cfg.max_rollout_len = 16;

    CHECK(searnn_sequence_loss(m, src, ref, cfg, 77) ==
          searnn_sequence_loss(m, src, ref, cfg, 77));

    // Gradcheck the full searnn loss: costs/candidates are recomputed inside
    // the builder but depend only on frozen params at build time, so the
    // check perturbs the score path. Use a fixed plan to keep f deterministic
    // under parameter perturbation.
    SearnnPlan plan = plan_searnn_pair(m, src, ref, cfg, 77);
    for (std::size_t t = 0; t < plan.cell_costs.size(); ++t) {
      fill_cell_cost(m, plan, t, cfg, 77);
    }
    ParamStore ps = m.params();
    ModelDims dims = m.dims();
    LossBuilder build = [dims, plan](Tape& t, const ParamStore& p) {
      Model view(dims);
      view.mutable_params() = p;
      return searnn_loss_from_plan(t, view, plan, SearnnConfig{
          PolicyKind::mixed(0.5), PolicyKind::mixed(0.5), CostLoss::KL, 1.0,
          SamplingMode::Sampled, 3, 2, 16});
    };
    CHECK(finite_difference_check(build, ps, 1e-5, 1e-4).passed());
  }
}
