#include "seqrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include <gtest/gtest.h>

namespace seqrl {
namespace {

// Straight-line forward pass over the flat parameters, written without the
// projection table the library uses.
struct NaiveStep {
  std::vector<double> logp;
  double value = 0.0;
};

NaiveStep naive_step(const PolicyParams& p, const TokenSeq& seq, std::size_t end,
                     double temperature) {
  const PolicyShape& s = p.shape();
  std::vector<double> x;
  for (int pos = 0; pos < s.window; ++pos) {
    const std::ptrdiff_t idx =
        static_cast<std::ptrdiff_t>(end) - s.window + pos;
    const int tok = idx < 0 ? s.vocab - 1 : seq[static_cast<std::size_t>(idx)];
    auto emb = p.group(PolicyParams::kEmbedding);
    for (int k = 0; k < s.embed_dim; ++k) {
      x.push_back(emb[static_cast<std::size_t>(tok * s.embed_dim + k)]);
    }
  }
  auto w1 = p.group(PolicyParams::kHiddenWeight);
  auto b1 = p.group(PolicyParams::kHiddenBias);
  std::vector<double> h(static_cast<std::size_t>(s.hidden));
  for (int j = 0; j < s.hidden; ++j) {
    double a = b1[static_cast<std::size_t>(j)];
    for (std::size_t k = 0; k < x.size(); ++k) a += w1[j * x.size() + k] * x[k];
    h[static_cast<std::size_t>(j)] = std::tanh(a);
  }
  auto w2 = p.group(PolicyParams::kOutputWeight);
  auto b2 = p.group(PolicyParams::kOutputBias);
  std::vector<double> z(static_cast<std::size_t>(s.vocab));
  double zmax = -1e300;
  for (int v = 0; v < s.vocab; ++v) {
    double a = b2[static_cast<std::size_t>(v)];
    for (int j = 0; j < s.hidden; ++j) {
      a += w2[static_cast<std::size_t>(v * s.hidden + j)] * h[static_cast<std::size_t>(j)];
    }
    z[static_cast<std::size_t>(v)] = a / temperature;
    zmax = std::max(zmax, z[static_cast<std::size_t>(v)]);
  }
  double norm = 0.0;
  for (double a : z) norm += std::exp(a - zmax);
  NaiveStep out;
  for (double a : z) out.logp.push_back(a - zmax - std::log(norm));
  auto vw = p.group(PolicyParams::kValueWeight);
  out.value = p.group(PolicyParams::kValueBias)[0];
  for (int j = 0; j < s.hidden; ++j) {
    out.value += vw[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(j)];
  }
  return out;
}

// The surrogate loss computed from the naive forward.
double naive_loss(const PolicyParams& p, const std::vector<Trajectory>& batch,
                  const TokenTensor& adv, const SurrogateOptions& opt,
                  const PolicyParams* ref, const TokenTensor* targets) {
  std::size_t seqs = 0, tokens = 0;
  for (const auto& t : batch) {
    seqs += !t.response.empty();
    tokens += t.response.size();
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& t = batch[i];
    TokenSeq seq = t.question;
    seq.insert(seq.end(), t.response.begin(), t.response.end());
    const double wgt =
        opt.aggregation == LossAggregation::kSequenceMean
            ? 1.0 / (static_cast<double>(seqs) * static_cast<double>(t.response.size()))
            : 1.0 / static_cast<double>(tokens);
    for (std::size_t k = 0; k < t.response.size(); ++k) {
      const auto step = naive_step(p, seq, t.question.size() + k, opt.temperature);
      const double lp = step.logp[t.response[k]];
      const double ratio = std::exp(lp - t.logprobs_old[k]);
      const double a = adv[i][k];
      double obj = std::min(
          ratio * a, std::clamp(ratio, 1 - opt.clip_eps, 1 + opt.clip_eps) * a);
      if (opt.kl_beta > 0.0) {
        const double ref_lp =
            naive_step(*ref, seq, t.question.size() + k, opt.temperature)
                .logp[t.response[k]];
        const double r = std::exp(ref_lp - lp);
        obj -= opt.kl_beta * (r - std::log(r) - 1.0);
      }
      loss -= wgt * obj;
      if (targets) {
        const double e = step.value - (*targets)[i][k];
        loss += opt.value_coef * wgt * 0.5 * e * e;
      }
    }
  }
  return loss;
}

PolicyParams random_params(const PolicyShape& shape, std::uint64_t seed,
                           double scale) {
  PolicyParams p(shape);
  Rng rng(seed);
  for (double& x : p.flat()) x = rng.uniform(-scale, scale);
  return p;
}

TokenSeq random_tokens(Rng& rng, int vocab, std::size_t n) {
  TokenSeq out(n);
  for (auto& t : out) t = static_cast<TokenId>(rng.uniform_int(0, vocab - 2));
  return out;
}

// Batch whose old logprobs put each token's ratio at a chosen distance from
// the clip boundaries: ratios cycle through 1.05, 1.6, 0.6, 0.95 so that
// clipped and unclipped tokens of both advantage signs all occur, and no
// ratio sits near a kink.
struct Fixture {
  std::vector<Trajectory> batch;
  TokenTensor adv;
  TokenTensor targets;
};

Fixture make_fixture(const PolicyParams& p, std::uint64_t seed, int sequences,
                     double temperature) {
  static const double kRatios[] = {1.05, 1.6, 0.6, 0.95};
  Rng rng(seed);
  Fixture f;
  const int vocab = p.shape().vocab;
  int counter = 0;
  for (int i = 0; i < sequences; ++i) {
    Trajectory t;
    t.question = random_tokens(rng, vocab, static_cast<std::size_t>(rng.uniform_int(1, 5)));
    t.response = random_tokens(rng, vocab, static_cast<std::size_t>(rng.uniform_int(1, 4)));
    const auto eval = logprob_and_value(p, t, temperature);
    std::vector<double> a, g;
    for (std::size_t k = 0; k < t.response.size(); ++k) {
      t.logprobs_old.push_back(eval.logprobs[k] - std::log(kRatios[counter % 4]));
      a.push_back((counter / 4) % 2 == 0 ? rng.uniform(0.2, 1.5)
                                         : -rng.uniform(0.2, 1.5));
      g.push_back(rng.uniform(-1.0, 1.0));
      ++counter;
    }
    f.batch.push_back(std::move(t));
    f.adv.push_back(std::move(a));
    f.targets.push_back(std::move(g));
  }
  return f;
}

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|,
// floor), reported per group.
void expect_gradient_matches(const PolicyParams& p, const Fixture& f,
                             const SurrogateOptions& opt,
                             const PolicyParams* ref, bool with_targets) {
  const TokenTensor* targets = with_targets ? &f.targets : nullptr;
  const SurrogateResult res = gradients(p, f.batch, f.adv, opt, ref, targets);
  EXPECT_NEAR(res.loss, naive_loss(p, f.batch, f.adv, opt, ref, targets), 1e-12);
  const double h = 1e-4;
  for (int g = 0; g < PolicyParams::kGroupCount; ++g) {
    const auto group = static_cast<PolicyParams::Group>(g);
    const auto analytic = res.gradient.group(group);
    double worst = 0.0;
    bool any_nonzero = false;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      PolicyParams plus = p, minus = p;
      plus.group(group)[k] += h;
      minus.group(group)[k] -= h;
      const double numeric =
          (naive_loss(plus, f.batch, f.adv, opt, ref, targets) -
           naive_loss(minus, f.batch, f.adv, opt, ref, targets)) /
          (2 * h);
      const double denom =
          std::max({std::abs(analytic[k]), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
      any_nonzero |= std::abs(analytic[k]) > 1e-6;
    }
    EXPECT_LT(worst, 1e-3) << PolicyParams::group_name(group);
    if (with_targets || (g != PolicyParams::kValueWeight && g != PolicyParams::kValueBias)) {
      EXPECT_TRUE(any_nonzero) << PolicyParams::group_name(group);
    }
  }
}

const PolicyShape kSmall{7, 3, 3, 5};

TEST(PolicyParamsTest, LayoutAndCount) {
  const PolicyShape s{22, 32, 16, 64};
  const std::size_t expected =
      22 * 32 + 64 * 16 * 32 + 64 + 22 * 64 + 22 + 64 + 1;
  EXPECT_EQ(s.parameter_count(), expected);
  const PolicyParams p = PolicyParams::initialize(s, 3);
  EXPECT_EQ(p.size(), expected);
  std::size_t total = 0;
  for (int g = 0; g < PolicyParams::kGroupCount; ++g) {
    total += p.group(static_cast<PolicyParams::Group>(g)).size();
  }
  EXPECT_EQ(total, expected);
  for (double x : p.group(PolicyParams::kEmbedding)) EXPECT_LE(std::abs(x), 0.05);
  for (double x : p.group(PolicyParams::kHiddenWeight)) EXPECT_LE(std::abs(x), 0.05);
  for (auto g : {PolicyParams::kHiddenBias, PolicyParams::kOutputWeight,
                 PolicyParams::kOutputBias, PolicyParams::kValueWeight,
                 PolicyParams::kValueBias}) {
    for (double x : p.group(g)) EXPECT_EQ(x, 0.0);
  }
  EXPECT_TRUE(p.all_finite());
  EXPECT_EQ(p, PolicyParams::initialize(s, 3));
  EXPECT_NE(p, PolicyParams::initialize(s, 4));
}

TEST(PolicyParamsTest, CopiesAreDeep) {
  PolicyParams live = random_params(kSmall, 1, 0.3);
  const PolicyParams snapshot = live;
  live.flat()[0] += 1.0;
  EXPECT_NE(live.flat()[0], snapshot.flat()[0]);
  live.flat()[0] = std::nan("");
  EXPECT_FALSE(live.all_finite());
  EXPECT_TRUE(snapshot.all_finite());
}

TEST(PolicyTest, SoftmaxSumsToOne) {
  const PolicyParams p = random_params(PolicyShape{22, 8, 6, 12}, 5, 1.0);
  const PolicyEvaluator eval(p);
  Rng rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const TokenSeq prefix = random_tokens(rng, 22, static_cast<std::size_t>(rng.uniform_int(0, 10)));
    for (double temp : {1.0, 0.5, 2.0}) {
      const auto probs = eval.next_token_probs(prefix, temp);
      double sum = 0.0;
      for (double q : probs) {
        EXPECT_GE(q, 0.0);
        sum += q;
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(PolicyTest, ZeroOutputProjectionIsUniform) {
  const PolicyParams p = PolicyParams::initialize(PolicyShape{22, 32, 16, 64}, 11);
  const Problem prob{{3, 7, 12, 5}, 41, 0};
  GenerationConfig gen;
  gen.seed = 4;
  const Trajectory t = sample(p, question_tokens(prob), gen);
  ASSERT_FALSE(t.response.empty());
  for (double lp : t.logprobs_old) EXPECT_NEAR(lp, -std::log(22.0), 1e-12);
  const TokenEvaluation e = logprob_and_value(p, t);
  for (double lp : e.logprobs) EXPECT_NEAR(lp, -std::log(22.0), 1e-12);
  ASSERT_EQ(e.values.size(), t.response.size() + 1);
  for (double v : e.values) EXPECT_EQ(v, 0.0);
}

TEST(PolicyTest, SampleIsDeterministicAndBounded) {
  const PolicyParams p = random_params(PolicyShape{22, 8, 6, 12}, 2, 0.8);
  const TokenSeq q = Vocabulary::standard().tokenize("1 2 3=6");
  GenerationConfig gen;
  gen.seed = 77;
  gen.max_length = 10;
  const Trajectory a = sample(p, q, gen);
  const Trajectory b = sample(p, q, gen);
  EXPECT_EQ(a.response, b.response);
  EXPECT_EQ(a.logprobs_old, b.logprobs_old);
  EXPECT_EQ(a.question, q);
  int differing = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    gen.seed = s;
    const Trajectory t = sample(p, q, gen);
    EXPECT_LE(t.response.size(), 10u);
    EXPECT_EQ(t.logprobs_old.size(), t.response.size());
    for (double lp : t.logprobs_old) EXPECT_LE(lp, 0.0);
    const auto eos = Vocabulary::standard().eos();
    const auto first_eos = std::find(t.response.begin(), t.response.end(), eos);
    EXPECT_TRUE(first_eos == t.response.end() || first_eos + 1 == t.response.end());
    if (first_eos == t.response.end()) EXPECT_EQ(t.response.size(), 10u);
    differing += t.response != a.response;
  }
  EXPECT_GT(differing, 10);
}

TEST(PolicyTest, GreedyFollowsArgmax) {
  const PolicyParams p = random_params(PolicyShape{22, 8, 6, 12}, 8, 1.0);
  const PolicyEvaluator eval(p);
  const TokenSeq q = Vocabulary::standard().tokenize("4 5=9");
  GenerationConfig gen;
  gen.greedy = true;
  gen.max_length = 12;
  for (std::uint64_t seed : {1u, 2u}) {
    gen.seed = seed;
    const Trajectory t = eval.sample(q, gen);
    TokenSeq prefix = q;
    for (TokenId tok : t.response) {
      const auto probs = eval.next_token_probs(prefix);
      EXPECT_EQ(tok, std::max_element(probs.begin(), probs.end()) - probs.begin());
      prefix.push_back(tok);
    }
  }
}

TEST(PolicyTest, EvaluateReproducesSamplingLogprobs) {
  const PolicyParams p = random_params(PolicyShape{22, 8, 6, 12}, 21, 1.0);
  const TokenSeq q = Vocabulary::standard().tokenize("10 2 7=15");
  for (double temp : {1.0, 0.7, 1.6}) {
    GenerationConfig gen;
    gen.temperature = temp;
    gen.seed = 5;
    const Trajectory t = sample(p, q, gen);
    const TokenEvaluation e = logprob_and_value(p, t, temp);
    ASSERT_EQ(e.logprobs.size(), t.response.size());
    for (std::size_t k = 0; k < e.logprobs.size(); ++k) {
      EXPECT_NEAR(e.logprobs[k], t.logprobs_old[k], 1e-9);
    }
  }
}

TEST(PolicyTest, MatchesNaiveForward) {
  const PolicyParams p = random_params(kSmall, 31, 0.9);
  Rng rng(3);
  Trajectory t;
  t.question = random_tokens(rng, kSmall.vocab, 2);
  t.response = random_tokens(rng, kSmall.vocab, 5);
  const TokenEvaluation e = logprob_and_value(p, t, 0.8);
  TokenSeq seq = t.question;
  seq.insert(seq.end(), t.response.begin(), t.response.end());
  for (std::size_t k = 0; k <= t.response.size(); ++k) {
    const auto step = naive_step(p, seq, t.question.size() + k, 0.8);
    EXPECT_NEAR(e.values[k], step.value, 1e-12);
    if (k < t.response.size()) {
      EXPECT_NEAR(e.logprobs[k], step.logp[t.response[k]], 1e-12);
    }
  }
}

TEST(PolicyTest, Errors) {
  const PolicyParams p = random_params(kSmall, 1, 0.5);
  GenerationConfig gen;
  gen.temperature = 0.0;
  EXPECT_THROW(sample(p, TokenSeq{1}, gen), ContractError);
  gen.temperature = 1.0;
  gen.max_length = 0;
  EXPECT_THROW(sample(p, TokenSeq{1}, gen), ContractError);
}

class GradientCheck : public ::testing::TestWithParam<int> {};

TEST_P(GradientCheck, SurrogateAndValueHead) {
  const std::uint64_t seed = static_cast<std::uint64_t>(GetParam());
  const PolicyParams p = random_params(kSmall, 100 + seed, 0.7);
  const Fixture f = make_fixture(p, seed, 4, 1.0);
  SurrogateOptions opt;
  expect_gradient_matches(p, f, opt, nullptr, true);
  opt.aggregation = LossAggregation::kTokenMean;
  expect_gradient_matches(p, f, opt, nullptr, true);
}

TEST_P(GradientCheck, KlTermAndTemperature) {
  const std::uint64_t seed = static_cast<std::uint64_t>(GetParam());
  const PolicyParams p = random_params(kSmall, 200 + seed, 0.7);
  const PolicyParams ref = random_params(kSmall, 300 + seed, 0.7);
  SurrogateOptions opt;
  opt.kl_beta = 0.3;
  opt.temperature = 0.8;
  const Fixture f = make_fixture(p, seed, 3, opt.temperature);
  expect_gradient_matches(p, f, opt, &ref, false);
}

INSTANTIATE_TEST_SUITE_P(RandomPoints, GradientCheck, ::testing::Values(1, 2, 3));

TEST(GradientTest, TwoTokenVocabularyThreeTokenResponse) {
  const PolicyShape shape{2, 2, 2, 3};
  const PolicyParams p = random_params(shape, 17, 0.8);
  Trajectory t;
  t.question = {0, 1};
  t.response = {1, 0, 1};
  const auto e = logprob_and_value(p, t);
  t.logprobs_old = {e.logprobs[0] - std::log(1.1), e.logprobs[1] - std::log(0.9),
                    e.logprobs[2]};
  Fixture f;
  f.batch = {t};
  f.adv = {{0.7, -1.2, 0.4}};
  f.targets = {{0.5, -0.5, 1.0}};
  SurrogateOptions opt;
  expect_gradient_matches(p, f, opt, nullptr, true);
}

TEST(GradientTest, BetaZeroIgnoresReference) {
  const PolicyParams p = random_params(kSmall, 41, 0.6);
  const PolicyParams ref = random_params(kSmall, 42, 0.6);
  const Fixture f = make_fixture(p, 6, 3, 1.0);
  SurrogateOptions opt;
  const auto with = gradients(p, f.batch, f.adv, opt, &ref);
  const auto without = gradients(p, f.batch, f.adv, opt, nullptr);
  EXPECT_EQ(with.gradient, without.gradient);
  EXPECT_EQ(with.loss, without.loss);
  EXPECT_EQ(with.mean_kl, 0.0);
}

TEST(GradientTest, UnclippedMatchesClosedForm) {
  // One token, 2-token vocabulary: the unclipped objective w * A has
  // d/d(output bias v) = w * A * (1[v = token] - p_v), so the loss gradient
  // is its negation.
  const PolicyShape shape{2, 2, 1, 2};
  const PolicyParams p = random_params(shape, 5, 0.8);
  Trajectory t;
  t.question = {0};
  t.response = {1};
  const double lp = logprob_and_value(p, t).logprobs[0];
  for (double ratio : {0.85, 1.0, 1.15}) {
    for (double a : {0.8, -0.6}) {
      t.logprobs_old = {lp - std::log(ratio)};
      const TokenTensor adv{{a}};
      SurrogateOptions opt;
      const auto clipped = gradients(p, std::vector<Trajectory>{t}, adv, opt);
      opt.clip_eps = 0.99;
      const auto wide = gradients(p, std::vector<Trajectory>{t}, adv, opt);
      EXPECT_EQ(clipped.clip_fraction, 0.0);
      const double p1 = std::exp(lp);
      const auto gb = clipped.gradient.group(PolicyParams::kOutputBias);
      EXPECT_NEAR(gb[1], -ratio * a * (1.0 - p1), 1e-12);
      EXPECT_NEAR(gb[0], -ratio * a * (0.0 - (1.0 - p1)), 1e-12);
      for (std::size_t k = 0; k < p.size(); ++k) {
        EXPECT_NEAR(clipped.gradient.flat()[k], wide.gradient.flat()[k], 1e-15);
      }
    }
  }
}

TEST(GradientTest, ClippingIsOneSided) {
  const PolicyParams p = random_params(kSmall, 7, 0.6);
  Trajectory t;
  t.question = {1, 2};
  t.response = {3};
  const double lp = logprob_and_value(p, t).logprobs[0];
  auto grad_norm = [&](double ratio, double a) {
    t.logprobs_old = {lp - std::log(ratio)};
    const auto r = gradients(p, std::vector<Trajectory>{t}, TokenTensor{{a}},
                             SurrogateOptions{});
    double n = 0.0;
    for (double g : r.gradient.flat()) n += g * g;
    return n;
  };
  EXPECT_EQ(grad_norm(1.5, 1.0), 0.0);    // A > 0 above 1 + eps
  EXPECT_EQ(grad_norm(0.5, -1.0), 0.0);   // A < 0 below 1 - eps
  EXPECT_GT(grad_norm(0.5, 1.0), 0.0);    // A > 0 below 1 - eps stays live
  EXPECT_GT(grad_norm(1.5, -1.0), 0.0);   // A < 0 above 1 + eps stays live
  // Within the clipped region the loss does not move with theta.
  t.logprobs_old = {lp - std::log(1.5)};
  PolicyParams q = p;
  for (double& x : q.group(PolicyParams::kOutputBias)) x += 0.01;
  const std::vector<Trajectory> batch{t};
  EXPECT_EQ(surrogate_loss(p, batch, TokenTensor{{1.0}}, SurrogateOptions{}),
            -1.2);
  EXPECT_EQ(surrogate_loss(q, batch, TokenTensor{{1.0}}, SurrogateOptions{}),
            -1.2);
}

TEST(GradientTest, ShapeAndContractErrors) {
  const PolicyParams p = random_params(kSmall, 9, 0.5);
  const Fixture f = make_fixture(p, 2, 2, 1.0);
  TokenTensor short_rows = f.adv;
  short_rows.pop_back();
  EXPECT_THROW(gradients(p, f.batch, short_rows, SurrogateOptions{}), ShapeError);
  TokenTensor ragged = f.adv;
  ragged[0].push_back(0.0);
  EXPECT_THROW(gradients(p, f.batch, ragged, SurrogateOptions{}), ShapeError);
  TokenTensor bad_targets = f.targets;
  bad_targets[1].clear();
  EXPECT_THROW(gradients(p, f.batch, f.adv, SurrogateOptions{}, nullptr, &bad_targets),
               ShapeError);
  auto batch = f.batch;
  batch[0].logprobs_old.pop_back();
  EXPECT_THROW(gradients(p, batch, f.adv, SurrogateOptions{}), ShapeError);
  SurrogateOptions opt;
  opt.kl_beta = 0.1;
  EXPECT_THROW(gradients(p, f.batch, f.adv, opt), ContractError);
  opt.kl_beta = 0.0;
  opt.clip_eps = 1.0;
  EXPECT_THROW(gradients(p, f.batch, f.adv, opt), ContractError);
}

TEST(OptimizerTest, SgdAndFirstAdamStep) {
  PolicyParams p = random_params(kSmall, 3, 0.5);
  PolicyParams g = random_params(kSmall, 4, 0.5);
  const PolicyParams start = p;
  apply_gradient(p, g, 0.1);
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_DOUBLE_EQ(p.flat()[k], start.flat()[k] - 0.1 * g.flat()[k]);
  }
  PolicyParams q = start;
  AdamOptimizer adam;
  adam.step(q, g, 0.01);
  EXPECT_EQ(adam.steps(), 1u);
  for (std::size_t k = 0; k < q.size(); ++k) {
    const double gk = g.flat()[k];
    EXPECT_NEAR(q.flat()[k], start.flat()[k] - 0.01 * gk / (std::abs(gk) + 1e-8),
                1e-12);
  }
  EXPECT_THROW(apply_gradient(p, PolicyParams(PolicyShape{3, 1, 1, 1}), 0.1),
               ShapeError);
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

TEST(CheckpointTest, PolicyRoundTrip) {
  const PolicyParams p = random_params(PolicyShape{22, 4, 5, 6}, 12, 1.0);
  const std::string path = temp_path("seqrl_policy_rt.ckpt");
  save_policy(path, p);
  EXPECT_EQ(load_policy(path), p);
  std::ifstream in(path, std::ios::binary);
  char magic[8];
  in.read(magic, 8);
  EXPECT_EQ(std::string(magic, 8), "SQRLPOL1");
  EXPECT_EQ(std::filesystem::file_size(path),
            8 + 4 * 7 + 8 + 8 * p.size());
  std::remove(path.c_str());
}

TEST(CheckpointTest, ValueHeadOnly) {
  const PolicyParams trained = random_params(PolicyShape{22, 4, 5, 6}, 13, 1.0);
  PolicyParams other = random_params(PolicyShape{22, 4, 5, 6}, 14, 1.0);
  const PolicyParams before = other;
  const std::string path = temp_path("seqrl_value_rt.ckpt");
  save_policy(path, trained, CheckpointKind::kValueHead);
  load_value_head(path, other);
  for (int g = 0; g < PolicyParams::kGroupCount; ++g) {
    const auto group = static_cast<PolicyParams::Group>(g);
    const bool value = group == PolicyParams::kValueWeight ||
                       group == PolicyParams::kValueBias;
    const auto got = other.group(group);
    const auto want = value ? trained.group(group) : before.group(group);
    EXPECT_TRUE(std::equal(got.begin(), got.end(), want.begin()))
        << PolicyParams::group_name(group);
  }
  EXPECT_THROW(load_policy(path), IoError);
  PolicyParams wrong_shape(PolicyShape{22, 4, 5, 7});
  EXPECT_THROW(load_value_head(path, wrong_shape), ShapeError);
  std::remove(path.c_str());
}

TEST(CheckpointTest, CorruptFiles) {
  EXPECT_THROW(load_policy("/nonexistent/seqrl/p.ckpt"), IoError);
  const PolicyParams p = random_params(PolicyShape{22, 2, 2, 2}, 1, 1.0);
  const std::string path = temp_path("seqrl_policy_bad.ckpt");
  save_policy(path, p);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 3);
  EXPECT_THROW(load_policy(path), IoError);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT and some more bytes";
  }
  EXPECT_THROW(load_policy(path), IoError);
  save_policy(path, p);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << 'x';
  }
  EXPECT_THROW(load_policy(path), IoError);
  std::remove(path.c_str());
}

}  // namespace
}  // namespace seqrl
