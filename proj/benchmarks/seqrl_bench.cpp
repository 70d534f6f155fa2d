#include <vector>

#include <benchmark/benchmark.h>

#include "seqrl/advantage.hpp"
#include "seqrl/exploration.hpp"
#include "seqrl/policy.hpp"
#include "seqrl/toytask.hpp"

namespace seqrl {
namespace {

const PolicyShape kDefaultShape{22, 32, 32, 64};

std::vector<Problem> problems() {
  static const auto p = generate_dataset(3, 64, DatasetMode::kCountdown4);
  return p;
}

void BM_Sample(benchmark::State& state) {
  const PolicyParams params = PolicyParams::initialize(kDefaultShape, 1);
  const PolicyEvaluator eval(params);
  const TokenSeq q = question_tokens(problems()[0]);
  GenerationConfig gen;
  gen.max_length = static_cast<int>(state.range(0));
  std::size_t tokens = 0;
  for (auto _ : state) {
    ++gen.seed;
    const Trajectory t = eval.sample(q, gen);
    tokens += t.response.size();
    benchmark::DoNotOptimize(t.response.data());
  }
  state.counters["tokens/s"] =
      benchmark::Counter(static_cast<double>(tokens), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_Sample)->Arg(16)->Arg(64);

void BM_SurrogateGradient(benchmark::State& state) {
  const PolicyParams params = PolicyParams::initialize(kDefaultShape, 1);
  const PolicyEvaluator eval(params);
  std::vector<Trajectory> batch;
  TokenTensor adv;
  GenerationConfig gen;
  const auto ps = problems();
  for (int i = 0; i < state.range(0); ++i) {
    gen.seed = static_cast<std::uint64_t>(i);
    batch.push_back(eval.sample(question_tokens(ps[i % ps.size()]), gen));
    adv.emplace_back(batch.back().response.size(), i % 2 ? 1.0 : -1.0);
  }
  SurrogateOptions opt;
  for (auto _ : state) {
    SurrogateResult r = gradients(params, batch, adv, opt);
    benchmark::DoNotOptimize(r.loss);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SurrogateGradient)->Arg(20)->Arg(320);

void BM_PredictorUpdate(benchmark::State& state) {
  const Vocabulary& v = Vocabulary::standard();
  ExplorationNets nets(v.size(), 1);
  std::vector<TokenSeq> qs, os;
  for (const auto& p : problems()) {
    qs.push_back(question_tokens(p));
    os.push_back(v.tokenize("<" + *find_solution(p) + ">$"));
  }
  std::vector<SequenceRef> batch;
  for (std::size_t i = 0; i < qs.size(); ++i) batch.push_back({qs[i], os[i]});
  for (auto _ : state) benchmark::DoNotOptimize(update_predictor(nets, batch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_PredictorUpdate);

void BM_GroupNormalize(benchmark::State& state) {
  const std::vector<double> r{1.0, 0.1, 0.0, 0.1, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(group_normalize(r));
}
BENCHMARK(BM_GroupNormalize);

void BM_Verify(benchmark::State& state) {
  const Problem p{{3, 7, 12, 5}, 41, 0};
  const TokenSeq answer = Vocabulary::standard().tokenize("<((3+7)*5)-12>$");
  for (auto _ : state) benchmark::DoNotOptimize(verify(answer, p));
}
BENCHMARK(BM_Verify);

}  // namespace
}  // namespace seqrl

BENCHMARK_MAIN();
