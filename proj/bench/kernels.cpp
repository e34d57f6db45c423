// Serial reference path vs OpenMP path for each data-parallel kernel.
// Argument 0 selects serial, 1 selects parallel.
#include <benchmark/benchmark.h>

#include <numeric>
#include <vector>

#include "lpo/dynamics.hpp"
#include "lpo/fixtures.hpp"
#include "lpo/loss_oracle.hpp"
#include "lpo/pairs.hpp"
#include "lpo/trainer.hpp"

using namespace lpo;

namespace {

Execution mode(const benchmark::State& state) {
  return state.range(0) == 0 ? Execution::serial : Execution::parallel;
}

void label(benchmark::State& state) {
  state.SetLabel(std::string(to_string(mode(state))) + ", " + std::to_string(max_threads()) +
                 " threads");
}

void BM_BatchGradient(benchmark::State& state) {
  CoupledTaskConfig cc;
  cc.train_pairs_per_prompt = 64;
  const ToyTask task = make_coupled_task(cc);
  auto policy = task.reference->clone();
  for (const PreferencePair& p : task.train) {
    policy->prepare(p.prompt, p.chosen);
    policy->prepare(p.prompt, p.rejected);
  }
  const auto refs = reference_scores(*task.reference, task.train);
  std::vector<std::size_t> batch(task.train.size());
  std::iota(batch.begin(), batch.end(), 0);
  const LossParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        batch_gradient(*policy, refs, task.train, batch, LossKind::lpo, params, mode(state)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
  label(state);
}

void BM_Gradcheck(benchmark::State& state) {
  GradcheckSettings s;
  s.kind = LossKind::lpo_ste;
  s.params.r2 = 0.5;
  s.points = 20000;
  for (auto _ : state) benchmark::DoNotOptimize(run_gradcheck(s, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(s.points));
  label(state);
}

void BM_Perturb(benchmark::State& state) {
  const Vocab vocab = Vocab::numbered(16);
  const std::vector<Example> corpus = make_sentence_corpus(vocab, 20000, 10, 1);
  const PerturbationConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(build_perturbed(corpus, vocab, c, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(corpus.size()));
  label(state);
}

void BM_Lppc(benchmark::State& state) {
  const Vocab vocab = Vocab::numbered(12);
  const TabularPolicy sft(vocab, {2, 7, 1.0});
  const std::vector<Example> data = make_sentence_corpus(vocab, 2000, 6, 2);
  const LppcConfig c;
  for (auto _ : state) benchmark::DoNotOptimize(build_lppc(data, sft, c, mode(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(data.size()));
  label(state);
}

void BM_R2Sweep(benchmark::State& state) {
  SimConfig base;
  base.loss_kind = LossKind::lpo_ste;
  base.steps = 20000;
  std::vector<double> r2;
  for (int i = 1; i <= 32; ++i) r2.push_back(0.05 * i);
  for (auto _ : state) benchmark::DoNotOptimize(r2_sweep(base, r2, mode(state)));
  label(state);
}

}  // namespace

BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Gradcheck)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Perturb)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_Lppc)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_R2Sweep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
