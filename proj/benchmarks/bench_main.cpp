#include <filesystem>
#include <random>

#include <benchmark/benchmark.h>

#include "drr/drr.hpp"

namespace {

using namespace drr;

Dataset make_dataset(std::size_t n) {
  std::mt19937_64 rng(1);
  std::vector<QaItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    items.push_back({"b" + std::to_string(i), "Which option fits question " + std::to_string(i) + " best?",
                     {"first option", "second option", "third option", "fourth option"}, rng() % 4});
  }
  return Dataset("bench", std::move(items));
}

std::string sample_input(int turns) {
  const QaItem item{"x", "Which gas do plants absorb during photosynthesis?",
                    {"oxygen", "nitrogen", "carbon dioxide", "helium"}, 2};
  std::vector<PriorResponse> ctx;
  for (int t = 1; t < turns; ++t) ctx.push_back({"0", "Plants release oxygen, so they must also take it in at night."});
  return render_dm_input(item, ctx, ChoiceIndex{2}, "Photosynthesis fixes carbon from CO2 into sugars.",
                         kDefaultDmInstruction, prompts::kDirectFeedback);
}

void BM_Featurize(benchmark::State& state) {
  const auto text = sample_input(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(featurize(text, kDefaultHashDim));
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations() * text.size()));
}
BENCHMARK(BM_Featurize)->Arg(1)->Arg(5);

void BM_LinearAssess(benchmark::State& state) {
  auto model = LinearCriticModel::zeros(kDefaultHashDim);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& w : model.weights) w = n(rng);
  const LinearCritic critic(std::move(model));
  const auto text = sample_input(5);
  for (auto _ : state) benchmark::DoNotOptimize(critic.assess(text));
}
BENCHMARK(BM_LinearAssess);

void BM_BuildPrompt(benchmark::State& state) {
  const auto ds = make_dataset(1);
  std::vector<PriorResponse> ctx(4, {"1", "A rationale of moderate length to repeat in the prompt."});
  const auto strategy = PromptStrategy::direct();
  for (auto _ : state) benchmark::DoNotOptimize(build_prompt(ds.items()[0], ctx, 5, strategy));
}
BENCHMARK(BM_BuildPrompt);

void BM_ParseResponse(benchmark::State& state) {
  const std::string raw = "```\n**Answer:** (2)\n**Rationale:** Photosynthesis consumes carbon dioxide.\n```";
  for (auto _ : state) benchmark::DoNotOptimize(parse_response(raw, 4, false));
}
BENCHMARK(BM_ParseResponse);

void BM_InferSim(benchmark::State& state) {
  const auto ds = make_dataset(static_cast<std::size_t>(state.range(0)));
  StochasticSimReasoner sim(ds, 0.5, 3);
  const OracleCritic oracle(ds);
  for (auto _ : state) {
    benchmark::DoNotOptimize(infer_all(ds, sim, oracle, PromptStrategy::direct(), {}, 1));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * ds.size()));
}
BENCHMARK(BM_InferSim)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_DistillSim(benchmark::State& state) {
  const auto ds = make_dataset(1000);
  StochasticSimReasoner sim(ds, 0.6, 4);
  const auto path = std::filesystem::temp_directory_path() / "drr-bench-traces.jsonl";
  for (auto _ : state) {
    std::filesystem::remove(path);
    benchmark::DoNotOptimize(distill_dataset(ds, sim, PromptStrategy::direct(), 4, path, 1));
  }
  std::filesystem::remove(path);
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations() * ds.size()));
}
BENCHMARK(BM_DistillSim)->Unit(benchmark::kMillisecond);

void BM_ScoreOutcomes(benchmark::State& state) {
  const auto ds = make_dataset(10000);
  StochasticSimReasoner sim(ds, 0.5, 5);
  const auto outcomes = infer_all(ds, sim, OracleCritic(ds), PromptStrategy::direct(), {}, 4);
  const std::vector<double> ks{1.0, 3.0};
  for (auto _ : state) benchmark::DoNotOptimize(score_outcomes(outcomes, ds, ks));
}
BENCHMARK(BM_ScoreOutcomes);

}  // namespace

BENCHMARK_MAIN();
