// Serial reference kernel against the OpenMP kernel, for batch evaluation
// and for a full relation campaign.

#include <benchmark/benchmark.h>

#include <string>

#include "taxmorph/metamorphic.hpp"
#include "taxmorph/oracle.hpp"
#include "taxmorph/sampling.hpp"

using namespace taxmorph;

namespace {

const TaxRuleSet& rules() {
  static const TaxRuleSet r = load_ruleset_file(std::string(TAXMORPH_FIXTURE_DIR) + "/ty2021.json");
  return r;
}

std::vector<TaxpayerProfile> profiles(ScenarioId scenario, std::size_t n) {
  Rng rng(mix_seed(1, "bench"));
  std::vector<TaxpayerProfile> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_profile(scenario, rules(), rng));
  return out;
}

void batch(benchmark::State& state, Execution mode) {
  const ScenarioId scenario(static_cast<int>(state.range(0)));
  const auto batch = profiles(scenario, 20000);
  OracleFunction f(rules(), scenario);
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_batch(f, batch, mode));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}

void campaign(benchmark::State& state, Execution mode) {
  const ScenarioId scenario(static_cast<int>(state.range(0)));
  const ToleranceConfig tol;
  const auto tuples = default_tuples(rules(), scenario, 1, tol);
  const auto relations = load_relations_file(std::string(TAXMORPH_FIXTURE_DIR) + "/relations.json");
  OracleFunction f(rules(), scenario);
  for (auto _ : state) benchmark::DoNotOptimize(run_suite(f, tuples, relations, 1000, rules(), 1, tol, mode));
}

void BM_BatchSerial(benchmark::State& s) { batch(s, Execution::Serial); }
void BM_BatchParallel(benchmark::State& s) { batch(s, Execution::Parallel); }
void BM_CampaignSerial(benchmark::State& s) { campaign(s, Execution::Serial); }
void BM_CampaignParallel(benchmark::State& s) { campaign(s, Execution::Parallel); }

}  // namespace

BENCHMARK(BM_BatchSerial)->DenseRange(1, 6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchParallel)->DenseRange(1, 6)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CampaignSerial)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CampaignParallel)->Arg(1)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
