#include <benchmark/benchmark.h>

#include "promix/embedspace.hpp"
#include "promix/head.hpp"
#include "promix/mixture.hpp"
#include "promix/train.hpp"

namespace {

promix::SyntheticDomain make_domain(std::size_t classes, std::size_t dim) {
  return promix::generate_synthetic(
      promix::SyntheticConfig{.dim = dim, .num_classes = classes, .shots = 8, .test_per_class = 4});
}

void BM_HeadSimilarities(benchmark::State& state) {
  const auto classes = static_cast<std::size_t>(state.range(0));
  const auto domain = make_domain(classes, 256);
  const auto head = promix::PromptHead::learnable(domain.generalized_prototypes,
                                                  domain.train.class_names(), 16, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    auto s = head.similarities(domain.test[i++ % domain.test.size()].embedding);
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(classes));
}
BENCHMARK(BM_HeadSimilarities)->Arg(20)->Arg(100)->Arg(1000);

void BM_MixturePredict(benchmark::State& state) {
  const auto domain = make_domain(100, 256);
  const auto& names = domain.train.class_names();
  const auto partition = promix::partition_classes(100, promix::BaseNewSplit{}, 0);
  promix::MixtureModel model{
      {promix::PromptHead::frozen(domain.generalized_prototypes, names),
       promix::PromptHead::learnable(domain.generalized_prototypes, names, 16, 2)},
      promix::MixtureWeights::two_stage({{0.3, -0.4}}),
      partition};
  std::size_t i = 0;
  for (auto _ : state) {
    auto p = promix::mixture_predict(model, domain.test[i++ % domain.test.size()].embedding);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK(BM_MixturePredict);

void BM_TuneEpoch(benchmark::State& state) {
  const auto domain = make_domain(20, 256);
  const auto init = promix::PromptHead::learnable(domain.generalized_prototypes,
                                                  domain.train.class_names(), 16, 3);
  promix::OptimizerConfig opt;
  opt.epochs = 1;
  for (auto _ : state) {
    auto result = promix::tune_prompt(init, domain.train, promix::LossConfig{}, opt);
    benchmark::DoNotOptimize(result);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(domain.train.size()));
}
BENCHMARK(BM_TuneEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
