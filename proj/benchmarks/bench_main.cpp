#include <random>

#include <benchmark/benchmark.h>

#include "modlab/accounting/accounting.hpp"
#include "modlab/model/decoder.hpp"
#include "modlab/stats/stats.hpp"
#include "modlab/tensor/ops.hpp"

using namespace modlab;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(r * c);
  for (auto& x : v) x = n(rng);
  return Tensor::constant({r, c}, std::move(v));
}

std::vector<int> tokens(std::size_t n) {
  std::vector<int> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = static_cast<int>((i * 37 + 11) % 256);
  return t;
}

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_DecoderForward(benchmark::State& state) {
  const auto tag = model::all_methods()[static_cast<std::size_t>(state.range(0))];
  model::Decoder m(model::ModelConfig::toy(), model::MethodSpec::from_tag(tag), 1);
  const auto t = tokens(32);
  for (auto _ : state) benchmark::DoNotOptimize(m.loss(t).item());
  state.SetLabel(std::string(model::to_string(tag)));
}
BENCHMARK(BM_DecoderForward)->DenseRange(0, 19);

void BM_DecoderForwardBackward(benchmark::State& state) {
  const auto tag = model::all_methods()[static_cast<std::size_t>(state.range(0))];
  model::Decoder m(model::ModelConfig::toy(), model::MethodSpec::from_tag(tag), 1);
  const auto t = tokens(32);
  for (auto _ : state) {
    m.params().zero_grad();
    Tensor loss = m.loss(t);
    loss.backward();
  }
  state.SetLabel(std::string(model::to_string(tag)));
}
BENCHMARK(BM_DecoderForwardBackward)->DenseRange(0, 19);

void BM_Bootstrap(benchmark::State& state) {
  const auto floor = stats::SeedSet::from_values("baseline", {0.4820, 0.4815, 0.4853});
  const auto other = stats::SeedSet::from_values("softpick", {0.4922, 0.4905, 0.4931});
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::bootstrap_floor(floor, other, static_cast<std::size_t>(state.range(0)), 0));
  }
}
BENCHMARK(BM_Bootstrap)->Arg(1000)->Arg(10000);

void BM_StepFlopsTable(benchmark::State& state) {
  const auto cfg = model::ModelConfig::llama_1p2b();
  for (auto _ : state) benchmark::DoNotOptimize(acct::delta_table(cfg, 1024));
}
BENCHMARK(BM_StepFlopsTable);

}  // namespace

BENCHMARK_MAIN();
