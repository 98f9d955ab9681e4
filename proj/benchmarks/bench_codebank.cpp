#include <benchmark/benchmark.h>

#include <random>

#include "sdh/codebank.hpp"

using namespace sdh;

namespace {

BinaryCode random_code(std::size_t bits, std::mt19937_64& rng) {
  BinaryCode c(bits);
  for (std::size_t i = 0; i < bits; ++i) c.set(i, rng() & 1u);
  return c;
}

CodeBank random_bank(std::size_t bits, std::size_t n) {
  std::mt19937_64 rng(1);
  CodeBank bank(bits);
  for (std::size_t i = 0; i < n; ++i) {
    bank.add({random_code(bits, rng), static_cast<std::int64_t>(i / 4), static_cast<std::int64_t>(i % 2),
              static_cast<std::int64_t>(i)});
  }
  return bank;
}

void BM_Distances(benchmark::State& state) {
  const auto bits = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const CodeBank bank = random_bank(bits, n);
  std::mt19937_64 rng(2);
  const BinaryCode q = random_code(bits, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bank.distances(q));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Distances)->Args({48, 100000})->Args({128, 100000})->Args({512, 100000});

void BM_Rank(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const CodeBank bank = random_bank(48, n);
  std::mt19937_64 rng(3);
  const BinaryCode q = random_code(48, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bank.rank(q, {-1, 0, std::nullopt}));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Rank)->Arg(1000)->Arg(100000);

void BM_RadiusSearch(benchmark::State& state) {
  const CodeBank bank = random_bank(48, 100000);
  std::mt19937_64 rng(4);
  const BinaryCode q = random_code(48, rng);
  for (auto _ : state) benchmark::DoNotOptimize(bank.radius_search(q, {-1, 0, std::nullopt}, 2));
}
BENCHMARK(BM_RadiusSearch);

}  // namespace
