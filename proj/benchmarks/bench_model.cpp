#include <benchmark/benchmark.h>

#include <random>

#include "sdh/losses.hpp"
#include "sdh/model.hpp"

using namespace sdh;

namespace {

Tensor random_image(const Shape& shape, std::mt19937_64& rng) {
  Tensor t(shape);
  std::uniform_real_distribution<double> u(0.0, 255.0);
  for (double& v : t.values()) v = u(rng);
  return t;
}

ModelConfig desk() {
  ModelConfig mc;
  mc.net = NetConfig::desk();
  mc.hash.bits = 48;
  return mc;
}

void BM_DeskForward(benchmark::State& state) {
  const Model m = Model::initialize(desk(), 1);
  std::mt19937_64 rng(1);
  const Tensor img = random_image(m.config.net.input_shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(m.embed(img));
}
BENCHMARK(BM_DeskForward);

void BM_DeskForwardBackward(benchmark::State& state) {
  const Model m = Model::initialize(desk(), 1);
  std::mt19937_64 rng(2);
  const Tensor img = random_image(m.config.net.input_shape(), rng);
  const std::vector<double> upstream(48, 0.01);
  for (auto _ : state) {
    const ModelPass pass = run_forward(m, img);
    benchmark::DoNotOptimize(run_backward(m, pass, upstream));
  }
}
BENCHMARK(BM_DeskForwardBackward);

void BM_StructuredLoss(benchmark::State& state) {
  // 50 identities x 9 pairs, 5 negatives per side, over a 450-slot table
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Embedding> table(450, Embedding(48));
  for (auto& e : table)
    for (double& v : e) v = u(rng);
  std::uniform_int_distribution<std::size_t> pick(0, table.size() - 1);
  StructuredBatch batch{{}, 1.0};
  for (int i = 0; i < 450; ++i) {
    StructuredTerm t{pick(rng), pick(rng), {}, {}};
    for (int k = 0; k < 5; ++k) {
      t.x_negatives.push_back(pick(rng));
      t.y_negatives.push_back(pick(rng));
    }
    batch.terms.push_back(t);
  }
  for (auto _ : state) benchmark::DoNotOptimize(structured_loss(table, batch));
}
BENCHMARK(BM_StructuredLoss);

}  // namespace
