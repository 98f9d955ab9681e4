#include <doctest.h>

#include <cmath>

#include "sdh/error.hpp"
#include "sdh/gradcheck.hpp"
#include "sdh/hash_head.hpp"
#include "support.hpp"

using namespace sdh;
using sdh::test::random_tensor;

namespace {

HashParams random_params(std::size_t bits, std::size_t d1, std::size_t d2, std::uint64_t seed, bool use_fc1 = true) {
  HashConfig hc;
  hc.bits = bits;
  hc.use_fc1 = use_fc1;
  HashParams p = HashParams::initialize(hc, d1, d2, seed);
  std::mt19937_64 rng(seed + 1);
  for (double& v : p.bias.values()) v = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
  return p;
}

}  // namespace

TEST_CASE("zero weights embed to one half") {
  const HashParams p = HashParams::zeros(HashConfig{}, 6, 4);
  std::mt19937_64 rng(1);
  const Embedding e = embed(p, random_tensor({6}, rng), random_tensor({4}, rng));
  REQUIRE(e.size() == 48);
  for (double v : e) CHECK(v == 0.5);
  CHECK(quantize(e).to_string() == std::string(48, '0'));
}

TEST_CASE("sigmoid of ln 3 is three quarters") {
  HashConfig hc;
  hc.bits = 1;
  HashParams p = HashParams::zeros(hc, 1, 1);
  p.weight[0] = 1.0;
  p.weight[1] = 0.5;
  p.bias[0] = std::log(3.0) - 0.5 * 0.4 - 0.6;
  const Embedding e = embed(p, Tensor({1}, 0.6), Tensor({1}, 0.4));
  CHECK(e[0] == doctest::Approx(0.75).epsilon(1e-14));
}

TEST_CASE("embedding entries stay strictly inside the unit interval") {
  const HashParams p = random_params(32, 10, 8, 3);
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    for (double v : embed(p, random_tensor({10}, rng), random_tensor({8}, rng))) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}

TEST_CASE("FC2-only head ignores g1, bypass head does not") {
  std::mt19937_64 rng(5);
  const Tensor g2 = random_tensor({8}, rng);
  const HashParams fc2_only = random_params(16, 10, 8, 7, false);
  CHECK(fc2_only.weight.shape() == Shape{16, 8});
  CHECK(embed(fc2_only, random_tensor({10}, rng), g2) == embed(fc2_only, random_tensor({10}, rng), g2));

  const HashParams both = random_params(16, 10, 8, 7, true);
  CHECK(embed(both, random_tensor({10}, rng), g2) != embed(both, random_tensor({10}, rng), g2));
}

TEST_CASE("dimension mismatch is a configuration error") {
  const HashParams p = random_params(8, 4, 3, 1);
  CHECK_THROWS_AS(embed(p, Tensor({4}), Tensor({2})), ConfigError);
  CHECK_THROWS_AS(embed(p, Tensor({5}), Tensor({3})), ConfigError);
}

TEST_CASE("quantize thresholds above one half") {
  const std::vector<double> e = {0.7, 0.3, 0.51};
  CHECK(quantize(e).to_string() == "101");
  const std::vector<double> tie = {0.5, 0.5};
  CHECK(quantize(tie).to_string() == "00");
}

TEST_CASE("codes agree with the sign of the logits and ignore logit scaling") {
  std::mt19937_64 rng(8);
  HashParams p = random_params(48, 12, 6, 9);
  for (int t = 0; t < 100; ++t) {
    const Tensor g1 = random_tensor({12}, rng);
    const Tensor g2 = random_tensor({6}, rng);
    const auto z = hash_logits(p, g1, g2);
    const BinaryCode code = quantize(embed(p, g1, g2));
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(code.test(i) == (z[i] > 0.0));

    HashParams scaled = p;
    const double c = std::uniform_real_distribution<double>(0.01, 20.0)(rng);
    for (double& v : scaled.weight.values()) v *= c;
    for (double& v : scaled.bias.values()) v *= c;
    CHECK(quantize(embed(scaled, g1, g2)) == code);
  }
}

TEST_CASE("packed codes use ceil(r/64) words with zero padding") {
  for (std::size_t r : {1u, 24u, 32u, 48u, 63u, 64u, 65u, 128u, 130u}) {
    std::vector<double> e(r, 0.9);
    const BinaryCode code = quantize(e);
    CHECK(code.words().size() == (r + 63) / 64);
    if (r % 64 != 0) CHECK((code.words().back() >> (r % 64)) == 0);
    CHECK(code.to_string() == std::string(r, '1'));
  }
  CHECK_THROWS_AS(BinaryCode(3, {0xFFu}), UsageError);
  CHECK(BinaryCode::from_string("0110").test(1));
}

TEST_CASE("embed_backward: zero upstream gives zero gradients") {
  const HashParams p = random_params(8, 4, 3, 2);
  std::mt19937_64 rng(1);
  const std::vector<double> up(8, 0.0);
  const HashGradients g = embed_backward(p, random_tensor({4}, rng), random_tensor({3}, rng), up);
  for (const Tensor* t : {&g.weight, &g.bias, &g.g1, &g.g2})
    for (double v : t->values()) CHECK(v == 0.0);
}

TEST_CASE("embed_backward single unit matches the hand derivative") {
  HashConfig hc;
  hc.bits = 1;
  HashParams p = HashParams::zeros(hc, 1, 1);
  p.weight[0] = 0.8;
  p.weight[1] = -1.3;
  p.bias[0] = 0.2;
  const double g1 = 0.4, g2 = -0.7, up = 1.7;
  const double z = 0.8 * g1 - 1.3 * g2 + 0.2;
  const double s = 1.0 / (1.0 + std::exp(-z));
  const double dz = s * (1.0 - s) * up;
  const std::vector<double> upv = {up};
  const HashGradients g = embed_backward(p, Tensor({1}, g1), Tensor({1}, g2), upv);
  CHECK(g.weight[0] == doctest::Approx(dz * g1).epsilon(1e-14));
  CHECK(g.weight[1] == doctest::Approx(dz * g2).epsilon(1e-14));
  CHECK(g.bias[0] == doctest::Approx(dz).epsilon(1e-14));
  CHECK(g.g1[0] == doctest::Approx(dz * 0.8).epsilon(1e-14));
  CHECK(g.g2[0] == doctest::Approx(dz * -1.3).epsilon(1e-14));
}

TEST_CASE("embed_backward matches central differences") {
  std::mt19937_64 rng(12);
  for (bool use_fc1 : {true, false}) {
    HashParams p = random_params(10, 7, 5, 21, use_fc1);
    Tensor g1 = random_tensor({7}, rng);
    Tensor g2 = random_tensor({5}, rng);
    const std::vector<double> up = test::random_vector(10, rng, -1.0, 1.0);
    const auto loss = [&] {
      const Embedding e = embed(p, g1, g2);
      double v = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) v += up[i] * e[i];
      return LossProbe{v, 0};
    };
    const HashGradients g = embed_backward(p, g1, g2, up);
    std::vector<ParamBlock> blocks = {{p.weight.values(), g.weight.values()},
                                      {p.bias.values(), g.bias.values()},
                                      {g2.values(), g.g2.values()}};
    if (use_fc1) blocks.push_back({g1.values(), g.g1.values()});
    const GradCheckReport rep = finite_difference_check(blocks, loss);
    CHECK(rep.excluded == 0);
    CHECK(rep.max_relative_error < 1e-5);
  }
}
