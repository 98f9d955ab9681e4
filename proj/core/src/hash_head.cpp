#include "sdh/hash_head.hpp"

#include <cmath>
#include <random>

#include "sdh/error.hpp"

namespace sdh {

HashParams HashParams::zeros(const HashConfig& config, std::size_t fc1_dim, std::size_t fc2_dim) {
  if (config.bits == 0) throw ConfigError("hash code length must be positive");
  if (fc2_dim == 0) throw ConfigError("FC2 dimension must be positive");
  HashParams p;
  p.config = config;
  p.fc1_dim = fc1_dim;
  p.fc2_dim = fc2_dim;
  p.weight = Tensor({config.bits, p.input_dim()});
  if (config.bias) p.bias = Tensor({config.bits});
  return p;
}

HashParams HashParams::initialize(const HashConfig& config, std::size_t fc1_dim, std::size_t fc2_dim,
                                  std::uint64_t seed) {
  HashParams p = zeros(config, fc1_dim, fc2_dim);
  std::mt19937_64 rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(p.input_dim() + config.bits));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : p.weight.values()) v = dist(rng);
  return p;
}

namespace {

void check_inputs(const HashParams& params, const Tensor& g1, const Tensor& g2) {
  if (g2.size() != params.fc2_dim || (params.config.use_fc1 && g1.size() != params.fc1_dim)) {
    throw ConfigError("hash layer expects FC1/FC2 of sizes " + std::to_string(params.fc1_dim) + "/" +
                      std::to_string(params.fc2_dim) + ", got " + std::to_string(g1.size()) + "/" +
                      std::to_string(g2.size()));
  }
}

}  // namespace

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> hash_logits(const HashParams& params, const Tensor& g1, const Tensor& g2) {
  check_inputs(params, g1, g2);
  const std::size_t in_dim = params.input_dim();
  const std::size_t offset = params.config.use_fc1 ? params.fc1_dim : 0;
  std::vector<double> z(params.config.bits);
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double* w = params.weight.data() + i * in_dim;
    double acc = params.bias.empty() ? 0.0 : params.bias[i];
    for (std::size_t k = 0; k < offset; ++k) acc += w[k] * g1[k];
    for (std::size_t k = 0; k < params.fc2_dim; ++k) acc += w[offset + k] * g2[k];
    z[i] = acc;
  }
  return z;
}

Embedding embed(const HashParams& params, const Tensor& g1, const Tensor& g2) {
  Embedding e = hash_logits(params, g1, g2);
  for (double& v : e) v = sigmoid(v);
  return e;
}

HashGradients embed_backward(const HashParams& params, const Tensor& g1, const Tensor& g2,
                             std::span<const double> grad_embedding) {
  check_inputs(params, g1, g2);
  if (grad_embedding.size() != params.config.bits) {
    throw ConfigError("embedding gradient has " + std::to_string(grad_embedding.size()) + " entries, expected " +
                      std::to_string(params.config.bits));
  }
  const Embedding f = embed(params, g1, g2);
  const std::size_t in_dim = params.input_dim();
  const std::size_t offset = params.config.use_fc1 ? params.fc1_dim : 0;
  HashGradients g{Tensor(params.weight.shape()), Tensor(params.bias.shape()), Tensor({params.fc1_dim}),
                  Tensor({params.fc2_dim})};
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double dz = grad_embedding[i] * f[i] * (1.0 - f[i]);
    if (dz == 0.0) continue;
    if (!g.bias.empty()) g.bias[i] += dz;
    const double* w = params.weight.data() + i * in_dim;
    double* gw = g.weight.data() + i * in_dim;
    for (std::size_t k = 0; k < offset; ++k) {
      gw[k] += dz * g1[k];
      g.g1[k] += dz * w[k];
    }
    for (std::size_t k = 0; k < params.fc2_dim; ++k) {
      gw[offset + k] += dz * g2[k];
      g.g2[k] += dz * w[offset + k];
    }
  }
  return g;
}

BinaryCode::BinaryCode(std::size_t bits, std::vector<std::uint64_t> words) : bits_(bits), words_(std::move(words)) {
  if (words_.size() != word_count(bits_)) throw UsageError("packed code has the wrong number of words");
  if (bits_ % kWordBits != 0 && !words_.empty()) {
    const std::uint64_t mask = (std::uint64_t{1} << (bits_ % kWordBits)) - 1;
    if (words_.back() & ~mask) throw UsageError("packed code has nonzero padding bits");
  }
}

BinaryCode BinaryCode::from_string(std::string_view bits) {
  BinaryCode code(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw UsageError("code string must contain only 0 and 1");
    code.set(i, bits[i] == '1');
  }
  return code;
}

void BinaryCode::set(std::size_t i, bool value) {
  const std::uint64_t mask = std::uint64_t{1} << (i % kWordBits);
  if (value) {
    words_[i / kWordBits] |= mask;
  } else {
    words_[i / kWordBits] &= ~mask;
  }
}

std::string BinaryCode::to_string() const {
  std::string s(bits_, '0');
  for (std::size_t i = 0; i < bits_; ++i) {
    if (test(i)) s[i] = '1';
  }
  return s;
}

BinaryCode quantize(std::span<const double> embedding) {
  BinaryCode code(embedding.size());
  for (std::size_t i = 0; i < embedding.size(); ++i) {
    if (embedding[i] > 0.5) code.set(i);
  }
  return code;
}

}  // namespace sdh
