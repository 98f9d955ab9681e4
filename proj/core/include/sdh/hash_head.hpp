#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdh/tensor.hpp"

namespace sdh {

// Real-valued hash activations, one per bit, each in (0, 1).
using Embedding = std::vector<double>;

struct HashConfig {
  std::size_t bits = 48;
  // Bypass connection: feed [g1; g2] into the hash layer. When false only g2 is used.
  bool use_fc1 = true;
  bool bias = true;

  friend bool operator==(const HashConfig&, const HashConfig&) = default;
};

struct HashParams {
  HashConfig config;
  std::size_t fc1_dim = 0;
  std::size_t fc2_dim = 0;
  Tensor weight;  // (bits, input_dim)
  Tensor bias;    // (bits), empty when config.bias is false

  std::size_t input_dim() const { return (config.use_fc1 ? fc1_dim : 0) + fc2_dim; }

  static HashParams zeros(const HashConfig& config, std::size_t fc1_dim, std::size_t fc2_dim);
  // Glorot uniform weights, zero bias.
  static HashParams initialize(const HashConfig& config, std::size_t fc1_dim, std::size_t fc2_dim,
                               std::uint64_t seed);

  friend bool operator==(const HashParams&, const HashParams&) = default;
};

struct HashGradients {
  Tensor weight;
  Tensor bias;
  Tensor g1;
  Tensor g2;
};

// Pre-sigmoid activations w_i . [g1; g2] + b_i.
std::vector<double> hash_logits(const HashParams& params, const Tensor& g1, const Tensor& g2);

double sigmoid(double z);

// f_i = sigmoid(w_i . [g1; g2] + b_i).
Embedding embed(const HashParams& params, const Tensor& g1, const Tensor& g2);

HashGradients embed_backward(const HashParams& params, const Tensor& g1, const Tensor& g2,
                             std::span<const double> grad_embedding);

// r-bit code packed little-endian into 64-bit words; bits past r stay zero.
class BinaryCode {
 public:
  static constexpr std::size_t kWordBits = 64;

  BinaryCode() = default;
  explicit BinaryCode(std::size_t bits) : bits_(bits), words_(word_count(bits), 0) {}
  BinaryCode(std::size_t bits, std::vector<std::uint64_t> words);

  static std::size_t word_count(std::size_t bits) { return (bits + kWordBits - 1) / kWordBits; }
  // Code from a '0'/'1' string, first character is bit 0.
  static BinaryCode from_string(std::string_view bits);

  std::size_t bits() const { return bits_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool test(std::size_t i) const { return (words_[i / kWordBits] >> (i % kWordBits)) & 1u; }
  void set(std::size_t i, bool value = true);
  std::string to_string() const;

  friend bool operator==(const BinaryCode&, const BinaryCode&) = default;

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint64_t> words_;
};

// bit_i = 1 iff e_i > 0.5; an exact 0.5 quantizes to 0.
BinaryCode quantize(std::span<const double> embedding);

}  // namespace sdh
