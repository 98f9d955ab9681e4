#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sdh/tensor.hpp"

namespace sdh {

enum class LayerKind { Convolution, MaxPool, FullyConnected };
enum class Activation { Tanh, None };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Convolution;
  std::size_t filter_h = 1;
  std::size_t filter_w = 1;
  std::size_t stride = 1;
  // Output channels for convolution, output dimension for fully-connected, unused for pooling.
  std::size_t outputs = 0;
  Activation activation = Activation::Tanh;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

LayerSpec conv_layer(std::string name, std::size_t filter, std::size_t stride, std::size_t channels);
LayerSpec pool_layer(std::string name, std::size_t filter, std::size_t stride);
LayerSpec fc_layer(std::string name, std::size_t dim);

// Feature stack ending in exactly two fully-connected layers, FC1 then FC2.
struct NetConfig {
  std::size_t input_h = 0;
  std::size_t input_w = 0;
  std::size_t input_c = 0;
  std::vector<LayerSpec> layers;
  bool conv_bias = true;

  Shape input_shape() const { return {input_h, input_w, input_c}; }
  std::size_t fc1_dim() const;
  std::size_t fc2_dim() const;
  std::size_t fc1_index() const { return layers.size() - 2; }

  // Output shape of every layer. Throws ConfigError naming the first layer whose
  // input does not fit, or when the FC1/FC2 tail is malformed.
  std::vector<Shape> output_shapes() const;
  void validate() const { (void)output_shapes(); }

  // Four conv/pool blocks on 160x60x3, FC1 4096, FC2 512.
  static NetConfig reference();
  // 8x8x1 -> conv 3x3/1 x2 -> maxpool 2x2/2 -> FC 16 -> FC 8.
  static NetConfig toy();
  // Small stack used for the synthetic benchmarks (24x12x3 input).
  static NetConfig desk();

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct LayerParams {
  Tensor weight;  // conv: (out, fh, fw, in_c); fc: (out, in); empty for pooling
  Tensor bias;    // (out); empty when the layer has no bias

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct NetParams {
  std::vector<LayerParams> layers;
  std::uint64_t seed = 0;
  // Bumped by every optimizer step so caches from older forwards can be detected.
  std::uint64_t generation = 0;

  // Uniform Glorot init in [-a, a], a = sqrt(6 / (fan_in + fan_out)); zero biases.
  static NetParams initialize(const NetConfig& config, std::uint64_t seed);
  static NetParams zeros(const NetConfig& config);
  std::size_t parameter_count() const;
  void check_matches(const NetConfig& config) const;
};

struct ForwardCache {
  std::uint64_t config_tag = 0;
  std::uint64_t generation = 0;
  // activations[i] is the input of layer i; activations.back() is FC2's output.
  std::vector<Tensor> activations;
  // Flat input index of each pooled maximum, one vector per layer (empty for non-pool layers).
  std::vector<std::vector<std::uint32_t>> argmax;

  // Hash of all pooling argmax choices; changes when a perturbation crosses a tie.
  std::uint64_t routing_signature() const;
};

struct ForwardResult {
  Tensor g1;
  Tensor g2;
  ForwardCache cache;
};

struct NetGradients {
  std::vector<LayerParams> layers;
  Tensor input;
};

std::uint64_t config_tag(const NetConfig& config);

ForwardResult forward(const NetConfig& config, const NetParams& params, const Tensor& image);

NetGradients backward(const NetConfig& config, const NetParams& params, const ForwardCache& cache,
                      const Tensor& grad_g1, const Tensor& grad_g2);

// Gradient buffers shaped like params, all zero.
std::vector<LayerParams> zero_like(const std::vector<LayerParams>& params);
void accumulate(std::vector<LayerParams>& into, const std::vector<LayerParams>& grads, double scale = 1.0);

// Per-channel rescale of 8-bit style pixel values [0, 255] into [-1, 1].
Tensor normalize_image(const Tensor& raw);

}  // namespace sdh
