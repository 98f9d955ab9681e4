#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sdh/config_io.hpp"
#include "sdh/hash_head.hpp"
#include "sdh/net.hpp"

namespace sdh {

// CNN feature stack plus hash layer: image -> embedding -> binary code.
struct Model {
  ModelConfig config;
  NetParams net;
  HashParams hash;

  static Model initialize(const ModelConfig& config, std::uint64_t seed);

  Embedding embed(const Tensor& image) const;
  BinaryCode encode(const Tensor& image) const { return quantize(embed(image)); }

  std::size_t parameter_count() const;
};

struct ModelPass {
  ForwardResult features;
  Embedding embedding;
};

struct ModelGradients {
  std::vector<LayerParams> net;
  LayerParams hash;

  static ModelGradients zeros(const Model& model);
  void add(const ModelGradients& other, double scale = 1.0);
};

ModelPass run_forward(const Model& model, const Tensor& image);
ModelGradients run_backward(const Model& model, const ModelPass& pass, std::span<const double> grad_embedding);

// Every parameter tensor of the model, in checkpoint order. Gradients use the same order.
std::vector<Tensor*> parameter_tensors(Model& model);
std::vector<const Tensor*> parameter_tensors(const ModelGradients& grads);
std::vector<Tensor*> parameter_tensors(ModelGradients& grads);

// Binary checkpoint:
//   "SDHCKPT1" | u32 header length | header text | little-endian f64 payload
// The header holds the model config, then a "---" line, then one
// "tensor <name> <dims...>" line per parameter tensor in payload order.
void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace sdh
