#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "sdh/hash_head.hpp"
#include "sdh/net.hpp"

namespace sdh {

// Network plus hash-layer configuration, read from one key-value text file:
//
//   # comments start with '#'
//   input = 24 12 3                      # height width channels
//   conv_bias = true
//   layer = conv0 conv 3 3 1 8 tanh      # name kind fh fw stride channels activation
//   layer = pool0 maxpool 2 2 2          # name kind fh fw stride
//   layer = fc1 fc 64 tanh               # name kind dim activation
//   layer = fc2 fc 32 tanh
//   bits = 48
//   skip = fc1+fc2                       # or fc2
//   hash_bias = true
//
// Layers appear in file order. The hash keys are optional.
struct ModelConfig {
  NetConfig net;
  HashConfig hash;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

ModelConfig parse_model_config(std::string_view text);
std::string format_model_config(const ModelConfig& config);
std::string format_net_config(const NetConfig& config);

ModelConfig load_model_config(const std::filesystem::path& path);
void save_model_config(const std::filesystem::path& path, const ModelConfig& config);

}  // namespace sdh
