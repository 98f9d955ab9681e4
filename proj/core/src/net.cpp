#include "sdh/net.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sdh/config_io.hpp"
#include "sdh/error.hpp"

namespace sdh {

LayerSpec conv_layer(std::string name, std::size_t filter, std::size_t stride, std::size_t channels) {
  return {std::move(name), LayerKind::Convolution, filter, filter, stride, channels, Activation::Tanh};
}

LayerSpec pool_layer(std::string name, std::size_t filter, std::size_t stride) {
  return {std::move(name), LayerKind::MaxPool, filter, filter, stride, 0, Activation::None};
}

LayerSpec fc_layer(std::string name, std::size_t dim) {
  return {std::move(name), LayerKind::FullyConnected, 1, 1, 1, dim, Activation::Tanh};
}

std::size_t NetConfig::fc1_dim() const { return layers.at(layers.size() - 2).outputs; }
std::size_t NetConfig::fc2_dim() const { return layers.back().outputs; }

std::vector<Shape> NetConfig::output_shapes() const {
  if (input_h == 0 || input_w == 0 || input_c == 0) {
    throw ConfigError("input shape " + shape_string(input_shape()) + " has a zero dimension");
  }
  if (layers.size() < 2 || layers[layers.size() - 2].kind != LayerKind::FullyConnected ||
      layers.back().kind != LayerKind::FullyConnected) {
    throw ConfigError("network must end with two fully-connected layers (FC1, FC2)");
  }
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape current = input_shape();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& layer = layers[i];
    const std::string label = "layer " + std::to_string(i) + " '" + layer.name + "'";
    if (layer.kind == LayerKind::FullyConnected) {
      if (i + 2 < layers.size()) {
        throw ConfigError(label + ": fully-connected layers are only allowed as the final FC1/FC2 pair");
      }
      if (layer.outputs == 0) throw ConfigError(label + ": output dimension must be positive");
      if (layer.activation != Activation::Tanh) throw ConfigError(label + ": fully-connected layers use tanh");
      current = {layer.outputs};
      shapes.push_back(current);
      continue;
    }
    if (layer.stride == 0 || layer.filter_h == 0 || layer.filter_w == 0) {
      throw ConfigError(label + ": filter size and stride must be at least 1");
    }
    if (current.size() != 3) throw ConfigError(label + ": spatial layer after a flattening layer");
    if (layer.filter_h > current[0] || layer.filter_w > current[1]) {
      throw ConfigError(label + ": filter " + std::to_string(layer.filter_h) + "x" + std::to_string(layer.filter_w) +
                        " does not fit input " + shape_string(current));
    }
    const std::size_t out_h = (current[0] - layer.filter_h) / layer.stride + 1;
    const std::size_t out_w = (current[1] - layer.filter_w) / layer.stride + 1;
    if (layer.kind == LayerKind::Convolution) {
      if (layer.outputs == 0) throw ConfigError(label + ": output channels must be positive");
      if (layer.activation != Activation::Tanh) throw ConfigError(label + ": convolution layers use tanh");
      current = {out_h, out_w, layer.outputs};
    } else {
      if (layer.activation != Activation::None) throw ConfigError(label + ": pooling has no activation");
      current = {out_h, out_w, current[2]};
    }
    shapes.push_back(current);
  }
  return shapes;
}

NetConfig NetConfig::reference() {
  NetConfig c;
  c.input_h = 160;
  c.input_w = 60;
  c.input_c = 3;
  c.layers = {conv_layer("conv0", 3, 1, 32), pool_layer("pool0", 2, 2), conv_layer("conv1", 3, 1, 32),
              pool_layer("pool1", 2, 2),     conv_layer("conv2", 3, 1, 32), conv_layer("pool2", 3, 2, 32),
              conv_layer("conv3", 3, 1, 32), pool_layer("pool4", 1, 1), fc_layer("fc1", 4096),
              fc_layer("fc2", 512)};
  return c;
}

NetConfig NetConfig::toy() {
  NetConfig c;
  c.input_h = 8;
  c.input_w = 8;
  c.input_c = 1;
  c.layers = {conv_layer("conv0", 3, 1, 2), pool_layer("pool0", 2, 2), fc_layer("fc1", 16), fc_layer("fc2", 8)};
  return c;
}

NetConfig NetConfig::desk() {
  NetConfig c;
  c.input_h = 24;
  c.input_w = 12;
  c.input_c = 3;
  c.layers = {conv_layer("conv0", 3, 1, 8), pool_layer("pool0", 2, 2), conv_layer("conv1", 3, 1, 16),
              pool_layer("pool1", 2, 2),    fc_layer("fc1", 64),        fc_layer("fc2", 32)};
  return c;
}

namespace {

std::size_t input_size(const NetConfig& config, std::size_t layer, const std::vector<Shape>& shapes) {
  return shape_size(layer == 0 ? config.input_shape() : shapes[layer - 1]);
}

std::size_t input_channels(const NetConfig& config, std::size_t layer, const std::vector<Shape>& shapes) {
  return layer == 0 ? config.input_c : shapes[layer - 1].back();
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values()) v = dist(rng);
}

}  // namespace

NetParams NetParams::zeros(const NetConfig& config) {
  const auto shapes = config.output_shapes();
  NetParams params;
  params.layers.resize(config.layers.size());
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& layer = config.layers[i];
    LayerParams& p = params.layers[i];
    if (layer.kind == LayerKind::Convolution) {
      p.weight = Tensor({layer.outputs, layer.filter_h, layer.filter_w, input_channels(config, i, shapes)});
      if (config.conv_bias) p.bias = Tensor({layer.outputs});
    } else if (layer.kind == LayerKind::FullyConnected) {
      p.weight = Tensor({layer.outputs, input_size(config, i, shapes)});
      p.bias = Tensor({layer.outputs});
    }
  }
  return params;
}

NetParams NetParams::initialize(const NetConfig& config, std::uint64_t seed) {
  NetParams params = zeros(config);
  params.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& layer = config.layers[i];
    Tensor& w = params.layers[i].weight;
    if (w.empty()) continue;
    double fan_in = 0;
    double fan_out = 0;
    if (layer.kind == LayerKind::Convolution) {
      const double area = static_cast<double>(layer.filter_h * layer.filter_w);
      fan_in = area * static_cast<double>(w.shape()[3]);
      fan_out = area * static_cast<double>(layer.outputs);
    } else {
      fan_in = static_cast<double>(w.shape()[1]);
      fan_out = static_cast<double>(layer.outputs);
    }
    fill_uniform(w, std::sqrt(6.0 / (fan_in + fan_out)), rng);
  }
  return params;
}

std::size_t NetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

void NetParams::check_matches(const NetConfig& config) const {
  const NetParams expected = zeros(config);
  if (expected.layers.size() != layers.size()) {
    throw ConfigError("parameter set has " + std::to_string(layers.size()) + " layers, config has " +
                      std::to_string(expected.layers.size()));
  }
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (expected.layers[i].weight.shape() != layers[i].weight.shape() ||
        expected.layers[i].bias.shape() != layers[i].bias.shape()) {
      throw ConfigError("parameters of layer '" + config.layers[i].name + "' do not match its spec (weight " +
                        shape_string(layers[i].weight.shape()) + ", expected " +
                        shape_string(expected.layers[i].weight.shape()) + ")");
    }
  }
}

std::uint64_t ForwardCache::routing_signature() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& layer : argmax) {
    for (std::uint32_t v : layer) {
      h ^= v;
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::uint64_t config_tag(const NetConfig& config) {
  const std::string text = format_net_config(config);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

void conv_forward(const LayerSpec& layer, const LayerParams& p, const Tensor& in, Tensor& out) {
  const std::size_t in_w = in.shape()[1];
  const std::size_t in_c = in.shape()[2];
  const std::size_t out_h = out.shape()[0];
  const std::size_t out_w = out.shape()[1];
  const std::size_t out_c = out.shape()[2];
  const std::size_t row_len = layer.filter_w * in_c;
  const double* w = p.weight.data();
  const double* x = in.data();
  double* y = out.data();
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      double* dst = y + (oy * out_w + ox) * out_c;
      for (std::size_t o = 0; o < out_c; ++o) {
        double acc = p.bias.empty() ? 0.0 : p.bias[o];
        const double* wo = w + o * layer.filter_h * row_len;
        for (std::size_t dy = 0; dy < layer.filter_h; ++dy) {
          const double* src = x + ((oy * layer.stride + dy) * in_w + ox * layer.stride) * in_c;
          const double* wr = wo + dy * row_len;
          for (std::size_t k = 0; k < row_len; ++k) acc += wr[k] * src[k];
        }
        dst[o] = std::tanh(acc);
      }
    }
  }
}

void conv_backward(const LayerSpec& layer, const LayerParams& p, const Tensor& in, const Tensor& grad_pre,
                   LayerParams& g, Tensor& grad_in) {
  const std::size_t in_w = in.shape()[1];
  const std::size_t in_c = in.shape()[2];
  const std::size_t out_h = grad_pre.shape()[0];
  const std::size_t out_w = grad_pre.shape()[1];
  const std::size_t out_c = grad_pre.shape()[2];
  const std::size_t row_len = layer.filter_w * in_c;
  const double* w = p.weight.data();
  const double* x = in.data();
  double* gw = g.weight.data();
  double* gx = grad_in.data();
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      const double* go = grad_pre.data() + (oy * out_w + ox) * out_c;
      for (std::size_t o = 0; o < out_c; ++o) {
        const double d = go[o];
        if (d == 0.0) continue;
        if (!g.bias.empty()) g.bias[o] += d;
        const std::size_t wo = o * layer.filter_h * row_len;
        for (std::size_t dy = 0; dy < layer.filter_h; ++dy) {
          const std::size_t base = ((oy * layer.stride + dy) * in_w + ox * layer.stride) * in_c;
          const double* src = x + base;
          double* gsrc = gx + base;
          const double* wr = w + wo + dy * row_len;
          double* gwr = gw + wo + dy * row_len;
          for (std::size_t k = 0; k < row_len; ++k) {
            gwr[k] += d * src[k];
            gsrc[k] += d * wr[k];
          }
        }
      }
    }
  }
}

void pool_forward(const LayerSpec& layer, const Tensor& in, Tensor& out, std::vector<std::uint32_t>& argmax) {
  const std::size_t in_w = in.shape()[1];
  const std::size_t c = in.shape()[2];
  const std::size_t out_h = out.shape()[0];
  const std::size_t out_w = out.shape()[1];
  argmax.assign(out.size(), 0);
  for (std::size_t oy = 0; oy < out_h; ++oy) {
    for (std::size_t ox = 0; ox < out_w; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        std::size_t best = ((oy * layer.stride) * in_w + ox * layer.stride) * c + ch;
        for (std::size_t dy = 0; dy < layer.filter_h; ++dy) {
          for (std::size_t dx = 0; dx < layer.filter_w; ++dx) {
            const std::size_t idx = ((oy * layer.stride + dy) * in_w + ox * layer.stride + dx) * c + ch;
            if (in[idx] > in[best]) best = idx;
          }
        }
        const std::size_t o = (oy * out_w + ox) * c + ch;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

void fc_forward(const LayerParams& p, const Tensor& in, Tensor& out) {
  const std::size_t n_in = in.size();
  const double* w = p.weight.data();
  for (std::size_t o = 0; o < out.size(); ++o) {
    double acc = p.bias[o];
    const double* row = w + o * n_in;
    for (std::size_t k = 0; k < n_in; ++k) acc += row[k] * in[k];
    out[o] = std::tanh(acc);
  }
}

void fc_backward(const LayerParams& p, const Tensor& in, const Tensor& grad_pre, LayerParams& g, Tensor& grad_in) {
  const std::size_t n_in = in.size();
  const double* w = p.weight.data();
  for (std::size_t o = 0; o < grad_pre.size(); ++o) {
    const double d = grad_pre[o];
    if (d == 0.0) continue;
    g.bias[o] += d;
    const double* row = w + o * n_in;
    double* grow = g.weight.data() + o * n_in;
    for (std::size_t k = 0; k < n_in; ++k) {
      grow[k] += d * in[k];
      grad_in[k] += d * row[k];
    }
  }
}

}  // namespace

ForwardResult forward(const NetConfig& config, const NetParams& params, const Tensor& image) {
  if (image.shape() != config.input_shape()) {
    throw ConfigError("input image shape " + shape_string(image.shape()) + " does not match configured input " +
                      shape_string(config.input_shape()));
  }
  const auto shapes = config.output_shapes();
  if (params.layers.size() != config.layers.size()) {
    throw ConfigError("parameter set does not match network config");
  }
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.config_tag = config_tag(config);
  cache.generation = params.generation;
  cache.activations.reserve(config.layers.size() + 1);
  cache.activations.push_back(image);
  cache.argmax.resize(config.layers.size());
  for (std::size_t i = 0; i < config.layers.size(); ++i) {
    const LayerSpec& layer = config.layers[i];
    const Tensor& in = cache.activations.back();
    Tensor out(shapes[i]);
    switch (layer.kind) {
      case LayerKind::Convolution:
        conv_forward(layer, params.layers[i], in, out);
        break;
      case LayerKind::MaxPool:
        pool_forward(layer, in, out, cache.argmax[i]);
        break;
      case LayerKind::FullyConnected:
        fc_forward(params.layers[i], in, out);
        break;
    }
    cache.activations.push_back(std::move(out));
  }
  const std::size_t n = config.layers.size();
  result.g1 = cache.activations[n - 1];
  result.g2 = cache.activations[n];
  return result;
}

NetGradients backward(const NetConfig& config, const NetParams& params, const ForwardCache& cache,
                      const Tensor& grad_g1, const Tensor& grad_g2) {
  const std::size_t n = config.layers.size();
  if (cache.config_tag != config_tag(config) || cache.activations.size() != n + 1 || cache.argmax.size() != n) {
    throw InternalError("forward cache was produced by a different network configuration");
  }
  if (cache.generation != params.generation) {
    throw InternalError("forward cache is stale: parameters changed since the forward pass");
  }
  if (grad_g1.size() != config.fc1_dim() || grad_g2.size() != config.fc2_dim()) {
    throw ConfigError("upstream gradient sizes do not match FC1/FC2 dimensions");
  }
  NetGradients grads;
  grads.layers = zero_like(params.layers);
  Tensor grad_out = grad_g2;
  for (std::size_t i = n; i-- > 0;) {
    const LayerSpec& layer = config.layers[i];
    const Tensor& in = cache.activations[i];
    const Tensor& out = cache.activations[i + 1];
    if (i == config.fc1_index()) {
      for (std::size_t k = 0; k < grad_out.size(); ++k) grad_out[k] += grad_g1[k];
    }
    if (layer.activation == Activation::Tanh) {
      for (std::size_t k = 0; k < grad_out.size(); ++k) grad_out[k] *= 1.0 - out[k] * out[k];
    }
    Tensor grad_in(in.shape());
    switch (layer.kind) {
      case LayerKind::Convolution:
        conv_backward(layer, params.layers[i], in, grad_out, grads.layers[i], grad_in);
        break;
      case LayerKind::MaxPool: {
        const auto& routes = cache.argmax[i];
        for (std::size_t k = 0; k < grad_out.size(); ++k) grad_in[routes[k]] += grad_out[k];
        break;
      }
      case LayerKind::FullyConnected:
        fc_backward(params.layers[i], in, grad_out, grads.layers[i], grad_in);
        break;
    }
    grad_out = std::move(grad_in);
  }
  grads.input = std::move(grad_out);
  return grads;
}

std::vector<LayerParams> zero_like(const std::vector<LayerParams>& params) {
  std::vector<LayerParams> out(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out[i].weight = Tensor(params[i].weight.shape());
    out[i].bias = Tensor(params[i].bias.shape());
  }
  return out;
}

void accumulate(std::vector<LayerParams>& into, const std::vector<LayerParams>& grads, double scale) {
  if (into.size() != grads.size()) throw InternalError("gradient layer count mismatch");
  for (std::size_t i = 0; i < into.size(); ++i) {
    auto w = into[i].weight.values();
    auto gw = grads[i].weight.values();
    for (std::size_t k = 0; k < w.size(); ++k) w[k] += scale * gw[k];
    auto b = into[i].bias.values();
    auto gb = grads[i].bias.values();
    for (std::size_t k = 0; k < b.size(); ++k) b[k] += scale * gb[k];
  }
}

Tensor normalize_image(const Tensor& raw) {
  Tensor out(raw.shape());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = raw[i] / 127.5 - 1.0;
  return out;
}

}  // namespace sdh
