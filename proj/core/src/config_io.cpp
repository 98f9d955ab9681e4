#include "sdh/config_io.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "sdh/error.hpp"

namespace sdh {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

std::size_t parse_count(const std::string& s, int line) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size() || v < 0) throw std::invalid_argument(s);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("line " + std::to_string(line) + ": expected a non-negative integer, got '" + s + "'");
  }
}

bool parse_bool(const std::string& s, int line) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ConfigError("line " + std::to_string(line) + ": expected a boolean, got '" + s + "'");
}

Activation parse_activation(const std::string& s, int line) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "none") return Activation::None;
  throw ConfigError("line " + std::to_string(line) + ": unknown activation '" + s + "'");
}

LayerSpec parse_layer(const std::vector<std::string>& f, int line) {
  const auto need = [&](std::size_t n) {
    if (f.size() != n) {
      throw ConfigError("line " + std::to_string(line) + ": layer '" + (f.empty() ? "" : f[0]) + "' expects " +
                        std::to_string(n) + " fields, got " + std::to_string(f.size()));
    }
  };
  if (f.size() < 2) throw ConfigError("line " + std::to_string(line) + ": layer needs a name and a kind");
  LayerSpec spec;
  spec.name = f[0];
  const std::string& kind = f[1];
  if (kind == "conv") {
    need(7);
    spec.kind = LayerKind::Convolution;
    spec.filter_h = parse_count(f[2], line);
    spec.filter_w = parse_count(f[3], line);
    spec.stride = parse_count(f[4], line);
    spec.outputs = parse_count(f[5], line);
    spec.activation = parse_activation(f[6], line);
  } else if (kind == "maxpool") {
    need(5);
    spec.kind = LayerKind::MaxPool;
    spec.filter_h = parse_count(f[2], line);
    spec.filter_w = parse_count(f[3], line);
    spec.stride = parse_count(f[4], line);
    spec.activation = Activation::None;
  } else if (kind == "fc") {
    need(4);
    spec.kind = LayerKind::FullyConnected;
    spec.outputs = parse_count(f[2], line);
    spec.activation = parse_activation(f[3], line);
  } else {
    throw ConfigError("line " + std::to_string(line) + ": unknown layer kind '" + kind + "'");
  }
  return spec;
}

const char* activation_name(Activation a) { return a == Activation::Tanh ? "tanh" : "none"; }

}  // namespace

ModelConfig parse_model_config(std::string_view text) {
  ModelConfig config;
  config.net.layers.clear();
  bool have_input = false;
  std::istringstream in{std::string(text)};
  int line_no = 0;
  for (std::string raw; std::getline(in, raw);) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto fields = words(value);
    if (key == "input") {
      if (fields.size() != 3) throw ConfigError("line " + std::to_string(line_no) + ": input needs H W C");
      config.net.input_h = parse_count(fields[0], line_no);
      config.net.input_w = parse_count(fields[1], line_no);
      config.net.input_c = parse_count(fields[2], line_no);
      have_input = true;
    } else if (key == "conv_bias") {
      config.net.conv_bias = parse_bool(value, line_no);
    } else if (key == "layer") {
      config.net.layers.push_back(parse_layer(fields, line_no));
    } else if (key == "bits") {
      config.hash.bits = parse_count(value, line_no);
    } else if (key == "skip") {
      if (value == "fc1+fc2") {
        config.hash.use_fc1 = true;
      } else if (value == "fc2") {
        config.hash.use_fc1 = false;
      } else {
        throw ConfigError("line " + std::to_string(line_no) + ": skip must be 'fc1+fc2' or 'fc2'");
      }
    } else if (key == "hash_bias") {
      config.hash.bias = parse_bool(value, line_no);
    } else {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!have_input) throw ConfigError("config is missing the 'input' key");
  if (config.hash.bits == 0) throw ConfigError("bits must be positive");
  config.net.validate();
  return config;
}

std::string format_net_config(const NetConfig& config) {
  std::ostringstream out;
  out << "input = " << config.input_h << ' ' << config.input_w << ' ' << config.input_c << '\n';
  out << "conv_bias = " << (config.conv_bias ? "true" : "false") << '\n';
  for (const LayerSpec& l : config.layers) {
    out << "layer = " << l.name << ' ';
    switch (l.kind) {
      case LayerKind::Convolution:
        out << "conv " << l.filter_h << ' ' << l.filter_w << ' ' << l.stride << ' ' << l.outputs << ' '
            << activation_name(l.activation);
        break;
      case LayerKind::MaxPool:
        out << "maxpool " << l.filter_h << ' ' << l.filter_w << ' ' << l.stride;
        break;
      case LayerKind::FullyConnected:
        out << "fc " << l.outputs << ' ' << activation_name(l.activation);
        break;
    }
    out << '\n';
  }
  return out.str();
}

std::string format_model_config(const ModelConfig& config) {
  std::string text = format_net_config(config.net);
  text += "bits = " + std::to_string(config.hash.bits) + "\n";
  text += std::string("skip = ") + (config.hash.use_fc1 ? "fc1+fc2" : "fc2") + "\n";
  text += std::string("hash_bias = ") + (config.hash.bias ? "true" : "false") + "\n";
  return text;
}

ModelConfig load_model_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model_config(buf.str());
}

void save_model_config(const std::filesystem::path& path, const ModelConfig& config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file " + path.string());
  out << format_model_config(config);
}

}  // namespace sdh
