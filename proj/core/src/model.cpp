#include "sdh/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "sdh/error.hpp"

namespace sdh {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

Model Model::initialize(const ModelConfig& config, std::uint64_t seed) {
  Model m;
  m.config = config;
  m.net = NetParams::initialize(config.net, seed);
  // Distinct stream for the hash layer so changing the net does not reshuffle it.
  m.hash = HashParams::initialize(config.hash, config.net.fc1_dim(), config.net.fc2_dim(),
                                  seed ^ 0x9e3779b97f4a7c15ull);
  return m;
}

Embedding Model::embed(const Tensor& image) const {
  const ForwardResult f = forward(config.net, net, image);
  return sdh::embed(hash, f.g1, f.g2);
}

std::size_t Model::parameter_count() const { return net.parameter_count() + hash.weight.size() + hash.bias.size(); }

ModelGradients ModelGradients::zeros(const Model& model) {
  ModelGradients g;
  g.net = zero_like(model.net.layers);
  g.hash.weight = Tensor(model.hash.weight.shape());
  g.hash.bias = Tensor(model.hash.bias.shape());
  return g;
}

void ModelGradients::add(const ModelGradients& other, double scale) {
  auto mine = parameter_tensors(*this);
  const auto theirs = parameter_tensors(other);
  if (mine.size() != theirs.size()) throw InternalError("gradient sets differ in structure");
  for (std::size_t t = 0; t < mine.size(); ++t) {
    auto dst = mine[t]->values();
    auto src = theirs[t]->values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
  }
}

ModelPass run_forward(const Model& model, const Tensor& image) {
  ModelPass pass;
  pass.features = forward(model.config.net, model.net, image);
  pass.embedding = embed(model.hash, pass.features.g1, pass.features.g2);
  return pass;
}

ModelGradients run_backward(const Model& model, const ModelPass& pass, std::span<const double> grad_embedding) {
  HashGradients hg = embed_backward(model.hash, pass.features.g1, pass.features.g2, grad_embedding);
  NetGradients ng = backward(model.config.net, model.net, pass.features.cache, hg.g1, hg.g2);
  ModelGradients g;
  g.net = std::move(ng.layers);
  g.hash.weight = std::move(hg.weight);
  g.hash.bias = std::move(hg.bias);
  return g;
}

std::vector<Tensor*> parameter_tensors(Model& model) {
  std::vector<Tensor*> out;
  for (auto& l : model.net.layers) {
    if (!l.weight.empty()) out.push_back(&l.weight);
    if (!l.bias.empty()) out.push_back(&l.bias);
  }
  out.push_back(&model.hash.weight);
  if (!model.hash.bias.empty()) out.push_back(&model.hash.bias);
  return out;
}

namespace {

template <class G, class Ptr>
std::vector<Ptr> gradient_tensors(G& grads) {
  std::vector<Ptr> out;
  for (auto& l : grads.net) {
    if (!l.weight.empty()) out.push_back(&l.weight);
    if (!l.bias.empty()) out.push_back(&l.bias);
  }
  out.push_back(&grads.hash.weight);
  if (!grads.hash.bias.empty()) out.push_back(&grads.hash.bias);
  return out;
}

}  // namespace

std::vector<const Tensor*> parameter_tensors(const ModelGradients& grads) {
  return gradient_tensors<const ModelGradients, const Tensor*>(grads);
}

std::vector<Tensor*> parameter_tensors(ModelGradients& grads) { return gradient_tensors<ModelGradients, Tensor*>(grads); }

namespace {

constexpr char kCheckpointMagic[8] = {'S', 'D', 'H', 'C', 'K', 'P', 'T', '1'};

template <class M>
auto named_tensors(M& model) {
  using TensorPtr = decltype(&model.hash.weight);
  std::vector<std::pair<std::string, TensorPtr>> out;
  for (std::size_t i = 0; i < model.net.layers.size(); ++i) {
    const auto& name = model.config.net.layers[i].name;
    auto& l = model.net.layers[i];
    if (!l.weight.empty()) out.emplace_back(name + ".weight", &l.weight);
    if (!l.bias.empty()) out.emplace_back(name + ".bias", &l.bias);
  }
  out.emplace_back("hash.weight", &model.hash.weight);
  if (!model.hash.bias.empty()) out.emplace_back("hash.bias", &model.hash.bias);
  return out;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  std::ostringstream header;
  header << format_model_config(model.config);
  header << "seed = " << model.net.seed << "\n";
  header << "---\n";
  const auto tensors = named_tensors(model);
  for (const auto& [name, t] : tensors) {
    header << "tensor " << name;
    for (std::size_t d : t->shape()) header << ' ' << d;
    header << '\n';
  }
  const std::string text = header.str();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  const auto len = static_cast<std::uint32_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : tensors) {
    out.write(reinterpret_cast<const char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!out) throw IoError("short write on checkpoint " + path.string());
}

Model load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) {
    throw IoError(path.string() + " is not a checkpoint file");
  }
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  std::string text(len, '\0');
  in.read(text.data(), len);
  if (!in) throw IoError("truncated checkpoint header in " + path.string());

  const auto split = text.find("---\n");
  if (split == std::string::npos) throw IoError("checkpoint header has no tensor manifest");
  std::string config_text = text.substr(0, split);
  std::uint64_t seed = 0;
  if (const auto pos = config_text.find("seed = "); pos != std::string::npos) {
    seed = std::stoull(config_text.substr(pos + 7));
    config_text.erase(pos, config_text.find('\n', pos) - pos + 1);
  }
  Model model;
  model.config = parse_model_config(config_text);
  model.net = NetParams::zeros(model.config.net);
  model.net.seed = seed;
  model.hash = HashParams::zeros(model.config.hash, model.config.net.fc1_dim(), model.config.net.fc2_dim());

  std::istringstream manifest(text.substr(split + 4));
  const auto tensors = named_tensors(model);
  std::size_t k = 0;
  for (std::string line; std::getline(manifest, line);) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string tag;
    std::string name;
    fields >> tag >> name;
    Shape shape;
    for (std::size_t d; fields >> d;) shape.push_back(d);
    if (tag != "tensor" || k >= tensors.size() || tensors[k].first != name || tensors[k].second->shape() != shape) {
      throw ConfigError("checkpoint tensor manifest entry '" + line + "' does not match its config");
    }
    ++k;
  }
  if (k != tensors.size()) throw ConfigError("checkpoint tensor manifest is incomplete");
  for (const auto& [name, t] : tensors) {
    in.read(reinterpret_cast<char*>(t->data()), static_cast<std::streamsize>(t->size() * sizeof(double)));
  }
  if (!in) throw IoError("truncated checkpoint payload in " + path.string());
  return model;
}

}  // namespace sdh
