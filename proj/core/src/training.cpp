#include "sdh/training.hpp"

#include <cmath>
#include <random>
#include <string>

#include "sdh/error.hpp"

namespace sdh {

LossKind parse_loss_kind(std::string_view name) {
  if (name == "contrastive") return LossKind::Contrastive;
  if (name == "triplet") return LossKind::Triplet;
  if (name == "structured") return LossKind::Structured;
  throw UsageError("unknown loss '" + std::string(name) + "' (expected contrastive, triplet or structured)");
}

std::string_view loss_kind_name(LossKind kind) {
  switch (kind) {
    case LossKind::Contrastive:
      return "contrastive";
    case LossKind::Triplet:
      return "triplet";
    case LossKind::Structured:
      return "structured";
  }
  return "?";
}

std::optional<std::size_t> TrainReport::epochs_to_fraction(double fraction) const {
  if (epochs.empty()) return std::nullopt;
  const double target = fraction * epochs.front().mean_loss;
  for (std::size_t e = 1; e < epochs.size(); ++e) {
    if (epochs[e].mean_loss <= target) return epochs[e].epoch;
  }
  return std::nullopt;
}

namespace {

// A loss over one batch, bound to its slot table.
struct BatchJob {
  std::vector<std::size_t> images;
  std::function<LossResult(std::span<const Embedding>)> loss;
  std::size_t fallbacks = 0;
};

std::vector<BatchJob> plan_epoch(const DatasetIndex& index, const TrainConfig& config, std::uint64_t seed) {
  std::vector<BatchJob> jobs;
  switch (config.loss) {
    case LossKind::Structured:
      for (auto& b : structured_epoch(index, config.mining, seed, config.margin)) {
        const GradientMode mode = config.grad_mode;
        jobs.push_back({b.images,
                        [batch = std::move(b.batch), mode](std::span<const Embedding> table) {
                          return structured_loss(table, batch, mode);
                        },
                        b.fallbacks});
      }
      break;
    case LossKind::Contrastive:
      for (auto& b : contrastive_epoch(index, config.contrastive_batch_size, seed)) {
        const double margin = config.margin;
        jobs.push_back({b.images,
                        [pairs = std::move(b.pairs), margin](std::span<const Embedding> table) {
                          LossResult r = contrastive_loss(table, pairs, margin);
                          const double s = 1.0 / static_cast<double>(pairs.size());
                          r.value *= s;
                          for (auto& g : r.grads) {
                            for (double& v : g) v *= s;
                          }
                          return r;
                        },
                        0});
      }
      break;
    case LossKind::Triplet:
      for (auto& b : triplet_epoch(index, config.triplet_batch_size, seed)) {
        const double margin = config.margin;
        jobs.push_back({b.images,
                        [triplets = std::move(b.triplets), margin](std::span<const Embedding> table) {
                          LossResult r = triplet_loss(table, triplets, margin);
                          const double s = 1.0 / static_cast<double>(triplets.size());
                          r.value *= s;
                          for (auto& g : r.grads) {
                            for (double& v : g) v *= s;
                          }
                          return r;
                        },
                        0});
      }
      break;
  }
  return jobs;
}

std::uint64_t epoch_seed(std::uint64_t seed, std::size_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t{out[0]} << 32) | out[1];
}

class Sgd {
 public:
  Sgd(const Model& model, double lr, double momentum) : lr_(lr), momentum_(momentum) {
    if (momentum_ != 0.0) velocity_ = ModelGradients::zeros(model);
  }

  void step(Model& model, const ModelGradients& grads) {
    auto params = parameter_tensors(model);
    const auto g = parameter_tensors(grads);
    if (momentum_ == 0.0) {
      for (std::size_t t = 0; t < params.size(); ++t) {
        for (std::size_t i = 0; i < params[t]->size(); ++i) (*params[t])[i] -= lr_ * (*g[t])[i];
      }
    } else {
      auto v = parameter_tensors(velocity_);
      for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& vt = *v[t];
        for (std::size_t i = 0; i < params[t]->size(); ++i) {
          vt[i] = momentum_ * vt[i] - lr_ * (*g[t])[i];
          (*params[t])[i] += vt[i];
        }
      }
    }
    ++model.net.generation;
  }

 private:
  double lr_;
  double momentum_;
  ModelGradients velocity_;
};

}  // namespace

TrainReport train(Model& model, const TrainingSet& data, const TrainConfig& config, const TrainHooks& hooks) {
  if (data.images.empty()) throw UsageError("training set is empty");
  if (config.learning_rate <= 0) throw UsageError("learning rate must be positive");
  if (config.loss == LossKind::Structured) config.mining.validate();

  DatasetIndex index = make_index(data.images, data.identities, data.cameras, data.query_cameras);

  // Five seeded crops per image; slot 0 of each list is the original.
  std::vector<std::vector<Tensor>> variants;
  if (config.augment) {
    std::mt19937_64 rng(epoch_seed(config.seed, 0xa11));
    for (const Tensor& img : data.images) {
      std::vector<Tensor> v{img};
      for (auto& c : augment(img, rng)) v.push_back(std::move(c.image));
      variants.push_back(std::move(v));
    }
  }
  std::mt19937_64 augment_rng(epoch_seed(config.seed, 0xa12));

  TrainReport report;
  Sgd sgd(model, config.learning_rate, config.momentum);

  for (std::size_t epoch = 0; epoch <= config.epochs; ++epoch) {
    const bool update = epoch > 0;
    auto jobs = plan_epoch(index, config, epoch_seed(config.seed, epoch));
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t b = 0; b < jobs.size(); ++b) {
      const BatchJob& job = jobs[b];
      std::vector<ModelPass> passes;
      std::vector<Embedding> table;
      passes.reserve(job.images.size());
      for (std::size_t record : job.images) {
        const Tensor* img = &data.images[record];
        if (config.augment && update) {
          std::uniform_int_distribution<std::size_t> pick(0, variants[record].size() - 1);
          img = &variants[record][pick(augment_rng)];
        }
        passes.push_back(run_forward(model, *img));
        table.push_back(passes.back().embedding);
      }
      const LossResult loss = job.loss(table);
      if (!std::isfinite(loss.value)) {
        throw TrainingDiverged("loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(b) + " (learning rate " + std::to_string(config.learning_rate) + ")");
      }
      log.mean_loss += loss.value;
      log.mining_fallbacks += job.fallbacks;
      ++log.batches;
      if (hooks.on_batch) hooks.on_batch({epoch, b, loss.value});
      if (!update) continue;
      ModelGradients total = ModelGradients::zeros(model);
      for (std::size_t s = 0; s < passes.size(); ++s) total.add(run_backward(model, passes[s], loss.grads[s]));
      sgd.step(model, total);
      for (const Tensor* t : parameter_tensors(model)) {
        if (!t->all_finite()) {
          throw TrainingDiverged("parameters became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(b) + " (learning rate " + std::to_string(config.learning_rate) + ")");
        }
      }
    }
    if (log.batches > 0) log.mean_loss /= static_cast<double>(log.batches);

    if (update && config.loss == LossKind::Structured && config.mining.source == DescriptorSource::CurrentEmbedding &&
        refresh_due(epoch, config.mining.refresh_interval)) {
      index = refresh_descriptors(index, config.mining.source,
                                  [&](std::size_t i) { return model.embed(data.images[i]); });
      log.refreshed = true;
    }
    report.epochs.push_back(log);
    if (hooks.on_epoch) hooks.on_epoch(epoch, model);
  }
  return report;
}

}  // namespace sdh
